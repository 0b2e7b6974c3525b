#include <cmath>
#include <limits>
#include <string>

#include "vtpmd/decomp.hpp"
#include "vtpmd/errors.hpp"

namespace vtpmd {

double default_rank_tol(std::size_t rows, std::size_t cols, double largest) {
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * std::abs(largest);
}

std::size_t rank_from_policy(const Vector& spectrum, const RankPolicy& policy) {
  if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
    if (fixed->k == 0) throw RankTooSmall("rank policy: k must be >= 1");
    if (fixed->k > spectrum.size()) {
      throw RankTooLarge("rank policy: k = " + std::to_string(fixed->k) +
                         " exceeds " + std::to_string(spectrum.size()) +
                         " stored components");
    }
    return fixed->k;
  }
  const auto& energy = std::get<EnergyFraction>(policy);
  if (!(energy.delta > 0.0 && energy.delta < 1.0)) {
    throw Error("rank policy: delta must lie in (0, 1)");
  }
  if (spectrum.size() == 0) {
    throw RankTooSmall("rank policy: empty spectrum");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    total += spectrum[i] * spectrum[i];
  }
  const double target = (1.0 - energy.delta) * total;
  double cumulative = 0.0;
  for (std::size_t k = 1; k <= spectrum.size(); ++k) {
    cumulative += spectrum[k - 1] * spectrum[k - 1];
    if (cumulative >= target) return k;
  }
  return spectrum.size();
}

void evd_guard(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw NotSupported("evd: non-square (" + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) +
                       "); a pruned projection has no eigendecomposition");
  }
  throw NotSupported("evd: path disabled; use svd");
}

Matrix unpermute_cols(const Matrix& r, const std::vector<std::size_t>& perm) {
  if (r.cols() != perm.size()) {
    throw DimensionMismatch("unpermute_cols: permutation length mismatch");
  }
  Matrix out(r.rows(), r.cols());
  for (std::size_t j = 0; j < r.cols(); ++j) {
    for (std::size_t i = 0; i < r.rows(); ++i) out(i, perm[j]) = r(i, j);
  }
  return out;
}

}  // namespace vtpmd
