#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vtpmd/decomp.hpp"
#include "vtpmd/prune.hpp"
#include "vtpmd/vit.hpp"

namespace vtpmd {

enum class CompressMethod { SVD, PivotedQR, LU };

struct LayerReport {
  std::string name;
  std::array<std::uint64_t, 2> shape_before{};  // in, out
  std::array<std::uint64_t, 2> shape_after{};
  std::uint64_t rank = 0;  // 0 = left dense
  std::uint64_t params_before = 0;
  std::uint64_t params_after = 0;
  std::uint64_t flops_before = 0;
  std::uint64_t flops_after = 0;
  double rel_err = 0.0;
};

struct CompressionTotals {
  std::uint64_t params_before = 0;
  std::uint64_t params_after = 0;
  std::uint64_t flops_before = 0;
  std::uint64_t flops_after = 0;
};

struct CompressionReport {
  std::string model_name;
  double rate = 0.0;
  std::string method;
  std::string policy;
  std::vector<LayerReport> layers;
  CompressionTotals totals;
  std::string tool_version;
};

std::string method_name(CompressMethod method);
std::string policy_name(const RankPolicy& policy);

// Replaces a dense layer with its rank-k factored form:
//   SVD        left = U_k,        scale = sigma_k, right = V_k^T
//   PivotedQR  left = Q[:, :k],   right = [R1 S][:k, :] Pi^T
//   LU         left = P^-1 L[:, :k], right = U[:k, :]; square weights only
// rel_err is ||W - What||_F / ||W||_F.
std::pair<LinearLayer, LayerReport> compress_layer(const LinearLayer& layer,
                                                   CompressMethod method,
                                                   const RankPolicy& policy,
                                                   std::uint64_t tokens,
                                                   const std::string& name);

struct CompressOptions {
  PruneScope scope = PruneScope::Global;
  std::string model_name = "model";
  std::size_t jobs = 1;
};

// The pipeline order is fixed: prune first, then factor every remaining
// dense projection. With method LU, rectangular layers are left dense
// (the op itself rejects them; the pipeline skips instead).
std::pair<TransformerModel, CompressionReport> compress_model(
    const TransformerModel& model, const ScoreMap& scores, double rate,
    CompressMethod method, const RankPolicy& policy,
    const CompressOptions& options = {});

// Report for a prune-only run (no factorization, rank column 0).
CompressionReport prune_report(const TransformerModel& before,
                               const TransformerModel& after, double rate,
                               const std::string& model_name);

}  // namespace vtpmd
