#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vtpmd/matrix.hpp"
#include "vtpmd/vit.hpp"

namespace vtpmd {

struct ImportanceScores {
  Vector a;
  double lambda = 0.0;
  std::string layer_id;
};

struct PruneMask {
  std::vector<std::uint8_t> mask;  // 1 = keep
  double tau = 0.0;
  std::size_t kept = 0;
};

// tau such that exactly max(1, ceil((1 - rate) * len)) scores satisfy
// |a_i| >= tau; concretely the keep-th largest |a_i|.
double threshold_from_rate(const Vector& scores, double rate);

std::size_t keep_count(std::size_t len, double rate);

// Mask with exactly `keep` ones at the indices of the keep largest
// |score_i|, ties resolved toward lower indices.
PruneMask binarize(const Vector& scores, double tau, std::size_t keep);

// Physically removes the zero-scored columns; kept columns stay in
// order, bit-identical. Multiplying by Diag(a*) and deleting the zero
// columns is the same column selection.
Matrix apply_mask(const Matrix& x, const PruneMask& mask);

enum class PruneScope { Global, PerLayer };

// Prunable locations of a model, in deterministic order. Per block:
//   block<i>.qkv   gates the shared q/k/v input features   (embed wide)
//   block<i>.mlp1  gates the mlp1 input features            (embed wide)
//   block<i>.mlp2  gates the mlp hidden features            (hidden wide)
std::vector<std::string> prunable_locations(const TransformerModel& model);
std::size_t prunable_width(const TransformerModel& model,
                           const std::string& location);

using ScoreMap = std::map<std::string, ImportanceScores>;
using MaskMap = std::map<std::string, PruneMask>;

// Removes the masked features consistently: q/k/v and mlp1 inputs keep
// per-block gather lists over the normed residual, the mlp hidden mask
// shrinks mlp1 outputs and mlp2 inputs. Residual width never changes.
// Locations without scores are left unpruned; scores for unknown
// locations raise ShapeInconsistency.
std::pair<TransformerModel, MaskMap> prune_model(const TransformerModel& model,
                                                 const ScoreMap& scores,
                                                 double rate,
                                                 PruneScope scope);

}  // namespace vtpmd
