#include "vtpmd/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vtpmd/errors.hpp"

namespace vtpmd {

std::size_t keep_count(std::size_t len, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("prune: rate must lie in [0, 1)");
  }
  // Exact-arithmetic ceil((1 - rate) * len): the product can land an ulp
  // above an integer (e.g. rate 0.7, len 10), so nudge before rounding.
  const double raw = (1.0 - rate) * static_cast<double>(len);
  const auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::max<std::size_t>(1, keep);
}

namespace {

// Indices of the `keep` largest |scores|, ties to the lowest index.
std::vector<std::size_t> top_indices(const Vector& scores, std::size_t keep) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) {
                     return std::abs(scores[x]) > std::abs(scores[y]);
                   });
  order.resize(keep);
  return order;
}

}  // namespace

double threshold_from_rate(const Vector& scores, double rate) {
  if (scores.size() == 0) {
    throw EmptyScores("threshold_from_rate: no scores");
  }
  const std::size_t keep = keep_count(scores.size(), rate);
  std::vector<double> mags(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) mags[i] = std::abs(scores[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags[keep - 1];
}

PruneMask binarize(const Vector& scores, double tau, std::size_t keep) {
  if (keep == 0) throw Error("binarize: keep must be >= 1");
  if (keep > scores.size()) {
    throw Error("binarize: keep exceeds score count");
  }
  std::size_t at_least = 0;  // |a_i| > tau
  std::size_t at_most = 0;   // |a_i| >= tau
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double mag = std::abs(scores[i]);
    if (mag > tau) ++at_least;
    if (mag >= tau) ++at_most;
  }
  if (keep < at_least || keep > at_most) {
    throw InconsistentThreshold(
        "binarize: no mask with exactly " + std::to_string(keep) +
        " ones is consistent with tau");
  }

  PruneMask out;
  out.mask.assign(scores.size(), 0);
  out.tau = tau;
  out.kept = keep;
  for (std::size_t idx : top_indices(scores, keep)) out.mask[idx] = 1;
  return out;
}

Matrix apply_mask(const Matrix& x, const PruneMask& mask) {
  if (x.cols() != mask.mask.size()) {
    throw DimensionMismatch("apply_mask: mask length != cols");
  }
  std::vector<std::size_t> keep;
  keep.reserve(mask.kept);
  for (std::size_t j = 0; j < mask.mask.size(); ++j) {
    if (mask.mask[j]) keep.push_back(j);
  }
  return select_cols(x, keep);
}

std::vector<std::string> prunable_locations(const TransformerModel& model) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    out.push_back(prefix + "qkv");
    out.push_back(prefix + "mlp1");
    out.push_back(prefix + "mlp2");
  }
  return out;
}

namespace {

struct Location {
  std::size_t block;
  enum class Site { Qkv, Mlp1, Mlp2 } site;
};

Location parse_location(const TransformerModel& model, const std::string& id) {
  const auto dot = id.find('.');
  if (dot != std::string::npos && id.rfind("block", 0) == 0) {
    const std::string idx_str = id.substr(5, dot - 5);
    const std::string site = id.substr(dot + 1);
    std::size_t block = 0;
    bool numeric = !idx_str.empty();
    for (char c : idx_str) {
      if (c < '0' || c > '9') {
        numeric = false;
        break;
      }
      block = block * 10 + static_cast<std::size_t>(c - '0');
    }
    if (numeric && block < model.blocks.size()) {
      if (site == "qkv") return {block, Location::Site::Qkv};
      if (site == "mlp1") return {block, Location::Site::Mlp1};
      if (site == "mlp2") return {block, Location::Site::Mlp2};
    }
  }
  throw ShapeInconsistency("prune: location '" + id +
                           "' is not prunable (residual and output "
                           "dimensions must stay intact)");
}

Matrix keep_rows(const Matrix& w, const std::vector<std::size_t>& keep) {
  Matrix out(keep.size(), w.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) = w(keep[i], j);
  }
  return out;
}

const DenseForm& require_dense(const LinearLayer& layer, const std::string& id) {
  if (!layer.is_dense()) {
    throw ShapeInconsistency("prune: layer for '" + id +
                             "' is already factored; prune before "
                             "decomposition");
  }
  return layer.dense_form();
}

std::vector<std::size_t> kept_indices(const PruneMask& mask) {
  std::vector<std::size_t> keep;
  keep.reserve(mask.kept);
  for (std::size_t j = 0; j < mask.mask.size(); ++j) {
    if (mask.mask[j]) keep.push_back(j);
  }
  return keep;
}

}  // namespace

std::size_t prunable_width(const TransformerModel& model,
                           const std::string& location) {
  const Location loc = parse_location(model, location);
  const EncoderBlockWeights& block = model.blocks[loc.block];
  switch (loc.site) {
    case Location::Site::Qkv:
      return block.wq.in_dim();
    case Location::Site::Mlp1:
      return block.mlp1.in_dim();
    case Location::Site::Mlp2:
      return block.mlp2.in_dim();
  }
  throw Error("prunable_width: unreachable");
}

std::pair<TransformerModel, MaskMap> prune_model(const TransformerModel& model,
                                                 const ScoreMap& scores,
                                                 double rate,
                                                 PruneScope scope) {
  for (const auto& [id, sc] : scores) {
    const std::size_t width = prunable_width(model, id);
    if (sc.a.size() != width) {
      throw DimensionMismatch("prune: scores for '" + id + "' have length " +
                              std::to_string(sc.a.size()) + ", expected " +
                              std::to_string(width));
    }
  }

  MaskMap masks;
  if (scope == PruneScope::PerLayer) {
    for (const auto& [id, sc] : scores) {
      const std::size_t keep = keep_count(sc.a.size(), rate);
      const double tau = threshold_from_rate(sc.a, rate);
      masks.emplace(id, binarize(sc.a, tau, keep));
    }
  } else {
    // One tau over the concatenation of every score vector; ties break
    // toward the lower concatenated index (location order, then feature
    // order). A layer emptied by the global cut gets its top feature
    // back, and the weakest kept feature of a multi-feature layer is
    // dropped in exchange so the global total stays exact.
    std::vector<std::string> order;
    std::vector<double> flat;
    std::vector<std::size_t> layer_of;
    for (const std::string& id : prunable_locations(model)) {
      auto it = scores.find(id);
      if (it == scores.end()) continue;
      const std::size_t layer_idx = order.size();
      order.push_back(id);
      for (std::size_t i = 0; i < it->second.a.size(); ++i) {
        flat.push_back(it->second.a[i]);
        layer_of.push_back(layer_idx);
      }
    }
    if (!flat.empty()) {
      const std::size_t budget = keep_count(flat.size(), rate);
      const double tau = threshold_from_rate(Vector(flat), rate);

      std::vector<std::size_t> ranked(flat.size());
      std::iota(ranked.begin(), ranked.end(), 0);
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](std::size_t x, std::size_t y) {
                         return std::abs(flat[x]) > std::abs(flat[y]);
                       });

      std::vector<std::uint8_t> kept(flat.size(), 0);
      std::vector<std::size_t> layer_kept(order.size(), 0);
      for (std::size_t i = 0; i < budget; ++i) {
        kept[ranked[i]] = 1;
        ++layer_kept[layer_of[ranked[i]]];
      }

      std::size_t total = budget;
      // Floor: every layer keeps at least its strongest feature.
      for (std::size_t idx : ranked) {
        const std::size_t layer = layer_of[idx];
        if (layer_kept[layer] == 0) {
          kept[idx] = 1;
          ++layer_kept[layer];
          ++total;
        }
      }
      // Compensate from the weak end while some layer can give one up.
      for (std::size_t i = ranked.size(); i-- > 0 && total > budget;) {
        const std::size_t idx = ranked[i];
        const std::size_t layer = layer_of[idx];
        if (kept[idx] && layer_kept[layer] >= 2) {
          kept[idx] = 0;
          --layer_kept[layer];
          --total;
        }
      }

      std::size_t offset = 0;
      for (std::size_t layer = 0; layer < order.size(); ++layer) {
        const Vector& a = scores.at(order[layer]).a;
        PruneMask m;
        m.tau = tau;
        m.mask.assign(a.size(), 0);
        for (std::size_t i = 0; i < a.size(); ++i) {
          m.mask[i] = kept[offset + i];
        }
        m.kept = layer_kept[layer];
        masks.emplace(order[layer], std::move(m));
        offset += a.size();
      }
    }
  }

  TransformerModel pruned = model;
  for (const auto& [id, mask] : masks) {
    const Location loc = parse_location(model, id);
    EncoderBlockWeights& block = pruned.blocks[loc.block];
    const std::vector<std::size_t> keep = kept_indices(mask);
    switch (loc.site) {
      case Location::Site::Qkv: {
        const DenseForm& q = require_dense(block.wq, id);
        const DenseForm& k = require_dense(block.wk, id);
        const DenseForm& v = require_dense(block.wv, id);
        block.qkv_keep = keep;
        block.wq = LinearLayer::dense(keep_rows(q.w, keep), q.b);
        block.wk = LinearLayer::dense(keep_rows(k.w, keep), k.b);
        block.wv = LinearLayer::dense(keep_rows(v.w, keep), v.b);
        break;
      }
      case Location::Site::Mlp1: {
        const DenseForm& m1 = require_dense(block.mlp1, id);
        block.mlp1_keep = keep;
        block.mlp1 = LinearLayer::dense(keep_rows(m1.w, keep), m1.b);
        break;
      }
      case Location::Site::Mlp2: {
        const DenseForm& m1 = require_dense(block.mlp1, id);
        const DenseForm& m2 = require_dense(block.mlp2, id);
        // Hidden features: mlp1 loses output columns and bias entries,
        // mlp2 loses the matching input rows.
        Matrix w1(m1.w.rows(), keep.size());
        Vector b1(keep.size());
        for (std::size_t j = 0; j < keep.size(); ++j) {
          for (std::size_t i = 0; i < m1.w.rows(); ++i) {
            w1(i, j) = m1.w(i, keep[j]);
          }
          b1[j] = m1.b[keep[j]];
        }
        block.mlp1 = LinearLayer::dense(std::move(w1), std::move(b1));
        block.mlp2 = LinearLayer::dense(keep_rows(m2.w, keep), m2.b);
        break;
      }
    }
  }
  return {std::move(pruned), std::move(masks)};
}

}  // namespace vtpmd
