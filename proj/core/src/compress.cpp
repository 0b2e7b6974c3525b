#include "vtpmd/compress.hpp"

#include <cmath>
#include <functional>
#include <thread>

#include "vtpmd/errors.hpp"
#include "vtpmd/version.hpp"

namespace vtpmd {

std::string method_name(CompressMethod method) {
  switch (method) {
    case CompressMethod::SVD:
      return "svd";
    case CompressMethod::PivotedQR:
      return "qrp";
    case CompressMethod::LU:
      return "lu";
  }
  return "unknown";
}

std::string policy_name(const RankPolicy& policy) {
  if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
    return "rank:" + std::to_string(fixed->k);
  }
  const auto& energy = std::get<EnergyFraction>(policy);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "energy:%g", energy.delta);
  return buf;
}

namespace {

double relative_error(const Matrix& w, const Matrix& approx) {
  const double denom = frobenius_norm(w);
  if (denom == 0.0) return 0.0;
  return frobenius_norm(sub(w, approx)) / denom;
}

Matrix materialize(const FactoredForm& f) {
  Matrix mid = f.left;
  if (f.scale) {
    for (std::size_t i = 0; i < mid.rows(); ++i) {
      for (std::size_t j = 0; j < mid.cols(); ++j) {
        mid(i, j) *= (*f.scale)[j];
      }
    }
  }
  return matmul(mid, f.right);
}

Vector row_norms(const Matrix& r) {
  Vector out(r.rows());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < r.cols(); ++j) sum += r(i, j) * r(i, j);
    out[i] = std::sqrt(sum);
  }
  return out;
}

}  // namespace

std::pair<LinearLayer, LayerReport> compress_layer(const LinearLayer& layer,
                                                   CompressMethod method,
                                                   const RankPolicy& policy,
                                                   std::uint64_t tokens,
                                                   const std::string& name) {
  if (!layer.is_dense()) {
    throw MethodUnsupported("compress_layer: '" + name +
                            "' is already factored");
  }
  const DenseForm& d = layer.dense_form();
  const Matrix& w = d.w;

  LayerReport report;
  report.name = name;
  report.shape_before = {w.rows(), w.cols()};
  report.shape_after = report.shape_before;
  report.params_before = param_count(layer);
  report.flops_before = flop_count(layer, tokens);

  LinearLayer out = layer;
  switch (method) {
    case CompressMethod::SVD: {
      const SVDFactors full = svd(w);
      const SVDFactors trunc = svd_truncate(full, policy);
      const std::size_t k = trunc.sigma.size();
      out = LinearLayer::factored(trunc.u, trunc.sigma, transpose(trunc.v),
                                  d.b);
      report.rank = k;
      break;
    }
    case CompressMethod::PivotedQR: {
      // Keep every pivot so the policy sees the whole spectrum proxy
      // (the row norms of R = [R1 S]).
      const PivotedQRFactors f = qr_pivoted(w, 0.0);
      Matrix r(f.rank, w.cols());
      for (std::size_t i = 0; i < f.rank; ++i) {
        for (std::size_t j = 0; j < f.rank; ++j) r(i, j) = f.r1(i, j);
        for (std::size_t j = 0; j < w.cols() - f.rank; ++j) {
          r(i, f.rank + j) = f.s(i, j);
        }
      }
      const std::size_t k = rank_from_policy(row_norms(r), policy);
      out = LinearLayer::factored(
          f.q.block(0, 0, w.rows(), k),
          std::nullopt,
          unpermute_cols(r.block(0, 0, k, w.cols()), f.perm), d.b);
      report.rank = k;
      break;
    }
    case CompressMethod::LU: {
      if (w.rows() != w.cols()) {
        throw MethodUnsupported("compress_layer: lu needs a square weight, '" +
                                name + "' is " + std::to_string(w.rows()) +
                                "x" + std::to_string(w.cols()));
      }
      const PLUFactors f = lu(w);
      const std::size_t k = rank_from_policy(row_norms(f.u), policy);
      // left = P^-1 L[:, :k]: row perm[i] of left is row i of L.
      Matrix left(w.rows(), k);
      for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) left(f.perm[i], j) = f.l(i, j);
      }
      out = LinearLayer::factored(std::move(left), std::nullopt,
                                  f.u.block(0, 0, k, w.cols()), d.b);
      report.rank = k;
      break;
    }
  }

  report.params_after = param_count(out);
  report.flops_after = flop_count(out, tokens);
  report.rel_err = relative_error(w, materialize(out.factored_form()));
  return {std::move(out), std::move(report)};
}

namespace {

struct NamedLayer {
  std::string name;
  LinearLayer* layer;
};

std::vector<NamedLayer> enumerate_layers(TransformerModel& model) {
  std::vector<NamedLayer> out;
  out.push_back({"patch_embed", &model.patch_embed});
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    EncoderBlockWeights& b = model.blocks[i];
    out.push_back({prefix + "wq", &b.wq});
    out.push_back({prefix + "wk", &b.wk});
    out.push_back({prefix + "wv", &b.wv});
    out.push_back({prefix + "wo", &b.wo});
    out.push_back({prefix + "mlp1", &b.mlp1});
    out.push_back({prefix + "mlp2", &b.mlp2});
  }
  out.push_back({"head", &model.head});
  return out;
}

LayerReport dense_passthrough_report(const std::string& name,
                                     const LinearLayer& layer,
                                     std::uint64_t tokens) {
  LayerReport report;
  report.name = name;
  report.shape_before = {layer.in_dim(), layer.out_dim()};
  report.shape_after = report.shape_before;
  report.rank = 0;
  report.params_before = param_count(layer);
  report.params_after = report.params_before;
  report.flops_before = flop_count(layer, tokens);
  report.flops_after = report.flops_before;
  report.rel_err = 0.0;
  return report;
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(jobs, count);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::pair<TransformerModel, CompressionReport> compress_model(
    const TransformerModel& model, const ScoreMap& scores, double rate,
    CompressMethod method, const RankPolicy& policy,
    const CompressOptions& options) {
  if (rate > 0.0 && scores.empty()) {
    throw Error("compress_model: pruning rate > 0 requires scores");
  }

  // Original dense shapes, for the before columns of the report.
  TransformerModel before = model;
  std::vector<NamedLayer> before_layers = enumerate_layers(before);

  auto [pruned, masks] = prune_model(model, scores, rate, options.scope);

  const std::uint64_t tokens = model.tokens();
  std::vector<NamedLayer> layers = enumerate_layers(pruned);

  CompressionReport report;
  report.model_name = options.model_name;
  report.rate = rate;
  report.method = method_name(method);
  report.policy = policy_name(policy);
  report.tool_version = kToolVersion;
  report.layers.resize(layers.size());

  parallel_for(layers.size(), options.jobs, [&](std::size_t i) {
    const NamedLayer& named = layers[i];
    LayerReport entry;
    const bool square = named.layer->in_dim() == named.layer->out_dim();
    if (method == CompressMethod::LU && !square) {
      entry = dense_passthrough_report(named.name, *named.layer, tokens);
    } else {
      // Model-level FixedRank saturates at each layer's full rank, so a
      // single --rank can mean "lossless" across unequal layer shapes.
      // compress_layer called directly keeps the strict RankTooLarge.
      RankPolicy effective = policy;
      if (const auto* fixed = std::get_if<FixedRank>(&policy)) {
        effective = FixedRank{std::min(
            fixed->k, std::min(named.layer->in_dim(), named.layer->out_dim()))};
      }
      auto [factored, layer_report] =
          compress_layer(*named.layer, method, effective, tokens, named.name);
      *named.layer = std::move(factored);
      entry = std::move(layer_report);
    }
    // shape_before reflects the un-pruned dense weight.
    entry.shape_before = {before_layers[i].layer->in_dim(),
                          before_layers[i].layer->out_dim()};
    entry.params_before = param_count(*before_layers[i].layer);
    entry.flops_before = flop_count(*before_layers[i].layer, tokens);
    report.layers[i] = std::move(entry);
  });

  for (const LayerReport& entry : report.layers) {
    report.totals.params_before += entry.params_before;
    report.totals.params_after += entry.params_after;
    report.totals.flops_before += entry.flops_before;
    report.totals.flops_after += entry.flops_after;
  }
  return {std::move(pruned), std::move(report)};
}

CompressionReport prune_report(const TransformerModel& before,
                               const TransformerModel& after, double rate,
                               const std::string& model_name) {
  TransformerModel b = before;
  TransformerModel a = after;
  std::vector<NamedLayer> before_layers = enumerate_layers(b);
  std::vector<NamedLayer> after_layers = enumerate_layers(a);
  const std::uint64_t tokens = before.tokens();

  CompressionReport report;
  report.model_name = model_name;
  report.rate = rate;
  report.method = "prune";
  report.policy = "none";
  report.tool_version = kToolVersion;
  for (std::size_t i = 0; i < before_layers.size(); ++i) {
    LayerReport entry;
    entry.name = before_layers[i].name;
    entry.shape_before = {before_layers[i].layer->in_dim(),
                          before_layers[i].layer->out_dim()};
    entry.shape_after = {after_layers[i].layer->in_dim(),
                         after_layers[i].layer->out_dim()};
    entry.rank = 0;
    entry.params_before = param_count(*before_layers[i].layer);
    entry.params_after = param_count(*after_layers[i].layer);
    entry.flops_before = flop_count(*before_layers[i].layer, tokens);
    entry.flops_after = flop_count(*after_layers[i].layer, tokens);
    entry.rel_err = 0.0;
    report.totals.params_before += entry.params_before;
    report.totals.params_after += entry.params_after;
    report.totals.flops_before += entry.flops_before;
    report.totals.flops_after += entry.flops_after;
    report.layers.push_back(std::move(entry));
  }
  return report;
}

}  // namespace vtpmd
