#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vtpmd/cifar10.hpp"
#include "vtpmd/compress.hpp"
#include "vtpmd/decomp.hpp"
#include "vtpmd/errors.hpp"
#include "vtpmd/lstsq.hpp"
#include "vtpmd/prune.hpp"
#include "vtpmd/report.hpp"
#include "vtpmd/scorefit.hpp"
#include "vtpmd/seed.hpp"
#include "vtpmd/version.hpp"
#include "vtpmd/vit.hpp"
#include "vtpmd/weights.hpp"

namespace {

using namespace vtpmd;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

CompressMethod parse_compress_method(const std::string& name) {
  if (name == "svd") return CompressMethod::SVD;
  if (name == "qrp") return CompressMethod::PivotedQR;
  if (name == "lu") return CompressMethod::LU;
  throw Error("unknown compression method '" + name + "'");
}

PruneScope parse_scope(const std::string& name) {
  if (name == "global") return PruneScope::Global;
  if (name == "per-layer") return PruneScope::PerLayer;
  throw Error("unknown scope '" + name + "'");
}

ScoreMap scores_from_container(const WeightContainer& c) {
  ScoreMap scores;
  double lambda = 0.0;
  if (c.contains("lambda")) lambda = c.vector("lambda")[0];
  for (const std::string& name : c.names()) {
    if (name.rfind("score.", 0) != 0) continue;
    const std::string id = name.substr(6);
    scores.emplace(id, ImportanceScores{c.vector(name), lambda, id});
  }
  return scores;
}

Matrix concat_cols(const std::vector<const Matrix*>& parts) {
  std::size_t cols = 0;
  for (const Matrix* p : parts) cols += p->cols();
  Matrix out(parts[0]->rows(), cols);
  std::size_t offset = 0;
  for (const Matrix* p : parts) {
    for (std::size_t i = 0; i < p->rows(); ++i) {
      for (std::size_t j = 0; j < p->cols(); ++j) {
        out(i, offset + j) = (*p)(i, j);
      }
    }
    offset += p->cols();
  }
  return out;
}

Matrix synthetic_calib(std::size_t width, std::uint64_t seed) {
  const std::size_t rows = std::min<std::size_t>(256, 2 * width + 8);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix x(rows, width);
  for (double& v : x.data()) v = dist(rng);
  return x;
}

// The weight a score vector gates: the stacked q/k/v projection for the
// qkv site, the mlp weight itself otherwise.
Matrix location_weight(const TransformerModel& model, const std::string& id) {
  const std::string site = id.substr(id.find('.') + 1);
  const std::size_t block_idx =
      static_cast<std::size_t>(std::stoul(id.substr(5, id.find('.') - 5)));
  const EncoderBlockWeights& block = model.blocks[block_idx];
  auto dense_w = [&](const LinearLayer& layer) -> const Matrix& {
    if (!layer.is_dense()) {
      throw Error("fit-scores: layer for '" + id +
                  "' is factored; fit scores before compressing");
    }
    return layer.dense_form().w;
  };
  if (site == "qkv") {
    return concat_cols({&dense_w(block.wq), &dense_w(block.wk),
                        &dense_w(block.wv)});
  }
  if (site == "mlp1") return dense_w(block.mlp1);
  return dense_w(block.mlp2);
}

int run_decompose(const std::string& in, const std::string& tensor,
                  const std::string& method, std::optional<double> rank_tol,
                  const std::string& out_path) {
  const WeightContainer input = load_container(in);
  const Matrix w = input.matrix(tensor);
  WeightContainer out;

  if (method == "svd") {
    const SVDFactors f = rank_tol ? svd_condensed(w, rank_tol) : svd(w);
    out.add_matrix(tensor + ".U", f.u);
    out.add_vector(tensor + ".sigma", f.sigma);
    out.add_matrix(tensor + ".V", f.v);
  } else if (method == "qr") {
    const QRFactors f = qr_full(w);
    out.add_matrix(tensor + ".Q", f.q);
    out.add_matrix(tensor + ".R", f.r);
  } else if (method == "qrp") {
    const PivotedQRFactors f = qr_pivoted(w, rank_tol);
    out.add_matrix(tensor + ".Q", f.q);
    out.add_matrix(tensor + ".R1", f.r1);
    out.add_matrix(tensor + ".S", f.s);
    Vector perm(f.perm.size());
    for (std::size_t i = 0; i < f.perm.size(); ++i) {
      perm[i] = static_cast<double>(f.perm[i]);
    }
    out.add_vector(tensor + ".perm", perm);
  } else if (method == "cod") {
    const CODFactors f = cod(w, rank_tol);
    out.add_matrix(tensor + ".Q", f.q);
    out.add_matrix(tensor + ".L", f.l);
    out.add_matrix(tensor + ".Ustar", f.ustar);
  } else if (method == "lu") {
    const PLUFactors f = lu(w);
    Vector perm(f.perm.size());
    for (std::size_t i = 0; i < f.perm.size(); ++i) {
      perm[i] = static_cast<double>(f.perm[i]);
    }
    out.add_vector(tensor + ".P", perm);
    out.add_matrix(tensor + ".L", f.l);
    out.add_matrix(tensor + ".U", f.u);
    if (f.singular()) {
      std::cerr << "warning: " << f.zero_pivots.size()
                << " numerically zero pivot(s)\n";
    }
  } else if (method == "chol") {
    const CholeskyFactor f = cholesky(w);
    out.add_matrix(tensor + ".R", f.r);
  } else {
    throw Error("unknown decomposition method '" + method + "'");
  }
  save_container(out, out_path);
  return 0;
}

int run_fit_scores(const std::string& model_path,
                   const std::optional<std::string>& calib_path, double lambda,
                   std::size_t iters, const std::string& out_path) {
  const TransformerModel model = load_weights(model_path);
  std::optional<WeightContainer> calib;
  if (calib_path) calib = load_container(*calib_path);

  WeightContainer out;
  out.add_vector("lambda", Vector{lambda});
  const std::uint64_t seed = env_seed();
  std::uint64_t ordinal = 0;
  for (const std::string& id : prunable_locations(model)) {
    const Matrix w = location_weight(model, id);
    FitConfig cfg;
    cfg.lambda = lambda;
    cfg.iters = iters;
    if (calib && calib->contains("calib." + id)) {
      cfg.calib = calib->matrix("calib." + id);
    } else {
      cfg.calib = synthetic_calib(w.rows(), mix_seed(seed, ordinal));
    }
    const FitResult fit = fit_scores(w, cfg, id);
    out.add_vector("score." + id, fit.scores.a);
    ++ordinal;
  }
  save_container(out, out_path);
  return 0;
}

int run_prune(const std::string& model_path, const std::string& scores_path,
              double rate, const std::string& scope_name,
              const std::string& out_path, const std::string& report_path) {
  const TransformerModel model = load_weights(model_path);
  const ScoreMap scores = scores_from_container(load_container(scores_path));
  auto [pruned, masks] = prune_model(model, scores, rate, parse_scope(scope_name));
  save_weights(pruned, out_path);
  if (!report_path.empty()) {
    const CompressionReport report = prune_report(
        model, pruned, rate, std::filesystem::path(model_path).stem().string());
    write_text(report_path, compression_report_json(report));
  }
  return 0;
}

int run_compress(const std::string& model_path, const std::string& scores_path,
                 double rate, const std::string& method_name,
                 std::optional<std::uint64_t> rank, std::optional<double> energy,
                 const std::string& scope_name, std::size_t jobs,
                 const std::string& out_path, const std::string& report_path) {
  const TransformerModel model = load_weights(model_path);
  ScoreMap scores;
  if (!scores_path.empty()) {
    scores = scores_from_container(load_container(scores_path));
  }
  RankPolicy policy = rank ? RankPolicy(FixedRank{*rank})
                           : RankPolicy(EnergyFraction{*energy});
  CompressOptions options;
  options.scope = parse_scope(scope_name);
  options.jobs = jobs;
  options.model_name = std::filesystem::path(model_path).stem().string();

  auto [compressed, report] = compress_model(
      model, scores, rate, parse_compress_method(method_name), policy, options);
  save_weights(compressed, out_path);
  if (!report_path.empty()) {
    write_text(report_path, compression_report_json(report));
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             std::size_t limit, std::size_t jobs) {
  const TransformerModel model = load_weights(model_path);
  const Cifar10Batch batch = load_cifar10(data_path);
  EvalOptions opt;
  opt.jobs = jobs;
  const EvalResult result = evaluate(model, batch, limit, opt);
  char line[64];
  std::snprintf(line, sizeof(line), "accuracy=%.6f n=%zu\n", result.accuracy,
                result.n);
  std::cout << line;
  return 0;
}

int run_lstsq_bench(std::size_t m, std::size_t n, const std::string& kind,
                    double eps, bool as_json) {
  Matrix a;
  Vector x_true(n);
  if (kind == "lauchli") {
    a = lauchli_matrix(n, eps);
    // Small integers keep b = A x representable to an ulp, so the
    // reference solution is the constructed x.
    for (std::size_t i = 0; i < n; ++i) x_true[i] = static_cast<double>(i + 1);
  } else if (kind == "random") {
    std::mt19937_64 rng(env_seed());
    std::normal_distribution<double> dist(0.0, 1.0);
    a = Matrix(m, n);
    for (double& v : a.data()) v = dist(rng);
    for (std::size_t i = 0; i < n; ++i) x_true[i] = dist(rng);
  } else {
    throw Error("unknown instance kind '" + kind + "'");
  }
  const Vector b = matvec(a, x_true);
  const LstsqReport report = lstsq_compare(a, b, x_true);

  if (as_json) {
    std::cout << lstsq_report_json(report);
    return 0;
  }
  auto line = [](const char* name, const LstsqMethodResult& r) {
    if (!r.ok) {
      std::printf("%-18s failed: %s\n", name, r.error.c_str());
      return;
    }
    std::printf("%-18s solution_error=%.3e residual=%.3e wall_time=%.3es\n",
                name, r.solution_error, r.residual_norm, r.wall_time_seconds);
  };
  line("normal_equations", report.normal_equations);
  line("qr", report.qr);
  line("svd", report.svd);
  return 0;
}

int run_init(const std::string& preset, std::uint64_t seed,
             const std::string& out_path, const std::string& data_out,
             std::size_t records) {
  TransformerConfig cfg;
  if (preset == "tiny") {
    cfg = tiny_config();
  } else if (preset == "full") {
    cfg = full_scale_config();
  } else {
    throw Error("unknown preset '" + preset + "'");
  }
  if (!out_path.empty()) {
    save_weights(make_random_model(cfg, seed), out_path);
  }
  if (!data_out.empty()) {
    std::mt19937_64 rng(mix_seed(seed, 0xda7a));
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> label(0, 9);
    std::string bytes;
    bytes.reserve(records * 3073);
    for (std::size_t r = 0; r < records; ++r) {
      bytes.push_back(static_cast<char>(label(rng)));
      for (std::size_t p = 0; p < 3072; ++p) {
        bytes.push_back(static_cast<char>(byte(rng)));
      }
    }
    write_text(data_out, bytes);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prune and factorize vision-transformer linear projections"};
  app.set_version_flag("--version", std::string("vtpmd ") + kToolVersion);
  app.require_subcommand(1);

  // decompose
  auto* dec = app.add_subcommand("decompose", "factor one tensor of a container");
  std::string dec_in, dec_tensor, dec_method, dec_out;
  std::optional<double> dec_tol;
  dec->add_option("--in", dec_in, "input .vtpw container")->required();
  dec->add_option("--tensor", dec_tensor, "tensor name")->required();
  dec->add_option("--method", dec_method, "svd|qr|qrp|cod|lu|chol")->required();
  dec->add_option("--rank-tol", dec_tol, "rank tolerance");
  dec->add_option("--out", dec_out, "output container")->required();

  // fit-scores
  auto* fit = app.add_subcommand("fit-scores",
                                 "fit importance scores per prunable location");
  std::string fit_model, fit_out;
  std::optional<std::string> fit_calib;
  double fit_lambda = 1e-4;
  std::size_t fit_iters = 500;
  fit->add_option("--model", fit_model, "model .vtpw")->required();
  fit->add_option("--calib", fit_calib, "calibration container");
  fit->add_option("--lambda", fit_lambda, "l1 weight (default 1e-4)");
  fit->add_option("--iters", fit_iters, "ista iterations (default 500)");
  fit->add_option("--out", fit_out, "output scores container")->required();

  // prune
  auto* pr = app.add_subcommand("prune", "remove low-score features");
  std::string pr_model, pr_scores, pr_scope = "global", pr_out, pr_report;
  double pr_rate = 0.0;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--scores", pr_scores)->required();
  pr->add_option("--rate", pr_rate, "fraction of features to remove")
      ->required();
  pr->add_option("--scope", pr_scope, "global|per-layer");
  pr->add_option("--out", pr_out)->required();
  pr->add_option("--report", pr_report, "write a JSON report here");

  // compress
  auto* co = app.add_subcommand("compress", "prune, then factor every layer");
  std::string co_model, co_scores, co_method, co_scope = "global", co_out,
              co_report;
  double co_rate = 0.0;
  std::optional<std::uint64_t> co_rank;
  std::optional<double> co_energy;
  std::size_t co_jobs = 1;
  co->add_option("--model", co_model)->required();
  co->add_option("--scores", co_scores, "scores container (needed when rate > 0)");
  co->add_option("--rate", co_rate)->required();
  co->add_option("--method", co_method, "svd|qrp|lu")->required();
  auto* rank_opt = co->add_option("--rank", co_rank, "fixed rank k");
  auto* energy_opt =
      co->add_option("--energy", co_energy, "energy fraction delta");
  rank_opt->excludes(energy_opt);
  energy_opt->excludes(rank_opt);
  co->add_option("--scope", co_scope, "global|per-layer");
  co->add_option("--jobs", co_jobs, "concurrent layer workers");
  co->add_option("--out", co_out)->required();
  co->add_option("--report", co_report);

  // eval
  auto* ev = app.add_subcommand("eval", "top-1 accuracy on a cifar-10 batch");
  std::string ev_model, ev_data;
  std::size_t ev_limit = 10000, ev_jobs = 1;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data, "cifar-10 binary batch")->required();
  ev->add_option("--limit", ev_limit, "records to evaluate");
  ev->add_option("--jobs", ev_jobs, "concurrent image workers");

  // lstsq-bench
  auto* ls = app.add_subcommand("lstsq-bench",
                                "compare normal equations, qr and svd solvers");
  std::size_t ls_m = 50, ls_n = 10;
  std::string ls_kind = "random";
  double ls_eps = 1e-7;
  bool ls_json = false;
  ls->add_option("--m", ls_m, "rows (random kind)");
  ls->add_option("--n", ls_n, "columns");
  ls->add_option("--kind", ls_kind, "random|lauchli");
  ls->add_option("--eps", ls_eps, "lauchli epsilon");
  ls->add_flag("--json", ls_json, "emit the report as JSON");

  // report
  auto* rep = app.add_subcommand("report", "render a JSON report as a table");
  std::string rep_in;
  rep->add_option("--in", rep_in, "report JSON")->required();

  // init (convenience: seeded model / synthetic data for trying the tool)
  auto* in = app.add_subcommand("init", "write a seeded random model");
  std::string in_preset = "tiny", in_out, in_data;
  std::size_t in_records = 100;
  std::uint64_t in_seed = env_seed();
  in->add_option("--preset", in_preset, "tiny|full");
  in->add_option("--seed", in_seed, "rng seed (default VTPMD_SEED or 42)");
  in->add_option("--out", in_out, "model output path");
  in->add_option("--data-out", in_data, "synthetic cifar-format batch path");
  in->add_option("--records", in_records, "records for --data-out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (dec->parsed()) {
      return run_decompose(dec_in, dec_tensor, dec_method, dec_tol, dec_out);
    }
    if (fit->parsed()) {
      return run_fit_scores(fit_model, fit_calib, fit_lambda, fit_iters,
                            fit_out);
    }
    if (pr->parsed()) {
      return run_prune(pr_model, pr_scores, pr_rate, pr_scope, pr_out,
                       pr_report);
    }
    if (co->parsed()) {
      if (!co_rank && !co_energy) {
        std::cerr << "compress: one of --rank or --energy is required\n";
        return 2;
      }
      return run_compress(co_model, co_scores, co_rate, co_method, co_rank,
                          co_energy, co_scope, co_jobs, co_out, co_report);
    }
    if (ev->parsed()) return run_eval(ev_model, ev_data, ev_limit, ev_jobs);
    if (ls->parsed()) return run_lstsq_bench(ls_m, ls_n, ls_kind, ls_eps, ls_json);
    if (rep->parsed()) {
      std::cout << render_report_table(read_text(rep_in));
      return 0;
    }
    if (in->parsed()) {
      return run_init(in_preset, in_seed, in_out, in_data, in_records);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
