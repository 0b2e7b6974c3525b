// Drives the installed CLI binary end to end through std::system.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "oracles.hpp"
#include "vtpmd/decomp.hpp"
#include "vtpmd/weights.hpp"

#ifndef VTPMD_CLI_PATH
#error "VTPMD_CLI_PATH must point at the vtpmd binary"
#endif

using namespace vtpmd;

namespace {

const std::filesystem::path& work_dir() {
  static const auto dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("vtpmd_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(VTPMD_CLI_PATH) + " " + args;
  if (!stdout_file.empty()) {
    cmd += " > " + (work_dir() / stdout_file).string();
  } else {
    cmd += " > /dev/null";
  }
  cmd += " 2> " + (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::string at(const std::string& name) {
  return (work_dir() / name).string();
}

}  // namespace

TEST_CASE("unknown flags exit 2 with usage text") {
  CHECK(run_cli("--definitely-not-a-flag") == 2);
  CHECK(run_cli("compress --bogus") == 2);
  const std::string err = slurp(work_dir() / "stderr.txt");
  CHECK(err.find("Usage") != std::string::npos);
}

TEST_CASE("missing required arguments exit 2") {
  CHECK(run_cli("decompose --in nope.vtpw") == 2);
}

TEST_CASE("operational failures exit 1") {
  CHECK(run_cli("eval --model " + at("missing.vtpw") + " --data " +
                at("missing.bin")) == 1);
}

TEST_CASE("init + decompose writes verifiable factors") {
  REQUIRE(run_cli("init --preset tiny --seed 7 --out " + at("m.vtpw")) == 0);
  REQUIRE(run_cli("decompose --in " + at("m.vtpw") +
                  " --tensor block0.wq.w --method svd --out " +
                  at("f.vtpw")) == 0);

  const WeightContainer model_c = load_container(at("m.vtpw"));
  const WeightContainer factors = load_container(at("f.vtpw"));
  const Matrix w = model_c.matrix("block0.wq.w");
  const Matrix u = factors.matrix("block0.wq.w.U");
  const Vector sigma = factors.vector("block0.wq.w.sigma");
  const Matrix v = factors.matrix("block0.wq.w.V");

  Matrix us = u.block(0, 0, u.rows(), sigma.size());
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    for (std::size_t i = 0; i < us.rows(); ++i) us(i, j) *= sigma[j];
  }
  const Matrix recon = oracles::naive_matmul(
      us, transpose(v.block(0, 0, v.rows(), sigma.size())));
  CHECK(oracles::recon_err(w, recon) <= 1e-9 * frobenius_norm(w));
}

TEST_CASE("decompose supports the whole method list") {
  REQUIRE(run_cli("init --preset tiny --seed 7 --out " + at("m2.vtpw")) == 0);
  for (const std::string method : {"qr", "qrp", "cod", "lu"}) {
    CHECK(run_cli("decompose --in " + at("m2.vtpw") +
                  " --tensor block0.wo.w --method " + method + " --out " +
                  at("f_" + method + ".vtpw")) == 0);
  }
  // chol needs an SPD input; a random square weight is rejected.
  CHECK(run_cli("decompose --in " + at("m2.vtpw") +
                " --tensor block0.wo.w --method chol --out " +
                at("f_chol.vtpw")) == 1);
}

TEST_CASE("full pipeline: fit-scores, compress, eval, report") {
  REQUIRE(run_cli("init --preset tiny --seed 11 --out " + at("p.vtpw") +
                  " --data-out " + at("p.bin") + " --records 16") == 0);
  REQUIRE(run_cli("fit-scores --model " + at("p.vtpw") +
                  " --lambda 1e-4 --iters 60 --out " + at("s.vtpw")) == 0);

  REQUIRE(run_cli("compress --model " + at("p.vtpw") + " --scores " +
                  at("s.vtpw") +
                  " --rate 0.25 --method svd --rank 4 --out " +
                  at("c.vtpw") + " --report " + at("r.json")) == 0);

  const auto report = nlohmann::ordered_json::parse(slurp(work_dir() / "r.json"));
  CHECK(report["rate"].get<double>() == 0.25);
  CHECK(report["method"].get<std::string>() == "svd");
  CHECK(report["totals"]["params_after"].get<std::uint64_t>() <
        report["totals"]["params_before"].get<std::uint64_t>());

  REQUIRE(run_cli("eval --model " + at("c.vtpw") + " --data " + at("p.bin") +
                  " --limit 16", "eval.txt") == 0);
  const std::string eval_out = slurp(work_dir() / "eval.txt");
  CHECK(eval_out.find("accuracy=") != std::string::npos);
  CHECK(eval_out.find("n=16") != std::string::npos);

  REQUIRE(run_cli("report --in " + at("r.json"), "table.txt") == 0);
  const std::string table = slurp(work_dir() / "table.txt");
  CHECK(table.find("head") != std::string::npos);
}

TEST_CASE("compress rate 0 with a saturated rank is lossless per layer") {
  REQUIRE(run_cli("init --preset tiny --seed 13 --out " + at("l.vtpw")) == 0);
  REQUIRE(run_cli("compress --model " + at("l.vtpw") +
                  " --rate 0 --method svd --rank 1000000 --out " +
                  at("lc.vtpw") + " --report " + at("lr.json")) == 0);
  const auto report = nlohmann::ordered_json::parse(slurp(work_dir() / "lr.json"));
  std::uint64_t expected_total = 0;
  for (const auto& row : report["layers"]) {
    CHECK(row["rel_err"].get<double>() <= 1e-9);
    const auto m = row["shape_after"][0].get<std::uint64_t>();
    const auto n = row["shape_after"][1].get<std::uint64_t>();
    const auto k = row["rank"].get<std::uint64_t>();
    CHECK(k == std::min(m, n));
    expected_total += k * (m + n) + k + n;  // factored form at full rank
  }
  CHECK(report["totals"]["params_after"].get<std::uint64_t>() == expected_total);
}

TEST_CASE("lstsq-bench lauchli json reproduces the accuracy ordering") {
  REQUIRE(run_cli("lstsq-bench --kind lauchli --n 8 --eps 1e-7 --json",
                  "lstsq.json") == 0);
  const auto j = nlohmann::ordered_json::parse(slurp(work_dir() / "lstsq.json"));
  const double qr_err = j["qr"]["solution_error"].get<double>();
  double ne_err = std::numeric_limits<double>::infinity();
  if (!j["normal_equations"].contains("error")) {
    const auto& v = j["normal_equations"]["solution_error"];
    ne_err = v.is_string() ? std::numeric_limits<double>::infinity()
                           : v.get<double>();
  }
  CHECK(ne_err > qr_err);
}

TEST_CASE("prune subcommand emits a shape-change report") {
  REQUIRE(run_cli("init --preset tiny --seed 17 --out " + at("pm.vtpw")) == 0);
  REQUIRE(run_cli("fit-scores --model " + at("pm.vtpw") +
                  " --lambda 1e-4 --iters 40 --out " + at("ps.vtpw")) == 0);
  REQUIRE(run_cli("prune --model " + at("pm.vtpw") + " --scores " +
                  at("ps.vtpw") +
                  " --rate 0.5 --scope per-layer --out " + at("pp.vtpw") +
                  " --report " + at("pr.json")) == 0);
  const auto report = nlohmann::ordered_json::parse(slurp(work_dir() / "pr.json"));
  CHECK(report["method"].get<std::string>() == "prune");
  bool any_shrunk = false;
  for (const auto& row : report["layers"]) {
    if (row["shape_after"][0].get<std::uint64_t>() <
        row["shape_before"][0].get<std::uint64_t>()) {
      any_shrunk = true;
    }
  }
  CHECK(any_shrunk);

  const TransformerModel pruned = load_weights(at("pp.vtpw"));
  CHECK(pruned.blocks[0].wq.in_dim() == 8);  // half of embed 16
}

TEST_CASE("help exits zero") {
  CHECK(run_cli("--help", "help.txt") == 0);
  const std::string help = slurp(work_dir() / "help.txt");
  CHECK(help.find("compress") != std::string::npos);
}
