#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vtpmd/errors.hpp"
#include "vtpmd/prune.hpp"
#include "vtpmd/vit.hpp"

using namespace vtpmd;

TEST_CASE("threshold_from_rate basics") {
  const Vector scores{0.9, 0.1, 0.5, 0.7};
  CHECK(threshold_from_rate(scores, 0.5) == 0.7);  // keep 2
  CHECK(threshold_from_rate(scores, 0.0) == 0.1);  // keep all, tau = min
  CHECK_THROWS_AS(threshold_from_rate(Vector(), 0.5), EmptyScores);

  const Vector ties{0.3, 0.3, 0.3};
  CHECK(keep_count(3, 0.5) == 2);
  CHECK(threshold_from_rate(ties, 0.5) == 0.3);
}

TEST_CASE("keep_count uses exact-arithmetic ceil") {
  CHECK(keep_count(10, 0.0) == 10);
  CHECK(keep_count(10, 0.7) == 3);   // fp product lands an ulp above 3
  CHECK(keep_count(10, 0.9) == 1);
  CHECK(keep_count(4, 0.99) == 1);   // floor at one kept feature
  CHECK(keep_count(7, 0.5) == 4);    // ceil(3.5)
}

TEST_CASE("binarize places ones at the top scores") {
  const Vector scores{0.9, 0.1, 0.5, 0.7};
  const PruneMask m = binarize(scores, 0.7, 2);
  CHECK(m.mask == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(m.kept == 2);
  CHECK(m.tau == 0.7);

  const PruneMask all = binarize(scores, 0.1, 4);
  CHECK(all.mask == std::vector<std::uint8_t>{1, 1, 1, 1});

  const Vector ties{0.3, 0.3, 0.3};
  const PruneMask t = binarize(ties, 0.3, 2);
  CHECK(t.mask == std::vector<std::uint8_t>{1, 1, 0});

  // keep = 3 with tau above every |score| cannot be satisfied.
  CHECK_THROWS_AS(binarize(scores, 0.95, 3), InconsistentThreshold);
}

TEST_CASE("apply_mask is column selection") {
  Matrix x{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  PruneMask m;
  m.mask = {1, 0, 1};
  m.kept = 2;
  const Matrix out = apply_mask(x, m);
  CHECK(out == Matrix{{1.0, 3.0}, {4.0, 6.0}});

  PruneMask all;
  all.mask = {1, 1, 1};
  all.kept = 3;
  CHECK(apply_mask(x, all) == x);

  PruneMask bad;
  bad.mask = {1, 1};
  bad.kept = 2;
  CHECK_THROWS_AS(apply_mask(x, bad), DimensionMismatch);
}

TEST_CASE("apply_mask equals the diagonal-multiply oracle") {
  std::mt19937_64 rng(607);
  const Matrix x = oracles::random_matrix(rng, 4, 6);
  const Vector scores = oracles::random_vector(rng, 6);
  const double tau = threshold_from_rate(scores, 0.5);
  const PruneMask m = binarize(scores, tau, keep_count(6, 0.5));

  // X * Diag(a*) then delete the zero columns.
  Matrix xd = x;
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 4; ++i) {
      xd(i, j) *= m.mask[j] ? 1.0 : 0.0;
    }
  }
  Matrix expect(4, m.kept);
  std::size_t c = 0;
  for (std::size_t j = 0; j < 6; ++j) {
    if (!m.mask[j]) continue;
    for (std::size_t i = 0; i < 4; ++i) expect(i, c) = xd(i, j);
    ++c;
  }
  CHECK(apply_mask(x, m) == expect);
}

TEST_CASE("selection matches the brute-force oracle including ties") {
  std::mt19937_64 rng(613);
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = dim(rng);
    Vector scores(d);
    for (std::size_t i = 0; i < d; ++i) {
      // Coarse quantization forces frequent exact ties.
      scores[i] = (coarse(rng) - 2) * 0.25;
    }
    const double rate = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
    const auto oracle = oracles::brute_force_prune(scores, rate);
    const double tau = threshold_from_rate(scores, rate);
    CHECK(tau == oracle.tau);
    const PruneMask m = binarize(scores, tau, oracle.kept);
    REQUIRE(m.mask.size() == d);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(static_cast<int>(m.mask[i]) == oracle.mask[i]);
    }
  }
}

TEST_CASE("raising the rate never increases kept counts") {
  std::mt19937_64 rng(617);
  const Vector scores = oracles::random_vector(rng, 11);
  std::size_t prev = 11;
  for (double rate = 0.0; rate < 1.0; rate += 0.1) {
    const std::size_t k = keep_count(scores.size(), rate);
    CHECK(k <= prev);
    prev = k;
  }
}

TEST_CASE("selection is invariant to positive scaling") {
  std::mt19937_64 rng(619);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector scores = oracles::random_vector(rng, 9);
    Vector scaled(9);
    const double c = std::uniform_real_distribution<double>(0.1, 100.0)(rng);
    for (std::size_t i = 0; i < 9; ++i) scaled[i] = scores[i] * c;
    for (double rate : {0.2, 0.5, 0.8}) {
      const auto a = oracles::brute_force_prune(scores, rate);
      const auto b = oracles::brute_force_prune(scaled, rate);
      const PruneMask ma = binarize(scores, a.tau, a.kept);
      const PruneMask mb = binarize(scaled, b.tau, b.kept);
      CHECK(ma.mask == mb.mask);
    }
  }
}

namespace {

ScoreMap uniform_scores(const TransformerModel& model, std::mt19937_64& rng) {
  ScoreMap scores;
  for (const std::string& id : prunable_locations(model)) {
    const std::size_t width = prunable_width(model, id);
    scores.emplace(id,
                   ImportanceScores{oracles::random_vector(rng, width), 1e-4, id});
  }
  return scores;
}

Matrix random_image(std::mt19937_64& rng) {
  return oracles::random_matrix(rng, 3, 1024);
}

}  // namespace

TEST_CASE("prune_model with rate 0 keeps shapes and all-ones masks") {
  std::mt19937_64 rng(701);
  const TransformerModel model = make_random_model(tiny_config(), 5);
  const ScoreMap scores = uniform_scores(model, rng);
  const auto [pruned, masks] = prune_model(model, scores, 0.0,
                                           PruneScope::PerLayer);
  CHECK(masks.size() == scores.size());
  for (const auto& [id, m] : masks) {
    CHECK(m.kept == m.mask.size());
  }
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    CHECK(pruned.blocks[i].wq.in_dim() == model.blocks[i].wq.in_dim());
    CHECK(pruned.blocks[i].mlp1.out_dim() == model.blocks[i].mlp1.out_dim());
  }
  const Matrix img = random_image(rng);
  const Vector a = forward(model, img);
  const Vector b = forward(pruned, img);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("per-layer rate 0.5 halves every prunable dim and still runs") {
  std::mt19937_64 rng(709);
  const TransformerModel model = make_random_model(tiny_config(), 6);
  const ScoreMap scores = uniform_scores(model, rng);
  const auto [pruned, masks] = prune_model(model, scores, 0.5,
                                           PruneScope::PerLayer);
  const std::size_t embed = model.config.embed_dim;
  const std::size_t hidden = model.config.hidden_dim();
  for (const EncoderBlockWeights& block : pruned.blocks) {
    CHECK(block.wq.in_dim() == keep_count(embed, 0.5));
    CHECK(block.wk.in_dim() == keep_count(embed, 0.5));
    CHECK(block.wv.in_dim() == keep_count(embed, 0.5));
    CHECK(block.mlp1.in_dim() == keep_count(embed, 0.5));
    CHECK(block.mlp1.out_dim() == keep_count(hidden, 0.5));
    CHECK(block.mlp2.in_dim() == keep_count(hidden, 0.5));
    CHECK(block.wo.in_dim() == embed);  // output side untouched
  }
  const Vector logits = forward(pruned, random_image(rng));
  CHECK(logits.size() == model.config.classes);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    CHECK(std::isfinite(logits[i]));
  }
}

TEST_CASE("global scope ranks across layers with an exact total") {
  std::mt19937_64 rng(719);
  const TransformerModel model = make_random_model(tiny_config(), 7);
  ScoreMap scores = uniform_scores(model, rng);
  // One location uniformly tiny: it should lose nearly everything.
  const std::string victim = "block0.mlp2";
  for (std::size_t i = 0; i < scores.at(victim).a.size(); ++i) {
    scores.at(victim).a[i] = 1e-9 * (1.0 + 0.001 * i);
  }
  const double rate = 0.5;
  const auto [pruned, masks] = prune_model(model, scores, rate,
                                           PruneScope::Global);

  std::size_t total_dims = 0;
  std::size_t total_kept = 0;
  for (const auto& [id, m] : masks) {
    total_dims += m.mask.size();
    total_kept += m.kept;
  }
  CHECK(total_kept == keep_count(total_dims, rate));

  const double victim_frac =
      static_cast<double>(masks.at(victim).kept) /
      static_cast<double>(masks.at(victim).mask.size());
  for (const auto& [id, m] : masks) {
    if (id == victim) continue;
    const double frac = static_cast<double>(m.kept) /
                        static_cast<double>(m.mask.size());
    CHECK(victim_frac <= frac);
  }
}

TEST_CASE("global scope floors each layer at one kept feature") {
  std::mt19937_64 rng(727);
  TransformerConfig cfg = tiny_config();
  cfg.layers = 1;
  const TransformerModel model = make_random_model(cfg, 8);
  ScoreMap scores = uniform_scores(model, rng);
  for (std::size_t i = 0; i < scores.at("block0.qkv").a.size(); ++i) {
    scores.at("block0.qkv").a[i] = 1e-12;
  }
  const auto [pruned, masks] = prune_model(model, scores, 0.9,
                                           PruneScope::Global);
  CHECK(masks.at("block0.qkv").kept >= 1);
  CHECK(pruned.blocks[0].wq.in_dim() >= 1);
  const Vector logits = forward(pruned, random_image(rng));
  CHECK(logits.size() == cfg.classes);
}

TEST_CASE("scores for unknown locations are rejected") {
  const TransformerModel model = make_random_model(tiny_config(), 9);
  ScoreMap scores;
  scores.emplace("block0.wo",
                 ImportanceScores{Vector(16, 1.0), 1e-4, "block0.wo"});
  CHECK_THROWS_AS(prune_model(model, scores, 0.5, PruneScope::PerLayer),
                  ShapeInconsistency);
}

TEST_CASE("score length mismatches are rejected") {
  const TransformerModel model = make_random_model(tiny_config(), 10);
  ScoreMap scores;
  scores.emplace("block0.qkv",
                 ImportanceScores{Vector(3, 1.0), 1e-4, "block0.qkv"});
  CHECK_THROWS_AS(prune_model(model, scores, 0.5, PruneScope::PerLayer),
                  DimensionMismatch);
}
