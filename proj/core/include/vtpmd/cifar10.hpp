#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vtpmd/matrix.hpp"
#include "vtpmd/vit.hpp"

namespace vtpmd {

// 3073-byte record: label, then 3072 channel-major pixels (R, G, B
// planes of 32x32, row-major).
struct Cifar10Record {
  std::uint8_t label = 0;
  std::array<std::uint8_t, 3072> pixels{};
};

struct Cifar10Batch {
  std::vector<Cifar10Record> records;
};

Cifar10Batch load_cifar10(const std::filesystem::path& path);

struct EvalOptions {
  // Pixels are scaled to [0, 1] and normalized per channel here, not in
  // the loader.
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> stddev{0.5, 0.5, 0.5};
  std::size_t jobs = 1;
};

// Normalized 3 x 1024 image for the forward engine.
Matrix record_to_image(const Cifar10Record& record, const EvalOptions& opt);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t n = 0;
};

// Top-1 accuracy over the first min(limit, records) entries; argmax
// ties resolve to the lowest class index.
EvalResult evaluate(const TransformerModel& model, const Cifar10Batch& batch,
                    std::size_t limit, const EvalOptions& opt = {});

}  // namespace vtpmd
