#include "vtpmd/cifar10.hpp"

#include <fstream>
#include <thread>

#include "vtpmd/errors.hpp"

namespace vtpmd {

namespace {

constexpr std::size_t kRecordBytes = 3073;

}  // namespace

Cifar10Batch load_cifar10(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cifar10: cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  if (file_size % kRecordBytes != 0) {
    throw BadRecordSize("cifar10: file size " + std::to_string(file_size) +
                        " is not a multiple of " +
                        std::to_string(kRecordBytes));
  }
  const std::size_t count = file_size / kRecordBytes;

  Cifar10Batch batch;
  batch.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    Cifar10Record& rec = batch.records[i];
    unsigned char label = 0;
    in.read(reinterpret_cast<char*>(&label), 1);
    in.read(reinterpret_cast<char*>(rec.pixels.data()), 3072);
    if (!in) throw BadRecordSize("cifar10: short read at record " +
                                 std::to_string(i));
    if (label > 9) {
      throw LabelOutOfRange("cifar10: record " + std::to_string(i) +
                            " has label " + std::to_string(label));
    }
    rec.label = label;
  }
  return batch;
}

Matrix record_to_image(const Cifar10Record& record, const EvalOptions& opt) {
  Matrix image(3, 1024);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < 1024; ++p) {
      const double v = static_cast<double>(record.pixels[c * 1024 + p]) / 255.0;
      image(c, p) = (v - opt.mean[c]) / opt.stddev[c];
    }
  }
  return image;
}

EvalResult evaluate(const TransformerModel& model, const Cifar10Batch& batch,
                    std::size_t limit, const EvalOptions& opt) {
  if (limit == 0) throw Error("evaluate: limit must be >= 1");
  if (model.config.image_size != 32) {
    throw DimensionMismatch("evaluate: model expects image size " +
                            std::to_string(model.config.image_size) +
                            ", cifar-10 records are 32x32x3");
  }
  const std::size_t n = std::min(limit, batch.records.size());

  std::vector<std::uint8_t> correct(n, 0);
  auto worker = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < n; i += step) {
      const Matrix image = record_to_image(batch.records[i], opt);
      const Vector logits = forward(model, image);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < logits.size(); ++c) {
        if (logits[c] > logits[arg]) arg = c;
      }
      correct[i] = arg == batch.records[i].label ? 1 : 0;
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, opt.jobs);
  if (jobs == 1 || n <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(jobs, n);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back(worker, t, workers);
    }
    for (auto& th : pool) th.join();
  }

  std::size_t hits = 0;
  for (std::uint8_t c : correct) hits += c;
  return {static_cast<double>(hits) / static_cast<double>(n), n};
}

}  // namespace vtpmd
