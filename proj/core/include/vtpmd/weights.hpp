#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vtpmd/matrix.hpp"
#include "vtpmd/vit.hpp"

namespace vtpmd {

// One tensor of the container. Data is held as f64 in memory; dtype
// selects the on-disk element width (0 = f32, 1 = f64).
struct TensorEntry {
  std::vector<std::uint64_t> dims;
  std::uint8_t dtype = 1;
  std::vector<double> data;

  std::uint64_t element_count() const;
};

// "VTPW" container: magic, u32 version = 1, u32 tensor count, then per
// tensor u16 name length, UTF-8 name, u8 dtype, u8 ndim, u64 dims and a
// little-endian row-major payload. Names are unique; insertion order is
// preserved on disk.
class WeightContainer {
 public:
  void add(const std::string& name, TensorEntry entry);
  void add_matrix(const std::string& name, const Matrix& m);
  void add_vector(const std::string& name, const Vector& v);

  bool contains(const std::string& name) const;
  const TensorEntry& get(const std::string& name) const;
  Matrix matrix(const std::string& name) const;
  Vector vector(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<TensorEntry> entries_;
};

WeightContainer load_container(const std::filesystem::path& path);
void save_container(const WeightContainer& container,
                    const std::filesystem::path& path);

// Model <-> tensor mapping. Dense layers store <name>.w/.b, factored
// layers <name>.left/.scale/.right/.b; per-block gather lists persist
// as <block>.qkv_keep / .mlp1_keep index tensors, and the shape config
// as a 7-element "config" tensor.
WeightContainer container_from_model(const TransformerModel& model);
TransformerModel model_from_container(const WeightContainer& container);

TransformerModel load_weights(const std::filesystem::path& path);
void save_weights(const TransformerModel& model,
                  const std::filesystem::path& path);

}  // namespace vtpmd
