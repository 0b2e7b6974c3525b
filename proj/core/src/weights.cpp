#include "vtpmd/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "vtpmd/errors.hpp"

namespace vtpmd {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'P', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& out, const void* src, std::size_t n) {
  out.append(static_cast<const char*>(src), n);
}

void put_u16(std::string& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  put_bytes(out, b, 2);
}

void put_u32(std::string& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  const unsigned char* take(std::size_t n) {
    if (remaining() < n) {
      throw CorruptTensor("container: truncated file");
    }
    const auto* p =
        reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
    pos_ += n;
    return p;
  }

  std::uint16_t u16() {
    const unsigned char* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const unsigned char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const unsigned char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TensorEntry::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

void WeightContainer::add(const std::string& name, TensorEntry entry) {
  if (contains(name)) {
    throw DuplicateName("container: duplicate tensor '" + name + "'");
  }
  if (entry.dtype != 0 && entry.dtype != 1) {
    throw CorruptTensor("container: bad dtype for '" + name + "'");
  }
  if (entry.data.size() != entry.element_count()) {
    throw CorruptTensor("container: payload size mismatch for '" + name + "'");
  }
  names_.push_back(name);
  entries_.push_back(std::move(entry));
}

void WeightContainer::add_matrix(const std::string& name, const Matrix& m) {
  TensorEntry e;
  e.dims = {m.rows(), m.cols()};
  e.dtype = 1;
  e.data = m.data();
  add(name, std::move(e));
}

void WeightContainer::add_vector(const std::string& name, const Vector& v) {
  TensorEntry e;
  e.dims = {v.size()};
  e.dtype = 1;
  e.data = v.data();
  add(name, std::move(e));
}

bool WeightContainer::contains(const std::string& name) const {
  for (const std::string& n : names_) {
    if (n == name) return true;
  }
  return false;
}

const TensorEntry& WeightContainer::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return entries_[i];
  }
  throw Error("container: missing tensor '" + name + "'");
}

Matrix WeightContainer::matrix(const std::string& name) const {
  const TensorEntry& e = get(name);
  if (e.dims.size() != 2) {
    throw CorruptTensor("container: '" + name + "' is not 2-d");
  }
  return Matrix(e.dims[0], e.dims[1], e.data);
}

Vector WeightContainer::vector(const std::string& name) const {
  const TensorEntry& e = get(name);
  if (e.dims.size() != 1) {
    throw CorruptTensor("container: '" + name + "' is not 1-d");
  }
  return Vector(e.data);
}

WeightContainer load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("container: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));

  const unsigned char* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagic("container: bad magic in " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw UnsupportedVersion("container: version " + std::to_string(version) +
                             " not supported");
  }
  const std::uint32_t count = r.u32();

  WeightContainer out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint16_t name_len = r.u16();
    const unsigned char* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);

    TensorEntry e;
    e.dtype = *r.take(1);
    if (e.dtype != 0 && e.dtype != 1) {
      throw CorruptTensor("container: bad dtype for '" + name + "'");
    }
    const std::uint8_t ndim = *r.take(1);
    e.dims.resize(ndim);
    for (std::uint8_t d = 0; d < ndim; ++d) e.dims[d] = r.u64();

    const std::uint64_t n = e.element_count();
    const std::size_t elem_size = e.dtype == 0 ? 4 : 8;
    if (r.remaining() < n * elem_size) {
      throw CorruptTensor("container: payload for '" + name +
                          "' exceeds file size");
    }
    e.data.resize(n);
    if (e.dtype == 0) {
      for (std::uint64_t i = 0; i < n; ++i) {
        const unsigned char* p = r.take(4);
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
        }
        e.data[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
    } else {
      for (std::uint64_t i = 0; i < n; ++i) {
        const unsigned char* p = r.take(8);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
          bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
        }
        e.data[i] = std::bit_cast<double>(bits);
      }
    }
    out.add(name, std::move(e));
  }
  if (r.remaining() != 0) {
    throw CorruptTensor("container: trailing bytes after last tensor");
  }
  return out;
}

void save_container(const WeightContainer& container,
                    const std::filesystem::path& path) {
  std::string out;
  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);
  if (container.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("container: too many tensors");
  }
  put_u32(out, static_cast<std::uint32_t>(container.size()));

  for (const std::string& name : container.names()) {
    const TensorEntry& e = container.get(name);
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error("container: tensor name too long");
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    out.push_back(static_cast<char>(e.dtype));
    out.push_back(static_cast<char>(e.dims.size()));
    for (std::uint64_t d : e.dims) put_u64(out, d);
    if (e.dtype == 0) {
      for (double v : e.data) {
        const std::uint32_t bits =
            std::bit_cast<std::uint32_t>(static_cast<float>(v));
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) {
          b[i] = static_cast<unsigned char>(bits >> (8 * i));
        }
        put_bytes(out, b, 4);
      }
    } else {
      for (double v : e.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("container: cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("container: write failed for " + path.string());
}

namespace {

void add_linear(WeightContainer& c, const std::string& prefix,
                const LinearLayer& layer) {
  if (layer.is_dense()) {
    const DenseForm& d = layer.dense_form();
    c.add_matrix(prefix + ".w", d.w);
    c.add_vector(prefix + ".b", d.b);
    return;
  }
  const FactoredForm& f = layer.factored_form();
  c.add_matrix(prefix + ".left", f.left);
  if (f.scale) c.add_vector(prefix + ".scale", *f.scale);
  c.add_matrix(prefix + ".right", f.right);
  c.add_vector(prefix + ".b", f.b);
}

LinearLayer linear_from(const WeightContainer& c, const std::string& prefix) {
  if (c.contains(prefix + ".w")) {
    return LinearLayer::dense(c.matrix(prefix + ".w"), c.vector(prefix + ".b"));
  }
  if (!c.contains(prefix + ".left")) {
    throw Error("container: no weights for layer '" + prefix + "'");
  }
  std::optional<Vector> scale;
  if (c.contains(prefix + ".scale")) scale = c.vector(prefix + ".scale");
  return LinearLayer::factored(c.matrix(prefix + ".left"), std::move(scale),
                               c.matrix(prefix + ".right"),
                               c.vector(prefix + ".b"));
}

Vector indices_to_vector(const std::vector<std::size_t>& idx) {
  Vector v(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    v[i] = static_cast<double>(idx[i]);
  }
  return v;
}

std::vector<std::size_t> vector_to_indices(const Vector& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    idx[i] = static_cast<std::size_t>(v[i]);
  }
  return idx;
}

}  // namespace

WeightContainer container_from_model(const TransformerModel& model) {
  WeightContainer c;
  const TransformerConfig& cfg = model.config;
  Vector config_vec{static_cast<double>(cfg.image_size),
                    static_cast<double>(cfg.patch_size),
                    static_cast<double>(cfg.layers),
                    static_cast<double>(cfg.heads),
                    static_cast<double>(cfg.embed_dim),
                    cfg.mlp_ratio,
                    static_cast<double>(cfg.classes)};
  c.add_vector("config", config_vec);
  add_linear(c, "patch_embed", model.patch_embed);
  c.add_matrix("pos_embed", model.pos_embed);
  if (model.cls) c.add_matrix("cls", *model.cls);
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    const EncoderBlockWeights& b = model.blocks[i];
    add_linear(c, p + "wq", b.wq);
    add_linear(c, p + "wk", b.wk);
    add_linear(c, p + "wv", b.wv);
    add_linear(c, p + "wo", b.wo);
    add_linear(c, p + "mlp1", b.mlp1);
    add_linear(c, p + "mlp2", b.mlp2);
    c.add_vector(p + "norm1.g", b.norm1.gamma);
    c.add_vector(p + "norm1.b", b.norm1.beta);
    c.add_vector(p + "norm2.g", b.norm2.gamma);
    c.add_vector(p + "norm2.b", b.norm2.beta);
    if (!b.qkv_keep.empty()) {
      c.add_vector(p + "qkv_keep", indices_to_vector(b.qkv_keep));
    }
    if (!b.mlp1_keep.empty()) {
      c.add_vector(p + "mlp1_keep", indices_to_vector(b.mlp1_keep));
    }
  }
  add_linear(c, "head", model.head);
  return c;
}

TransformerModel model_from_container(const WeightContainer& c) {
  const Vector cfg_vec = c.vector("config");
  if (cfg_vec.size() != 7) {
    throw CorruptTensor("container: config tensor must have 7 entries");
  }
  TransformerConfig cfg;
  cfg.image_size = static_cast<std::size_t>(cfg_vec[0]);
  cfg.patch_size = static_cast<std::size_t>(cfg_vec[1]);
  cfg.layers = static_cast<std::size_t>(cfg_vec[2]);
  cfg.heads = static_cast<std::size_t>(cfg_vec[3]);
  cfg.embed_dim = static_cast<std::size_t>(cfg_vec[4]);
  cfg.mlp_ratio = cfg_vec[5];
  cfg.classes = static_cast<std::size_t>(cfg_vec[6]);
  cfg.validate();

  TransformerModel model;
  model.config = cfg;
  model.patch_embed = linear_from(c, "patch_embed");
  model.pos_embed = c.matrix("pos_embed");
  if (c.contains("cls")) model.cls = c.matrix("cls");
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    EncoderBlockWeights b{
        linear_from(c, p + "wq"),
        linear_from(c, p + "wk"),
        linear_from(c, p + "wv"),
        linear_from(c, p + "wo"),
        linear_from(c, p + "mlp1"),
        linear_from(c, p + "mlp2"),
        NormParams{c.vector(p + "norm1.g"), c.vector(p + "norm1.b")},
        NormParams{c.vector(p + "norm2.g"), c.vector(p + "norm2.b")},
        {},
        {}};
    if (c.contains(p + "qkv_keep")) {
      b.qkv_keep = vector_to_indices(c.vector(p + "qkv_keep"));
    }
    if (c.contains(p + "mlp1_keep")) {
      b.mlp1_keep = vector_to_indices(c.vector(p + "mlp1_keep"));
    }
    model.blocks.push_back(std::move(b));
  }
  model.head = linear_from(c, "head");
  return model;
}

TransformerModel load_weights(const std::filesystem::path& path) {
  return model_from_container(load_container(path));
}

void save_weights(const TransformerModel& model,
                  const std::filesystem::path& path) {
  save_container(container_from_model(model), path);
}

}  // namespace vtpmd
