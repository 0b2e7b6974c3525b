#include "vtpmd/vit.hpp"

#include <cmath>
#include <random>
#include <string>

#include "vtpmd/errors.hpp"

namespace vtpmd {

void TransformerConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || layers == 0 || heads == 0 ||
      embed_dim == 0 || classes == 0) {
    throw Error("config: all counts must be >= 1");
  }
  if (image_size % patch_size != 0) {
    throw Error("config: image_size must be divisible by patch_size");
  }
  if (embed_dim % heads != 0) {
    throw Error("config: embed_dim must be divisible by heads");
  }
  if (hidden_dim() == 0) {
    throw Error("config: mlp hidden dimension must be >= 1");
  }
}

TransformerConfig full_scale_config() {
  // 768 is not divisible by 10, so a 10-head split of a 768-wide
  // embedding cannot exist; 12 heads of width 64 is the standard layout
  // for this embedding size.
  TransformerConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 4;
  cfg.layers = 12;
  cfg.heads = 12;
  cfg.embed_dim = 768;
  cfg.mlp_ratio = 4.0;
  cfg.classes = 10;
  return cfg;
}

TransformerConfig tiny_config() {
  TransformerConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.embed_dim = 16;
  cfg.mlp_ratio = 4.0;
  cfg.classes = 10;
  return cfg;
}

LinearLayer LinearLayer::dense(Matrix w, Vector b) {
  if (b.size() != w.cols()) {
    throw DimensionMismatch("LinearLayer: bias length != out dim");
  }
  LinearLayer layer;
  layer.form_ = DenseForm{std::move(w), std::move(b)};
  return layer;
}

LinearLayer LinearLayer::factored(Matrix left, std::optional<Vector> scale,
                                  Matrix right, Vector b) {
  const std::size_t k = left.cols();
  if (k == 0) {
    throw RankTooSmall("LinearLayer: factored rank must be >= 1");
  }
  if (right.rows() != k || (scale && scale->size() != k)) {
    throw DimensionMismatch("LinearLayer: factor rank mismatch");
  }
  if (b.size() != right.cols()) {
    throw DimensionMismatch("LinearLayer: bias length != out dim");
  }
  LinearLayer layer;
  layer.form_ = FactoredForm{std::move(left), std::move(scale),
                             std::move(right), std::move(b)};
  return layer;
}

std::size_t LinearLayer::in_dim() const {
  return is_dense() ? dense_form().w.rows() : factored_form().left.rows();
}

std::size_t LinearLayer::out_dim() const {
  return is_dense() ? dense_form().w.cols() : factored_form().right.cols();
}

std::size_t LinearLayer::rank() const {
  return is_dense() ? std::min(in_dim(), out_dim())
                    : factored_form().left.cols();
}

namespace {

Matrix add_bias_rows(Matrix x, const Vector& b) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double* row = x.row_ptr(i);
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] += b[j];
  }
  return x;
}

}  // namespace

Matrix linear_apply(const LinearLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw DimensionMismatch("linear_apply: input cols " +
                            std::to_string(x.cols()) + " != layer in dim " +
                            std::to_string(layer.in_dim()));
  }
  if (layer.is_dense()) {
    const DenseForm& d = layer.dense_form();
    return add_bias_rows(matmul(x, d.w), d.b);
  }
  const FactoredForm& f = layer.factored_form();
  Matrix mid = matmul(x, f.left);
  if (f.scale) {
    for (std::size_t i = 0; i < mid.rows(); ++i) {
      double* row = mid.row_ptr(i);
      for (std::size_t j = 0; j < mid.cols(); ++j) row[j] *= (*f.scale)[j];
    }
  }
  return add_bias_rows(matmul(mid, f.right), f.b);
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t d_head) {
  if (q.rows() != k.rows() || k.rows() != v.rows()) {
    throw DimensionMismatch("attention: q/k/v row counts differ");
  }
  if (q.cols() != d_head || k.cols() != d_head) {
    throw DimensionMismatch("attention: q/k width != d_head");
  }
  Matrix scores = matmul(q, transpose(k));
  const double inv = 1.0 / std::sqrt(static_cast<double>(d_head));
  for (double& s : scores.data()) s *= inv;
  return matmul(softmax_rows(scores), v);
}

Matrix mhsa(const Matrix& x, const EncoderBlockWeights& block,
            std::size_t heads) {
  const Matrix q = linear_apply(block.wq, x);
  const Matrix k = linear_apply(block.wk, x);
  const Matrix v = linear_apply(block.wv, x);
  if (q.cols() % heads != 0 || q.cols() != k.cols() || q.cols() != v.cols()) {
    throw DimensionMismatch("mhsa: projection width not divisible by heads");
  }
  const std::size_t d_head = q.cols() / heads;

  Matrix concat(x.rows(), q.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * d_head;
    const Matrix out = attention(q.block(0, c0, q.rows(), d_head),
                                 k.block(0, c0, k.rows(), d_head),
                                 v.block(0, c0, v.rows(), d_head), d_head);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < d_head; ++j) concat(i, c0 + j) = out(i, j);
    }
  }
  return linear_apply(block.wo, concat);
}

Matrix select_cols(const Matrix& x, const std::vector<std::size_t>& keep) {
  Matrix out(x.rows(), keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] >= x.cols()) {
      throw DimensionMismatch("select_cols: index out of range");
    }
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = x(i, keep[j]);
  }
  return out;
}

namespace {

Matrix maybe_select(const Matrix& x, const std::vector<std::size_t>& keep) {
  return keep.empty() ? x : select_cols(x, keep);
}

}  // namespace

Matrix encoder_block(const Matrix& x, const EncoderBlockWeights& block,
                     std::size_t heads) {
  const Matrix normed1 = layer_norm_rows(x, block.norm1.gamma, block.norm1.beta);
  const Matrix y = add(x, mhsa(maybe_select(normed1, block.qkv_keep), block, heads));
  const Matrix normed2 = layer_norm_rows(y, block.norm2.gamma, block.norm2.beta);
  const Matrix hidden = gelu(linear_apply(block.mlp1, maybe_select(normed2, block.mlp1_keep)));
  return add(y, linear_apply(block.mlp2, hidden));
}

Matrix patchify(const Matrix& image, const TransformerConfig& cfg) {
  if (image.rows() != 3 || image.cols() != cfg.image_size * cfg.image_size) {
    throw DimensionMismatch("patchify: expected 3 x " +
                            std::to_string(cfg.image_size * cfg.image_size) +
                            " image");
  }
  const std::size_t p = cfg.patch_size;
  const std::size_t side = cfg.patches_per_side();
  Matrix out(cfg.num_patches(), cfg.patch_vec_len());
  for (std::size_t pi = 0; pi < side; ++pi) {
    for (std::size_t pj = 0; pj < side; ++pj) {
      double* dst = out.row_ptr(pi * side + pj);
      std::size_t idx = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t r = 0; r < p; ++r) {
          const std::size_t base = (pi * p + r) * cfg.image_size + pj * p;
          for (std::size_t cc = 0; cc < p; ++cc) {
            dst[idx++] = image(c, base + cc);
          }
        }
      }
    }
  }
  return out;
}

Vector forward(const TransformerModel& model, const Matrix& image) {
  const TransformerConfig& cfg = model.config;
  Matrix tok = linear_apply(model.patch_embed, patchify(image, cfg));

  if (model.cls) {
    Matrix with_cls(tok.rows() + 1, tok.cols());
    for (std::size_t j = 0; j < tok.cols(); ++j) {
      with_cls(0, j) = (*model.cls)(0, j);
    }
    for (std::size_t i = 0; i < tok.rows(); ++i) {
      for (std::size_t j = 0; j < tok.cols(); ++j) {
        with_cls(i + 1, j) = tok(i, j);
      }
    }
    tok = std::move(with_cls);
  }
  tok = add(tok, model.pos_embed);

  for (const EncoderBlockWeights& block : model.blocks) {
    tok = encoder_block(tok, block, cfg.heads);
  }

  // Parameterless final norm before the head.
  const Vector ones(tok.cols(), 1.0);
  const Vector zeros(tok.cols(), 0.0);
  tok = layer_norm_rows(tok, ones, zeros);

  Matrix pooled(1, tok.cols());
  if (model.cls) {
    for (std::size_t j = 0; j < tok.cols(); ++j) pooled(0, j) = tok(0, j);
  } else {
    for (std::size_t j = 0; j < tok.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < tok.rows(); ++i) sum += tok(i, j);
      pooled(0, j) = sum / static_cast<double>(tok.rows());
    }
  }
  return linear_apply(model.head, pooled).row(0);
}

std::uint64_t param_count(const LinearLayer& layer) {
  const std::uint64_t m = layer.in_dim();
  const std::uint64_t n = layer.out_dim();
  if (layer.is_dense()) return m * n + n;
  const std::uint64_t k = layer.rank();
  return k * (m + n) + k + n;
}

std::uint64_t flop_count(const LinearLayer& layer, std::uint64_t tokens) {
  const std::uint64_t m = layer.in_dim();
  const std::uint64_t n = layer.out_dim();
  if (layer.is_dense()) return 2 * tokens * m * n;
  const std::uint64_t k = layer.rank();
  return 2 * tokens * k * (m + n) + tokens * k;
}

TransformerModel make_random_model(const TransformerConfig& cfg,
                                   std::uint64_t seed, bool class_token) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  auto random_matrix = [&rng](std::size_t rows, std::size_t cols, double dev) {
    std::normal_distribution<double> dist(0.0, dev);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
  };
  auto random_linear = [&](std::size_t in, std::size_t out) {
    return LinearLayer::dense(random_matrix(in, out, 1.0 / std::sqrt(in)),
                              Vector(out, 0.0));
  };

  TransformerModel model;
  model.config = cfg;
  model.patch_embed = random_linear(cfg.patch_vec_len(), cfg.embed_dim);
  if (class_token) model.cls = random_matrix(1, cfg.embed_dim, 0.02);
  model.pos_embed = random_matrix(cfg.num_patches() + (class_token ? 1 : 0),
                                  cfg.embed_dim, 0.02);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    EncoderBlockWeights block{
        random_linear(cfg.embed_dim, cfg.embed_dim),
        random_linear(cfg.embed_dim, cfg.embed_dim),
        random_linear(cfg.embed_dim, cfg.embed_dim),
        random_linear(cfg.embed_dim, cfg.embed_dim),
        random_linear(cfg.embed_dim, cfg.hidden_dim()),
        random_linear(cfg.hidden_dim(), cfg.embed_dim),
        NormParams{Vector(cfg.embed_dim, 1.0), Vector(cfg.embed_dim, 0.0)},
        NormParams{Vector(cfg.embed_dim, 1.0), Vector(cfg.embed_dim, 0.0)},
        {},
        {}};
    model.blocks.push_back(std::move(block));
  }
  model.head = random_linear(cfg.embed_dim, cfg.classes);
  return model;
}

}  // namespace vtpmd
