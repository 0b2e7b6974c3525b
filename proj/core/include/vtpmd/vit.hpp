#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vtpmd/matrix.hpp"
#include "vtpmd/nn.hpp"

namespace vtpmd {

struct TransformerConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t embed_dim = 16;
  double mlp_ratio = 4.0;
  std::size_t classes = 10;

  void validate() const;
  std::size_t patches_per_side() const { return image_size / patch_size; }
  std::size_t num_patches() const {
    return patches_per_side() * patches_per_side();
  }
  std::size_t patch_vec_len() const { return patch_size * patch_size * 3; }
  std::size_t hidden_dim() const {
    return static_cast<std::size_t>(
        std::lround(static_cast<double>(embed_dim) * mlp_ratio));
  }
};

// Documented full-scale preset; desk tests use tiny().
TransformerConfig full_scale_config();   // 12 layers, 10 heads, embed 768
TransformerConfig tiny_config();         // 2 blocks, 2 heads, embed 16, patch 8

struct DenseForm {
  Matrix w;  // in x out
  Vector b;  // out
};

struct FactoredForm {
  Matrix left;                  // in x k
  std::optional<Vector> scale;  // k; identity when absent
  Matrix right;                 // k x out
  Vector b;                     // out
};

// A linear projection, executed dense or in factored form. The factored
// path never materializes left * diag(scale) * right.
class LinearLayer {
 public:
  static LinearLayer dense(Matrix w, Vector b);
  static LinearLayer factored(Matrix left, std::optional<Vector> scale,
                              Matrix right, Vector b);

  bool is_dense() const { return std::holds_alternative<DenseForm>(form_); }
  const DenseForm& dense_form() const { return std::get<DenseForm>(form_); }
  const FactoredForm& factored_form() const {
    return std::get<FactoredForm>(form_);
  }

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t rank() const;  // k for factored layers, min(in, out) otherwise

 private:
  std::variant<DenseForm, FactoredForm> form_;
};

struct NormParams {
  Vector gamma;
  Vector beta;
};

struct EncoderBlockWeights {
  LinearLayer wq, wk, wv, wo;
  LinearLayer mlp1, mlp2;
  NormParams norm1, norm2;
  // Input features fed to q/k/v and to mlp1 after the respective norms.
  // Empty means all of them; pruning fills these with the kept indices.
  std::vector<std::size_t> qkv_keep;
  std::vector<std::size_t> mlp1_keep;
};

struct TransformerModel {
  TransformerConfig config;
  LinearLayer patch_embed;           // patch_vec_len x embed
  Matrix pos_embed;                  // tokens x embed
  std::optional<Matrix> cls;         // 1 x embed; mean-pool head when absent
  std::vector<EncoderBlockWeights> blocks;
  LinearLayer head;                  // embed x classes

  std::size_t tokens() const {
    return config.num_patches() + (cls ? 1 : 0);
  }
};

Matrix linear_apply(const LinearLayer& layer, const Matrix& x);

// softmax(Q K^T / sqrt(d_head)) V
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v,
                 std::size_t d_head);

// Projects x to q/k/v, splits columns into contiguous head slices, runs
// per-head attention, concatenates, and applies the output projection.
Matrix mhsa(const Matrix& x, const EncoderBlockWeights& block,
            std::size_t heads);

// Pre-norm block: Y = X + MHSA(select(norm1(X))), Z = Y + MLP(select(norm2(Y))).
Matrix encoder_block(const Matrix& x, const EncoderBlockWeights& block,
                     std::size_t heads);

// Image enters as a 3 x (H*W) matrix, one flattened channel plane per
// row. Patch vectors are channel-major, length patch^2 * 3.
Matrix patchify(const Matrix& image, const TransformerConfig& cfg);

Vector forward(const TransformerModel& model, const Matrix& image);

std::uint64_t param_count(const LinearLayer& layer);
std::uint64_t flop_count(const LinearLayer& layer, std::uint64_t tokens);

Matrix select_cols(const Matrix& x, const std::vector<std::size_t>& keep);

// Seeded random model for tests and the CLI initializer.
TransformerModel make_random_model(const TransformerConfig& cfg,
                                   std::uint64_t seed,
                                   bool class_token = true);

}  // namespace vtpmd
