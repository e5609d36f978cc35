#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "herlab/rng.hpp"
#include "herlab/types.hpp"

namespace herlab {

enum class Activation { kRelu, kTanh, kLinear };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Global-norm gradient clipping policy.
struct GradClipPolicy {
  double max_norm = 3.0;
};

struct LayerGrads {
  MatrixXd w;
  VectorXd b;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
  double global_norm() const;
  void scale(double factor);
};

enum class ExpandMode { kReset, kDecreased, kRegular };

// Dense multilayer perceptron with exact backpropagation and an
// adaptive-moment optimizer. Columns of a batch matrix are samples.
class Mlp {
 public:
  struct Layer {
    MatrixXd w;  // out x in
    VectorXd b;
    Activation act = Activation::kLinear;
  };

  // Per-layer cache produced by forward(), consumed by backward().
  struct ForwardCache {
    std::vector<MatrixXd> inputs;      // input to each layer
    std::vector<MatrixXd> preacts;     // z = W x + b (post-standardization)
    std::vector<MatrixXd> normalized;  // standardized z-hat, if batch_norm
    std::vector<VectorXd> inv_std;     // per-feature 1/sigma, if batch_norm
    bool batch_norm = false;
  };

  Mlp() = default;
  // widths = {in, h1, ..., out}; acts has widths.size()-1 entries.
  Mlp(const std::vector<int>& widths, const std::vector<Activation>& acts,
      RngStream& rng, bool batch_norm = false);

  MatrixXd forward(const MatrixXd& input, ForwardCache* cache = nullptr) const;
  VectorXd forward(const VectorXd& input) const;

  // Gradients of sum(output .* upstream) w.r.t. parameters and input.
  MlpGrads backward(const ForwardCache& cache, const MatrixXd& upstream,
                    MatrixXd* input_grad = nullptr) const;

  // Clip to policy.max_norm (global norm), then adaptive-moment update.
  void optimizer_step(MlpGrads grads, const GradClipPolicy& policy, double lr);

  // Widen the first layer by `extra` columns scaled by alpha(mode); existing
  // parameters and moments are untouched, new moments start at zero.
  void expand_input_dim(int extra, ExpandMode mode, RngStream& rng);

  // Re-initialize specific first-layer input columns (curriculum transfer).
  void reinit_input_columns(std::span<const int> cols, double alpha,
                            RngStream& rng);

  int input_dim() const { return static_cast<int>(layers_.front().w.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().w.rows()); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  long step_count() const { return step_count_; }
  bool batch_norm() const { return batch_norm_; }

  // Text manifest (shapes + activation tags) next to a flat little-endian
  // float64 parameter file in declaration order.
  void save(const std::filesystem::path& manifest_path,
            const std::filesystem::path& data_path) const;
  static Mlp load(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& data_path);

 private:
  struct AdamSlot {
    MatrixXd mw, vw;
    VectorXd mb, vb;
  };
  std::vector<Layer> layers_;
  std::vector<AdamSlot> adam_;
  long step_count_ = 0;
  bool batch_norm_ = false;
};

// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Mlp& target, const Mlp& online, double tau);

}  // namespace herlab
