#include "herlab/nn.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace herlab {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kBnEps = 1e-6;

MatrixXd apply_activation(const MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kLinear:
      return z;
  }
  throw std::logic_error("unknown activation");
}

MatrixXd activation_grad(const MatrixXd& z, const MatrixXd& upstream,
                         Activation act) {
  switch (act) {
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix().cwiseProduct(upstream);
    case Activation::kTanh: {
      MatrixXd t = z.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix().cwiseProduct(upstream);
    }
    case Activation::kLinear:
      return upstream;
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kLinear:
      return "linear";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "linear") return Activation::kLinear;
  throw std::invalid_argument("unknown activation tag: " + s);
}

double MlpGrads::global_norm() const {
  double sq = 0.0;
  for (const auto& g : layers) {
    sq += g.w.squaredNorm() + g.b.squaredNorm();
  }
  return std::sqrt(sq);
}

void MlpGrads::scale(double factor) {
  for (auto& g : layers) {
    g.w *= factor;
    g.b *= factor;
  }
}

Mlp::Mlp(const std::vector<int>& widths, const std::vector<Activation>& acts,
         RngStream& rng, bool batch_norm)
    : batch_norm_(batch_norm) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1) {
    throw std::invalid_argument("inconsistent layer specification");
  }
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer layer;
    const int in = widths[i];
    const int out = widths[i + 1];
    const bool is_output = (i + 2 == widths.size());
    // Uniform fan-in scaling for hidden layers, small uniform for the head.
    const double bound = is_output ? 3e-3 : 1.0 / std::sqrt(double(in));
    layer.w.resize(out, in);
    layer.b.resize(out);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.w(r, c) = rng.uniform(-bound, bound);
      layer.b(r) = rng.uniform(-bound, bound);
    }
    layer.act = acts[i];
    layers_.push_back(std::move(layer));
    adam_.push_back({MatrixXd::Zero(out, in), MatrixXd::Zero(out, in),
                     VectorXd::Zero(out), VectorXd::Zero(out)});
  }
}

MatrixXd Mlp::forward(const MatrixXd& input, ForwardCache* cache) const {
  if (input.rows() != input_dim()) {
    throw std::invalid_argument("input width mismatch");
  }
  const bool use_bn = batch_norm_ && input.cols() > 1;
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
    cache->normalized.clear();
    cache->inv_std.clear();
    cache->batch_norm = use_bn;
  }
  MatrixXd x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (cache) cache->inputs.push_back(x);
    MatrixXd z = (layer.w * x).colwise() + layer.b;
    const bool is_output = (i + 1 == layers_.size());
    if (use_bn && !is_output) {
      // Per-batch feature standardization of hidden pre-activations.
      const double n = static_cast<double>(z.cols());
      VectorXd mean = z.rowwise().mean();
      MatrixXd centered = z.colwise() - mean;
      VectorXd var = centered.array().square().matrix().rowwise().sum() / n;
      VectorXd inv_std = (var.array() + kBnEps).rsqrt().matrix();
      MatrixXd zhat = centered.array().colwise() * inv_std.array();
      if (cache) {
        cache->normalized.push_back(zhat);
        cache->inv_std.push_back(inv_std);
      }
      z = zhat;
    } else if (cache) {
      cache->normalized.emplace_back();
      cache->inv_std.emplace_back();
    }
    if (cache) cache->preacts.push_back(z);
    x = apply_activation(z, layer.act);
  }
  return x;
}

VectorXd Mlp::forward(const VectorXd& input) const {
  return forward(MatrixXd(input), nullptr).col(0);
}

MlpGrads Mlp::backward(const ForwardCache& cache, const MatrixXd& upstream,
                       MatrixXd* input_grad) const {
  if (cache.inputs.size() != layers_.size()) {
    throw std::invalid_argument("stale or mismatched forward cache");
  }
  MlpGrads grads;
  grads.layers.resize(layers_.size());
  MatrixXd delta = upstream;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const Layer& layer = layers_[i];
    MatrixXd dz = activation_grad(cache.preacts[i], delta, layer.act);
    const bool is_output = (i + 1 == static_cast<int>(layers_.size()));
    if (cache.batch_norm && !is_output) {
      // Backward through (z - mean) / sigma, per feature across the batch.
      const MatrixXd& zhat = cache.normalized[i];
      const VectorXd& inv_std = cache.inv_std[i];
      const double n = static_cast<double>(dz.cols());
      VectorXd mean_dz = dz.rowwise().mean();
      VectorXd mean_dz_zhat =
          dz.cwiseProduct(zhat).rowwise().sum() / n;
      MatrixXd term = dz.colwise() - mean_dz;
      term.array() -= zhat.array().colwise() * mean_dz_zhat.array();
      dz = (term.array().colwise() * inv_std.array()).matrix();
    }
    grads.layers[i].w = dz * cache.inputs[i].transpose();
    grads.layers[i].b = dz.rowwise().sum();
    if (i > 0 || input_grad) {
      delta = layer.w.transpose() * dz;
    }
  }
  if (input_grad) *input_grad = delta;
  return grads;
}

void Mlp::optimizer_step(MlpGrads grads, const GradClipPolicy& policy,
                         double lr) {
  if (grads.layers.size() != layers_.size()) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  const double norm = grads.global_norm();
  if (norm > policy.max_norm && norm > 0.0) {
    grads.scale(policy.max_norm / norm);
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, double(step_count_));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, double(step_count_));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& a = adam_[i];
    const auto& g = grads.layers[i];
    a.mw = kAdamBeta1 * a.mw + (1.0 - kAdamBeta1) * g.w;
    a.vw = kAdamBeta2 * a.vw.array().matrix() +
           (1.0 - kAdamBeta2) * g.w.array().square().matrix();
    a.mb = kAdamBeta1 * a.mb + (1.0 - kAdamBeta1) * g.b;
    a.vb = kAdamBeta2 * a.vb.array().matrix() +
           (1.0 - kAdamBeta2) * g.b.array().square().matrix();
    layers_[i].w.array() -= lr * (a.mw.array() / bc1) /
                            ((a.vw.array() / bc2).sqrt() + kAdamEps);
    layers_[i].b.array() -= lr * (a.mb.array() / bc1) /
                            ((a.vb.array() / bc2).sqrt() + kAdamEps);
  }
}

void Mlp::expand_input_dim(int extra, ExpandMode mode, RngStream& rng) {
  if (extra < 0) throw std::invalid_argument("extra_inputs must be >= 0");
  if (extra == 0) return;
  Layer& first = layers_.front();
  AdamSlot& slot = adam_.front();
  const int out = static_cast<int>(first.w.rows());
  const int old_in = static_cast<int>(first.w.cols());
  const int new_in = old_in + extra;
  double alpha = 0.0;
  switch (mode) {
    case ExpandMode::kReset:
      alpha = 0.0;
      break;
    case ExpandMode::kDecreased:
      alpha = 0.1;
      break;
    case ExpandMode::kRegular:
      alpha = 1.0;
      break;
  }
  const double bound = 1.0 / std::sqrt(double(new_in));
  MatrixXd w(out, new_in);
  w.leftCols(old_in) = first.w;
  for (int r = 0; r < out; ++r) {
    for (int c = old_in; c < new_in; ++c) {
      w(r, c) = alpha * rng.uniform(-bound, bound);
    }
  }
  first.w = std::move(w);
  MatrixXd mw = MatrixXd::Zero(out, new_in);
  MatrixXd vw = MatrixXd::Zero(out, new_in);
  mw.leftCols(old_in) = slot.mw;
  vw.leftCols(old_in) = slot.vw;
  slot.mw = std::move(mw);
  slot.vw = std::move(vw);
}

void Mlp::reinit_input_columns(std::span<const int> cols, double alpha,
                               RngStream& rng) {
  Layer& first = layers_.front();
  AdamSlot& slot = adam_.front();
  const double bound = 1.0 / std::sqrt(double(first.w.cols()));
  for (int c : cols) {
    if (c < 0 || c >= first.w.cols()) {
      throw std::out_of_range("input column out of range");
    }
    for (int r = 0; r < first.w.rows(); ++r) {
      first.w(r, c) = alpha * rng.uniform(-bound, bound);
      slot.mw(r, c) = 0.0;
      slot.vw(r, c) = 0.0;
    }
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw std::invalid_argument("tau must lie in [0, 1]");
  }
  auto& dst = target.mutable_layers();
  const auto& src = online.layers();
  if (dst.size() != src.size()) {
    throw std::invalid_argument("network shape mismatch");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].w.rows() != src[i].w.rows() ||
        dst[i].w.cols() != src[i].w.cols()) {
      throw std::invalid_argument("layer shape mismatch");
    }
    dst[i].w = tau * src[i].w + (1.0 - tau) * dst[i].w;
    dst[i].b = tau * src[i].b + (1.0 - tau) * dst[i].b;
  }
}

void Mlp::save(const std::filesystem::path& manifest_path,
               const std::filesystem::path& data_path) const {
  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write " + manifest_path.string());
  manifest << "layers " << layers_.size() << "\n";
  manifest << "batch_norm " << (batch_norm_ ? 1 : 0) << "\n";
  for (const auto& layer : layers_) {
    manifest << "layer " << layer.w.rows() << " " << layer.w.cols() << " "
             << to_string(layer.act) << "\n";
  }
  std::ofstream data(data_path, std::ios::binary);
  if (!data) throw std::runtime_error("cannot write " + data_path.string());
  auto write_block = [&data](const double* p, std::size_t n) {
    data.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(double)));
  };
  for (const auto& layer : layers_) {
    write_block(layer.w.data(), std::size_t(layer.w.size()));
    write_block(layer.b.data(), std::size_t(layer.b.size()));
  }
}

Mlp Mlp::load(const std::filesystem::path& manifest_path,
              const std::filesystem::path& data_path) {
  std::ifstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot read " + manifest_path.string());
  std::string key;
  std::size_t n_layers = 0;
  int bn = 0;
  manifest >> key >> n_layers;
  manifest >> key >> bn;
  Mlp net;
  net.batch_norm_ = bn != 0;
  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw std::runtime_error("cannot read " + data_path.string());
  for (std::size_t i = 0; i < n_layers; ++i) {
    long rows = 0, cols = 0;
    std::string act;
    manifest >> key >> rows >> cols >> act;
    Layer layer;
    layer.w.resize(rows, cols);
    layer.b.resize(rows);
    layer.act = activation_from_string(act);
    data.read(reinterpret_cast<char*>(layer.w.data()),
              std::streamsize(std::size_t(layer.w.size()) * sizeof(double)));
    data.read(reinterpret_cast<char*>(layer.b.data()),
              std::streamsize(std::size_t(layer.b.size()) * sizeof(double)));
    net.layers_.push_back(std::move(layer));
    net.adam_.push_back({MatrixXd::Zero(rows, cols), MatrixXd::Zero(rows, cols),
                         VectorXd::Zero(rows), VectorXd::Zero(rows)});
  }
  if (!data) throw std::runtime_error("parameter file truncated");
  return net;
}

}  // namespace herlab
