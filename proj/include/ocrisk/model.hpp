#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace ocrisk {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { Tanh };

// Multilayer perceptron with a scalar output. All parameters live in one
// flat vector: for each layer, the (out x in) weight matrix in row-major
// order followed by the bias vector. Hidden layers apply the activation;
// the output layer is affine and yields the raw score f(x).
class ModelParams {
 public:
  ModelParams() = default;
  // Zero-initialised parameters for the given layer sizes.
  explicit ModelParams(std::vector<std::size_t> layer_dims, Activation act = Activation::Tanh);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  Activation activation() const { return act_; }

  Eigen::Map<const RowMajorMatrix> weight(std::size_t layer) const;
  Eigen::Map<RowMajorMatrix> weight(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.dims_ == b.dims_ && a.act_ == b.act_ && a.values_.size() == b.values_.size() &&
           a.values_ == b.values_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  Activation act_ = Activation::Tanh;
  Eigen::VectorXd values_;
};

// Same layout as the ModelParams that produced it.
struct Gradients {
  Eigen::VectorXd values;
};

ModelParams init_mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed);

double forward(const ModelParams& params, std::span<const double> x);
// One score per row of `inputs`.
Eigen::VectorXd forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs);

double sigmoid(double score);
// min(sigmoid(f(x)), clamp_hi); clamp_hi must lie in (0.5, 1).
double predict_prob(const ModelParams& params, std::span<const double> x, double clamp_hi);
double clamp_prob(double score, double clamp_hi);

// Layer activations of one batch, kept for a subsequent backward pass.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  // [0] is the input batch
  Eigen::VectorXd scores() const { return activations.back().col(0); }
};
ForwardPass forward_pass(const ModelParams& params, const Eigen::MatrixXd& inputs);

// Sum over rows of d(upstream_i * f(x_i))/d(params).
Gradients backward(const ModelParams& params, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& dloss_dscore);
Gradients backward(const ModelParams& params, const ForwardPass& pass,
                   const Eigen::VectorXd& dloss_dscore);

void save_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ocrisk
