#include "ocrisk/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/rng.hpp"

namespace ocrisk {

namespace {

constexpr const char* kCheckpointMagic = "OCRISK-MLP";
constexpr int kCheckpointVersion = 1;

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ValidationError("layer_dims needs at least input and output sizes");
  for (auto d : dims)
    if (d == 0) throw ValidationError("layer sizes must be positive");
  if (dims.back() != 1) throw ValidationError("output layer must have size 1");
}

// tanh(z) = sign(z) (1 - e^{-2|z|}) / (1 + e^{-2|z|}); Eigen vectorizes exp
// for doubles but not tanh.
template <typename Derived>
void tanh_inplace(Eigen::ArrayBase<Derived>& z) {
  const auto t = (-2.0 * z.abs()).exp().eval();
  z = (1.0 - t) / (1.0 + t) * z.sign();
}

}  // namespace

ModelParams::ModelParams(std::vector<std::size_t> layer_dims, Activation act)
    : dims_(std::move(layer_dims)), act_(act) {
  check_dims(dims_);
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

Eigen::Map<const RowMajorMatrix> ModelParams::weight(std::size_t l) const {
  return {values_.data() + offsets_.at(l), static_cast<Eigen::Index>(dims_[l + 1]),
          static_cast<Eigen::Index>(dims_[l])};
}

Eigen::Map<RowMajorMatrix> ModelParams::weight(std::size_t l) {
  return {values_.data() + offsets_.at(l), static_cast<Eigen::Index>(dims_[l + 1]),
          static_cast<Eigen::Index>(dims_[l])};
}

Eigen::Map<const Eigen::VectorXd> ModelParams::bias(std::size_t l) const {
  return {values_.data() + offsets_.at(l) + dims_[l + 1] * dims_[l],
          static_cast<Eigen::Index>(dims_[l + 1])};
}

Eigen::Map<Eigen::VectorXd> ModelParams::bias(std::size_t l) {
  return {values_.data() + offsets_.at(l) + dims_[l + 1] * dims_[l],
          static_cast<Eigen::Index>(dims_[l + 1])};
}

ModelParams init_mlp(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
  ModelParams params(std::move(layer_dims));
  Rng rng = Rng(seed).split("init_mlp");
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    auto w = params.weight(l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = scale * rng.normal();
  }
  return params;
}

ForwardPass forward_pass(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != params.input_dim())
    throw ValidationError("input has " + std::to_string(inputs.cols()) + " features, model expects " +
                          std::to_string(params.input_dim()));
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(params.num_layers() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Eigen::MatrixXd z = acts.back() * params.weight(l).transpose();
    z.rowwise() += params.bias(l).transpose();
    if (l + 1 < params.num_layers()) {
      auto za = z.array();
      tanh_inplace(za);
    }
    acts.push_back(std::move(z));
  }
  return {std::move(acts)};
}

double forward(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim())
    throw ValidationError("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(params.input_dim()));
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    h = params.weight(l) * h + params.bias(l);
    if (l + 1 < params.num_layers()) {
      auto ha = h.array();
      tanh_inplace(ha);
    }
  }
  return h(0);
}

Eigen::VectorXd forward_batch(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  return forward_pass(params, inputs).scores();
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double clamp_prob(double score, double clamp_hi) {
  if (!(clamp_hi > 0.5 && clamp_hi < 1.0)) throw ValidationError("clamp_hi must lie in (0.5, 1)");
  return std::min(sigmoid(score), clamp_hi);
}

double predict_prob(const ModelParams& params, std::span<const double> x, double clamp_hi) {
  return clamp_prob(forward(params, x), clamp_hi);
}

Gradients backward(const ModelParams& params, const Eigen::MatrixXd& inputs,
                   const Eigen::VectorXd& dloss_dscore) {
  return backward(params, forward_pass(params, inputs), dloss_dscore);
}

Gradients backward(const ModelParams& params, const ForwardPass& pass,
                   const Eigen::VectorXd& dloss_dscore) {
  const auto& acts = pass.activations;
  if (acts.size() != params.num_layers() + 1) throw ValidationError("forward pass does not match model");
  if (dloss_dscore.size() != acts.front().rows())
    throw ValidationError("upstream derivative count does not match batch size");

  Gradients grads;
  // Reuse the parameter layout to address gradient blocks.
  ModelParams view(params.layer_dims(), params.activation());

  Eigen::MatrixXd delta = dloss_dscore;  // n x 1
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    view.weight(l) = delta.transpose() * acts[l];
    view.bias(l) = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * params.weight(l);
      delta = back.array() * (1.0 - acts[l].array().square());
    }
  }
  grads.values = std::move(view.values());
  return grads;
}

void save_checkpoint(std::ostream& out, const ModelParams& params) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "activation tanh\n";
  out << "dims";
  for (auto d : params.layer_dims()) out << ' ' << d;
  out << '\n';
  out << "params " << params.size() << '\n';
  for (Eigen::Index i = 0; i < params.values().size(); ++i) out << format_real(params.values()(i)) << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  save_checkpoint(out, params);
}

ModelParams load_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint", line_no + 1);
    ++line_no;
    return line;
  };

  // Leading '#' lines (e.g. a generation stamp) are ignored.
  while (next().starts_with('#')) {
  }
  {
    std::istringstream hdr(line);
    std::string magic;
    int version = 0;
    hdr >> magic >> version;
    if (magic != kCheckpointMagic) throw ParseError("not a model checkpoint", line_no);
    if (version != kCheckpointVersion)
      throw ParseError("unsupported checkpoint version " + std::to_string(version), line_no);
  }
  if (trim(next()) != "activation tanh") throw ParseError("unknown activation", line_no);

  std::vector<std::size_t> dims;
  {
    std::istringstream ds(next());
    std::string key;
    ds >> key;
    if (key != "dims") throw ParseError("expected dims", line_no);
    std::size_t d = 0;
    while (ds >> d) dims.push_back(d);
  }
  ModelParams params = [&] {
    try {
      return ModelParams(dims);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }();

  std::size_t count = 0;
  {
    std::istringstream ps(next());
    std::string key;
    ps >> key >> count;
    if (key != "params" || count != params.size())
      throw ParseError("parameter count does not match dims", line_no);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = parse_real(trim(next()));
    if (!v || !std::isfinite(*v)) throw ParseError("malformed parameter value", line_no);
    params.values()(static_cast<Eigen::Index>(i)) = *v;
  }
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return load_checkpoint(in);
}

}  // namespace ocrisk
