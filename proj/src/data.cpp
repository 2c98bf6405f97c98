#include "ocrisk/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/rng.hpp"

namespace ocrisk {

std::size_t LabeledDataset::count_positive() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::vector<std::size_t> LabeledDataset::positive_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) out.push_back(i);
  return out;
}

void LabeledDataset::validate() const {
  if (labels.size() != rows()) throw ValidationError("label count does not match feature rows");
  for (int y : labels)
    if (y != 1 && y != -1) throw ValidationError("labels must be +1 or -1");
  if (!features.allFinite()) throw ValidationError("features must be finite");
  if (!(pi_p_true > 0.0 && pi_p_true < 1.0)) throw ValidationError("pi_p_true must lie in (0,1)");
}

bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
  return a.name == b.name && a.pi_p_true == b.pi_p_true && a.labels == b.labels &&
         a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
         a.features == b.features;
}

namespace {

void validate_components(const std::vector<GaussianComponent>& comps, std::size_t dim,
                         const char* which) {
  if (comps.empty()) throw ValidationError(std::string(which) + " mixture has no components");
  double total = 0.0;
  for (const auto& c : comps) {
    if (c.mean.size() != dim)
      throw ValidationError(std::string(which) + " component mean has wrong dimension");
    if (!(c.stddev > 0.0) || !std::isfinite(c.stddev))
      throw ValidationError(std::string(which) + " component stddev must be > 0");
    if (!(c.weight >= 0.0)) throw ValidationError(std::string(which) + " weight must be >= 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError(std::string(which) + " mixture weights must sum to 1 (got " +
                          format_real(total) + ")");
}

std::size_t pick_component(const std::vector<GaussianComponent>& comps, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    acc += comps[k].weight;
    if (u < acc) return k;
  }
  return comps.size() - 1;
}

// Partial Fisher-Yates: k distinct elements of pool, uniformly.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                    Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (!(pi_p > 0.0 && pi_p < 1.0)) throw ValidationError("pi_p must lie in (0,1)");
  if (n_total < 1) throw ValidationError("n_total must be >= 1");
  if (!(overlap_scale >= 0.0) || !std::isfinite(overlap_scale))
    throw ValidationError("overlap_scale must be >= 0");
  validate_components(positive_components, dim, "positive");
  validate_components(negative_components, dim, "negative");
}

SyntheticSpec default_synthetic_spec(std::size_t dim, double pi_p, std::size_t n_total,
                                     std::size_t negative_components, double overlap_scale) {
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (negative_components < 3 || negative_components > 8)
    throw ValidationError("negative_components must be in [3, 8]");

  SyntheticSpec spec;
  spec.dim = dim;
  spec.pi_p = pi_p;
  spec.n_total = n_total;
  spec.overlap_scale = overlap_scale;

  auto point = [dim](double x, double y) {
    std::vector<double> m(dim, 0.0);
    m[0] = x;
    if (dim > 1) m[1] = y;
    return m;
  };

  spec.positive_components.push_back({point(0.0, 0.0), 0.5, 1.0});

  const double w = 1.0 / static_cast<double>(negative_components);
  spec.negative_components.push_back({point(3.0, 0.0), 0.5, w});
  const std::size_t ring = negative_components - 1;
  for (std::size_t k = 0; k < ring; ++k) {
    // Spread over the arc facing away from the adjacent blob.
    const double a = 0.9 + (2.0 * std::numbers::pi - 1.8) * static_cast<double>(k) /
                               static_cast<double>(ring > 1 ? ring - 1 : 1);
    spec.negative_components.push_back({point(4.5 * std::cos(a), 4.5 * std::sin(a)), 0.8, w});
  }
  // Make the weights sum to exactly 1 in floating point.
  double rest = 1.0;
  for (std::size_t k = 0; k + 1 < spec.negative_components.size(); ++k)
    rest -= spec.negative_components[k].weight;
  spec.negative_components.back().weight = rest;
  return spec;
}

namespace {

void draw_row(const SyntheticSpec& spec, bool positive, Eigen::MatrixXd& out, Eigen::Index row, Rng& rng) {
  const auto& comps = positive ? spec.positive_components : spec.negative_components;
  const auto& c = comps[pick_component(comps, rng.uniform())];
  const double sd = c.stddev * spec.overlap_scale;
  for (std::size_t j = 0; j < spec.dim; ++j)
    out(row, static_cast<Eigen::Index>(j)) = c.mean[j] + sd * rng.normal();
}

}  // namespace

LabeledDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng(seed).split("gen_synthetic");

  LabeledDataset ds;
  ds.name = spec.name;
  ds.pi_p_true = spec.pi_p;
  ds.features.resize(static_cast<Eigen::Index>(spec.n_total), static_cast<Eigen::Index>(spec.dim));
  ds.labels.resize(spec.n_total);

  for (std::size_t i = 0; i < spec.n_total; ++i) {
    const bool positive = rng.bernoulli(spec.pi_p);
    draw_row(spec, positive, ds.features, static_cast<Eigen::Index>(i), rng);
    ds.labels[i] = positive ? 1 : -1;
  }
  return ds;
}

Eigen::MatrixXd sample_class(const SyntheticSpec& spec, bool positive, std::size_t n, Rng& rng) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) draw_row(spec, positive, out, i, rng);
  return out;
}

Eigen::MatrixXd sample_marginal(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) draw_row(spec, rng.bernoulli(spec.pi_p), out, i, rng);
  return out;
}

PUSample make_pu_split(const LabeledDataset& ds, std::size_t n_p, std::size_t n_u,
                       std::uint64_t seed, bool allow_overlap) {
  if (n_p < 1 || n_u < 1) throw ValidationError("n_p and n_u must be >= 1");
  auto positives = ds.positive_rows();
  if (positives.size() < n_p)
    throw ValidationError("need " + std::to_string(n_p) + " labeled positives but dataset has " +
                          std::to_string(positives.size()) + " (short by " +
                          std::to_string(n_p - positives.size()) + ")");

  Rng root(seed);
  Rng rng_p = root.split("pu_positive");
  Rng rng_u = root.split("pu_unlabeled");

  PUSample pu;
  pu.source_rows = ds.rows();
  pu.positive_idx = sample_without_replacement(std::move(positives), n_p, rng_p);

  std::vector<std::size_t> pool;
  pool.reserve(ds.rows());
  if (allow_overlap) {
    pool.resize(ds.rows());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  } else {
    for (std::size_t i = 0; i < ds.rows(); ++i)
      if (!std::binary_search(pu.positive_idx.begin(), pu.positive_idx.end(), i)) pool.push_back(i);
  }
  if (pool.size() < n_u)
    throw ValidationError("need " + std::to_string(n_u) + " unlabeled rows but only " +
                          std::to_string(pool.size()) + " are available");
  pu.unlabeled_idx = sample_without_replacement(std::move(pool), n_u, rng_u);
  return pu;
}

std::vector<std::size_t> held_out_rows(const LabeledDataset& ds, const PUSample& pu) {
  std::vector<char> used(ds.rows(), 0);
  for (auto i : pu.positive_idx) used.at(i) = 1;
  for (auto i : pu.unlabeled_idx) used.at(i) = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.rows(); ++i)
    if (!used[i]) out.push_back(i);
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

std::vector<int> gather_labels(const LabeledDataset& ds, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.labels.at(i));
  return out;
}

LabeledDataset parse_csv(std::istream& in, std::string name) {
  LabeledDataset ds;
  ds.name = std::move(name);

  std::optional<double> prior_directive;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    if (!have_header && text.front() == '#') {
      std::string_view body = trim(text.substr(1));
      if (body.starts_with("pi_p=")) {
        prior_directive = parse_real(trim(body.substr(5)));
        if (!prior_directive || !(*prior_directive > 0.0 && *prior_directive < 1.0))
          throw ParseError("pi_p directive must be a number in (0,1)", line_no);
      }
      continue;
    }
    const auto fields = split_fields(text);
    if (!have_header) {
      if (fields.size() < 2 || trim(fields.back()) != "y")
        throw ParseError("header must be f0,...,f{d-1},y", line_no);
      dim = fields.size() - 1;
      for (std::size_t j = 0; j < dim; ++j)
        if (trim(fields[j]) != "f" + std::to_string(j))
          throw ParseError("header column " + std::to_string(j) + " must be f" +
                               std::to_string(j),
                           line_no);
      have_header = true;
      continue;
    }
    if (fields.size() != dim + 1)
      throw ParseError("expected " + std::to_string(dim + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto v = parse_real(trim(fields[j]));
      if (!v) throw ParseError("malformed number in column f" + std::to_string(j), line_no);
      if (!std::isfinite(*v)) throw ParseError("non-finite value in column f" + std::to_string(j), line_no);
      values.push_back(*v);
    }
    const auto label = trim(fields[dim]);
    if (label == "1" || label == "+1")
      ds.labels.push_back(1);
    else if (label == "-1")
      ds.labels.push_back(-1);
    else
      throw ParseError("label must be 1 or -1, got '" + std::string(label) + "'", line_no);
  }
  if (!have_header) throw ParseError("missing header row", line_no);

  const auto n = static_cast<Eigen::Index>(ds.labels.size());
  ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(dim));
  if (prior_directive) {
    ds.pi_p_true = *prior_directive;
  } else {
    if (n == 0) throw ParseError("no data rows and no pi_p directive", line_no);
    ds.pi_p_true = static_cast<double>(ds.count_positive()) / static_cast<double>(n);
    if (!(ds.pi_p_true > 0.0 && ds.pi_p_true < 1.0))
      throw ParseError("both classes must be present when no pi_p directive is given", 0);
  }
  return ds;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return parse_csv(in, path.stem().string());
}

void write_csv(std::ostream& out, const LabeledDataset& ds) {
  out << "# pi_p=" << format_real(ds.pi_p_true) << '\n';
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "y\n";
  std::string row;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    row.clear();
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      row += format_real(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      row += ',';
    }
    row += ds.labels[i] == 1 ? "1" : "-1";
    row += '\n';
    out << row;
  }
}

void write_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_csv(out, ds);
}

}  // namespace ocrisk
