#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ocrisk {

// Feature rows with ground-truth +1/-1 labels and the true class prior.
struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // +1 or -1 per row
  double pi_p_true = 0.5;
  std::string name = "dataset";

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t count_positive() const;
  std::vector<std::size_t> positive_rows() const;

  // Throws ValidationError when labels or features break the invariants.
  void validate() const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b);
};

// Indices into a parent dataset: labeled positives and the unlabeled pool.
struct PUSample {
  std::vector<std::size_t> positive_idx;
  std::vector<std::size_t> unlabeled_idx;
  std::size_t source_rows = 0;

  std::size_t n_p() const { return positive_idx.size(); }
  std::size_t n_u() const { return unlabeled_idx.size(); }
};

struct GaussianComponent {
  std::vector<double> mean;
  double stddev = 1.0;
  double weight = 1.0;
};

// Two class-conditional isotropic Gaussian mixtures plus a class prior.
struct SyntheticSpec {
  std::size_t dim = 2;
  double pi_p = 0.5;
  std::vector<GaussianComponent> positive_components;
  std::vector<GaussianComponent> negative_components;
  std::size_t n_total = 1000;
  double overlap_scale = 1.0;  // multiplies every component stddev
  std::string name = "synthetic";

  void validate() const;
};

// Reference geometry: one positive blob at the origin, a negative blob
// adjacent to it (tails overlap, no margin), and the remaining negative
// components spread on a ring. Features beyond the first two are pure
// noise shared by both classes.
SyntheticSpec default_synthetic_spec(std::size_t dim, double pi_p, std::size_t n_total,
                                     std::size_t negative_components = 5,
                                     double overlap_scale = 1.0);

LabeledDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

class Rng;
// n rows from one class-conditional mixture of `spec`.
Eigen::MatrixXd sample_class(const SyntheticSpec& spec, bool positive, std::size_t n, Rng& rng);
// n rows from the marginal pi_p P_p + (1 - pi_p) P_n.
Eigen::MatrixXd sample_marginal(const SyntheticSpec& spec, std::size_t n, Rng& rng);

// Draw n_p labeled positives and n_u unlabeled rows, each without
// replacement. With allow_overlap the unlabeled pool is drawn from every
// row; otherwise rows chosen as labeled positives are excluded from it.
PUSample make_pu_split(const LabeledDataset& ds, std::size_t n_p, std::size_t n_u,
                       std::uint64_t seed, bool allow_overlap = true);

// Rows referenced by neither index list, in ascending order.
std::vector<std::size_t> held_out_rows(const LabeledDataset& ds, const PUSample& pu);

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> idx);
std::vector<int> gather_labels(const LabeledDataset& ds, std::span<const std::size_t> idx);

// CSV: optional "# pi_p=<v>" directive, header "f0,...,f{d-1},y", then rows.
LabeledDataset load_csv(const std::filesystem::path& path);
LabeledDataset parse_csv(std::istream& in, std::string name = "dataset");
void write_csv(std::ostream& out, const LabeledDataset& ds);
void write_csv(const std::filesystem::path& path, const LabeledDataset& ds);

}  // namespace ocrisk
