#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperdrive/dataset.hpp"

namespace hyperdrive::analysis {

struct LabeledSpectra {
  int n = 0;
  int dims = 0;
  std::vector<double> data;  // n x dims row-major
  std::vector<int> labels;
  std::vector<std::string> channel_names;
  std::vector<std::string> warnings;

  double at(int i, int d) const { return data[static_cast<std::size_t>(i) * dims + d]; }
  void validate() const;  // n >= 2, finite values
};

struct Embedding {
  int n = 0;
  std::vector<double> coords;  // n x 2
  std::string method;
  double perplexity = 0;
  int iterations = 0;
  double learning_rate = 0;
  std::uint64_t seed = 0;

  double x(int i) const { return coords[2 * static_cast<std::size_t>(i)]; }
  double y(int i) const { return coords[2 * static_cast<std::size_t>(i) + 1]; }
};

struct PixelSample {
  LabeledSpectra hsi;
  LabeledSpectra rgb;
};

/// Deterministic stratified pixel sample (no replacement); the HSI and RGB
/// sets address the same pixels. Classes with fewer than per_class pixels
/// contribute everything they have plus a warning.
PixelSample sample_pixels(const std::string& root, const dataset::Manifest& manifest,
                          int per_class, std::uint64_t seed);

/// Mean-centered projection onto the top-k principal directions, sign fixed
/// so each component's largest-magnitude loading is positive.
Embedding pca_embed(const LabeledSpectra& data, int k = 2);

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
  int exaggeration_iters = 250;
  double exaggeration = 12.0;
  int momentum_switch_iter = 250;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
};

struct TsneResult {
  Embedding embedding;
  std::vector<double> kl_trace;  // true KL per iteration (exaggeration removed)
};

/// Exact O(n^2) t-SNE: per-point bandwidths by bisection to the target
/// perplexity, symmetrized affinities, KL gradient descent with momentum and
/// early exaggeration, PCA init scaled to 1e-4 standard deviation.
TsneResult tsne_embed(const LabeledSpectra& data, const TsneOptions& opts);

struct SeparabilityReport {
  double hsi_silhouette = 0;
  double rgb_silhouette = 0;
  std::vector<double> hsi_centroid_dist;  // k x k row-major
  std::vector<double> rgb_centroid_dist;
  std::vector<int> class_ids;
  std::string winner;  // "hsi" | "rgb" | "tie"
  std::string text() const;
};

SeparabilityReport separability_report(const Embedding& hsi_emb, const Embedding& rgb_emb,
                                       const std::vector<int>& labels);

/// Mean silhouette score over Euclidean distances.
double silhouette(const Embedding& emb, const std::vector<int>& labels);

namespace detail {
/// Symmetrized t-SNE affinity matrix P (n x n, sums to 1) plus the per-row
/// precision found by bisection.
struct Affinities {
  int n = 0;
  std::vector<double> p;      // n x n
  std::vector<double> betas;  // 1 / (2 sigma_i^2)
};
Affinities compute_affinities(const LabeledSpectra& data, double perplexity,
                              double tol = 1e-4);
double kl_divergence(const Affinities& aff, const std::vector<double>& y);
std::vector<double> kl_gradient(const Affinities& aff, const std::vector<double>& y);
/// Row-conditional perplexity of the Gaussian distribution at a given beta.
double row_perplexity(const LabeledSpectra& data, int row, double beta);
}  // namespace detail

}  // namespace hyperdrive::analysis
