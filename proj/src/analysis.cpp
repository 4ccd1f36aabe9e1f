#include "hyperdrive/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "hyperdrive/error.hpp"

namespace fs = std::filesystem;

namespace hyperdrive::analysis {

void LabeledSpectra::validate() const {
  if (n < 2) fail(Errc::invalid_argument, "need at least two samples");
  if (dims < 1) fail(Errc::invalid_argument, "need at least one feature dimension");
  if (data.size() != static_cast<std::size_t>(n) * dims)
    fail(Errc::invalid_argument, "data size does not match n x dims");
  if (labels.size() != static_cast<std::size_t>(n))
    fail(Errc::invalid_argument, "label count does not match n");
  for (double v : data)
    if (!std::isfinite(v)) fail(Errc::numeric, "non-finite feature value");
}

PixelSample sample_pixels(const std::string& root, const dataset::Manifest& manifest,
                          int per_class, std::uint64_t seed) {
  if (per_class < 1) fail(Errc::invalid_argument, "per_class must be >= 1");
  if (manifest.samples.empty()) fail(Errc::invalid_argument, "manifest has no samples");

  struct Pick {
    int label;
    std::size_t sample;  // manifest index
    int pixel;           // row-major pixel index
  };
  // Gather the candidate pixel pool per label across all samples.
  std::map<int, std::vector<Pick>> pools;
  std::vector<dataset::LabelMask> masks(manifest.samples.size());
  for (std::size_t s = 0; s < manifest.samples.size(); ++s) {
    const fs::path dir = fs::path(root) / "samples" / manifest.samples[s].id;
    masks[s] = dataset::load_mask((dir / "mask.raster").string());
    const auto& m = masks[s];
    for (int p = 0; p < m.height * m.width; ++p)
      pools[m.v[p]].push_back({m.v[p], s, p});
  }

  std::mt19937_64 rng(seed);
  std::vector<Pick> chosen;
  std::vector<std::string> warnings;
  for (auto& [label, pool] : pools) {
    std::shuffle(pool.begin(), pool.end(), rng);
    if (static_cast<int>(pool.size()) < per_class) {
      std::ostringstream w;
      w << "class " << label;
      if (manifest.ontology.has_index(label)) {
        const auto& e = manifest.ontology.entry(label);
        w << " (" << e.level1;
        if (!e.level2.empty()) w << "/" << e.level2;
        w << ")";
      }
      w << " has only " << pool.size() << " pixels (requested " << per_class << ")";
      warnings.push_back(w.str());
    }
    const std::size_t take = std::min<std::size_t>(pool.size(), per_class);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + take);
  }
  if (chosen.size() < 2) fail(Errc::degenerate_input, "fewer than two pixels sampled");

  // Load each referenced sample once and pull the chosen pixels.
  PixelSample out;
  out.hsi.n = out.rgb.n = static_cast<int>(chosen.size());
  out.hsi.warnings = out.rgb.warnings = warnings;
  std::sort(chosen.begin(), chosen.end(), [](const Pick& a, const Pick& b) {
    return std::tie(a.sample, a.pixel, a.label) < std::tie(b.sample, b.pixel, b.label);
  });
  bool first = true;
  std::size_t cur = std::numeric_limits<std::size_t>::max();
  cube::DataCube cube(1, 1, 1);
  dataset::Raster3 rgb;
  for (const Pick& pick : chosen) {
    if (pick.sample != cur) {
      cur = pick.sample;
      const fs::path dir = fs::path(root) / "samples" / manifest.samples[cur].id;
      cube = dataset::load_cube_hdz((dir / "cube.hdz").string());
      rgb = dataset::load_raster3((dir / "rgb.raster").string());
      if (first) {
        out.hsi.dims = cube.channels;
        out.rgb.dims = 3;
        for (double w : cube.wavelengths_nm) {
          std::ostringstream name;
          name << w << "nm";
          out.hsi.channel_names.push_back(name.str());
        }
        out.rgb.channel_names = {"R", "G", "B"};
        first = false;
      }
      if (cube.channels != out.hsi.dims)
        fail(Errc::validation, "samples disagree on channel count");
    }
    out.hsi.labels.push_back(pick.label);
    out.rgb.labels.push_back(pick.label);
    for (int c = 0; c < cube.channels; ++c)
      out.hsi.data.push_back(cube.data[static_cast<std::size_t>(pick.pixel) * cube.channels + c]);
    for (int c = 0; c < 3; ++c)
      out.rgb.data.push_back(rgb.v[static_cast<std::size_t>(pick.pixel) * 3 + c]);
  }
  out.hsi.validate();
  out.rgb.validate();
  return out;
}

namespace {

/// Mean-centered data as an Eigen matrix (n x dims).
Eigen::MatrixXd centered(const LabeledSpectra& data) {
  Eigen::MatrixXd x(data.n, data.dims);
  for (int i = 0; i < data.n; ++i)
    for (int d = 0; d < data.dims; ++d) x(i, d) = data.at(i, d);
  x.rowwise() -= x.colwise().mean();
  return x;
}

/// Top-k principal projections with the sign rule applied.
Eigen::MatrixXd pca_project(const LabeledSpectra& data, int k) {
  Eigen::MatrixXd x = centered(data);
  Eigen::MatrixXd cov = (x.transpose() * x) / std::max(1, data.n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(Errc::numeric, "eigen decomposition failed");
  Eigen::MatrixXd basis(data.dims, k);
  for (int c = 0; c < k; ++c) {
    // Eigen orders eigenvalues ascending; take from the back.
    Eigen::VectorXd v = solver.eigenvectors().col(data.dims - 1 - c);
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(c) = v;
  }
  return x * basis;
}

}  // namespace

Embedding pca_embed(const LabeledSpectra& data, int k) {
  data.validate();
  if (k < 1 || k > data.dims) fail(Errc::invalid_argument, "invalid component count");
  Eigen::MatrixXd proj = pca_project(data, k);
  Embedding emb;
  emb.n = data.n;
  emb.method = "pca";
  emb.coords.resize(static_cast<std::size_t>(data.n) * 2, 0.0);
  for (int i = 0; i < data.n; ++i)
    for (int c = 0; c < std::min(k, 2); ++c) emb.coords[2 * i + c] = proj(i, c);
  return emb;
}

namespace detail {

double row_perplexity(const LabeledSpectra& data, int row, double beta) {
  // Shannon perplexity of p_{j|row} under precision beta.
  std::vector<double> d2(data.n);
  double dmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < data.n; ++j) {
    if (j == row) continue;
    double s = 0;
    for (int c = 0; c < data.dims; ++c) {
      const double diff = data.at(row, c) - data.at(j, c);
      s += diff * diff;
    }
    d2[j] = s;
    dmin = std::min(dmin, s);
  }
  double sum = 0, sum_d = 0;
  for (int j = 0; j < data.n; ++j) {
    if (j == row) continue;
    const double e = std::exp(-beta * (d2[j] - dmin));
    sum += e;
    sum_d += e * (d2[j] - dmin);
  }
  if (sum <= 0) return 1.0;
  // H = log(sum) + beta * E[d2]  (shifted distances cancel in the entropy)
  const double entropy = std::log(sum) + beta * sum_d / sum;
  return std::exp(entropy);
}

Affinities compute_affinities(const LabeledSpectra& data, double perplexity, double tol) {
  data.validate();
  if (perplexity <= 0 || perplexity >= data.n)
    fail(Errc::invalid_argument, "perplexity must be in (0, n)");
  const int n = data.n;
  Affinities aff;
  aff.n = n;
  aff.p.assign(static_cast<std::size_t>(n) * n, 0.0);
  aff.betas.assign(n, 1.0);

  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int c = 0; c < data.dims; ++c) {
        const double diff = data.at(i, c) - data.at(j, c);
        s += diff * diff;
      }
      d2[static_cast<std::size_t>(i) * n + j] = s;
    }

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    // Bisection on beta until the row perplexity hits the target.
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    const double target = std::log(perplexity);
    double dmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d2[static_cast<std::size_t>(i) * n + j]);
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0, sum_d = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dd = d2[static_cast<std::size_t>(i) * n + j] - dmin;
        const double e = std::exp(-beta * dd);
        sum += e;
        sum_d += e * dd;
      }
      const double entropy = sum > 0 ? std::log(sum) + beta * sum_d / sum : 0.0;
      const double diff = entropy - target;
      if (std::abs(diff) < tol) break;
      if (diff > 0) {  // too spread out: increase precision
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (lo + hi) / 2;
      } else {
        hi = beta;
        beta = (lo + hi) / 2;
      }
    }
    aff.betas[i] = beta;
    double sum = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double e = std::exp(-beta * (d2[static_cast<std::size_t>(i) * n + j] - dmin));
      aff.p[static_cast<std::size_t>(i) * n + j] = e;
      sum += e;
    }
    if (sum <= 0) sum = 1;
    for (int j = 0; j < n; ++j) aff.p[static_cast<std::size_t>(i) * n + j] /= sum;
  }

  // Symmetrize: P = (P + P^T) / (2n), floored away from zero.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const std::size_t ij = static_cast<std::size_t>(i) * n + j;
      const std::size_t ji = static_cast<std::size_t>(j) * n + i;
      const double v = std::max((aff.p[ij] + aff.p[ji]) / (2.0 * n), 1e-12);
      aff.p[ij] = aff.p[ji] = v;
    }
  for (int i = 0; i < n; ++i) aff.p[static_cast<std::size_t>(i) * n + i] = 0.0;
  return aff;
}

namespace {

/// Student-t numerators q~_ij = 1/(1+|y_i-y_j|^2) and their total.
void q_numerators(int n, const std::vector<double>& y, std::vector<double>& num, double& z) {
  num.assign(static_cast<std::size_t>(n) * n, 0.0);
  z = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = y[2 * i] - y[2 * j];
      const double dy = y[2 * i + 1] - y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[static_cast<std::size_t>(i) * n + j] = v;
      num[static_cast<std::size_t>(j) * n + i] = v;
      z += 2 * v;
    }
  if (z <= 0) z = 1e-12;
}

}  // namespace

double kl_divergence(const Affinities& aff, const std::vector<double>& y) {
  const int n = aff.n;
  std::vector<double> num;
  double z;
  q_numerators(n, y, num, z);
  double kl = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = aff.p[static_cast<std::size_t>(i) * n + j];
      if (p <= 0) continue;
      const double q = std::max(num[static_cast<std::size_t>(i) * n + j] / z, 1e-12);
      kl += p * std::log(p / q);
    }
  return kl;
}

std::vector<double> kl_gradient(const Affinities& aff, const std::vector<double>& y) {
  const int n = aff.n;
  std::vector<double> num;
  double z;
  q_numerators(n, y, num, z);
  std::vector<double> grad(static_cast<std::size_t>(n) * 2, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double gx = 0, gy = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::size_t ij = static_cast<std::size_t>(i) * n + j;
      const double q = num[ij] / z;
      const double mult = 4.0 * (aff.p[ij] - q) * num[ij];
      gx += mult * (y[2 * i] - y[2 * j]);
      gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
    }
    grad[2 * i] = gx;
    grad[2 * i + 1] = gy;
  }
  return grad;
}

}  // namespace detail

TsneResult tsne_embed(const LabeledSpectra& data, const TsneOptions& opts) {
  data.validate();
  if (opts.iterations < 1) fail(Errc::invalid_argument, "iterations must be >= 1");
  const int n = data.n;
  detail::Affinities aff = detail::compute_affinities(data, opts.perplexity);

  // PCA init rescaled to sd 1e-4 for a stable small start.
  std::vector<double> y(static_cast<std::size_t>(n) * 2, 0.0);
  {
    Eigen::MatrixXd proj = pca_project(data, std::min(2, data.dims));
    double sd = 0;
    for (int c = 0; c < proj.cols(); ++c) sd += proj.col(c).squaredNorm();
    sd = std::sqrt(sd / (static_cast<double>(n) * proj.cols()));
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> jitter(0.0, 1e-4);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        const double base =
            c < proj.cols() && sd > 0 ? proj(i, c) / sd * 1e-4 : jitter(rng);
        y[2 * i + c] = base;
      }
  }

  detail::Affinities work = aff;
  std::vector<double> velocity(y.size(), 0.0);
  std::vector<double> gains(y.size(), 1.0);
  TsneResult result;
  result.kl_trace.reserve(opts.iterations);
  for (int iter = 0; iter < opts.iterations; ++iter) {
    const bool exaggerate = iter < opts.exaggeration_iters;
    const double scale = exaggerate ? opts.exaggeration : 1.0;
    for (std::size_t k = 0; k < work.p.size(); ++k) work.p[k] = aff.p[k] * scale;
    const std::vector<double> grad = detail::kl_gradient(work, y);
    const double momentum =
        iter < opts.momentum_switch_iter ? opts.momentum_initial : opts.momentum_final;
    for (std::size_t k = 0; k < y.size(); ++k) {
      // Jacobs-style adaptive gains, clipped below at 0.01.
      const bool same_sign = (grad[k] > 0) == (velocity[k] > 0);
      gains[k] = std::max(same_sign ? gains[k] * 0.8 : gains[k] + 0.2, 0.01);
      velocity[k] = momentum * velocity[k] - opts.learning_rate * gains[k] * grad[k];
      y[k] += velocity[k];
    }
    // Re-center to remove the translational degree of freedom.
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= n;
    my /= n;
    for (int i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
    result.kl_trace.push_back(detail::kl_divergence(aff, y));
  }

  result.embedding.n = n;
  result.embedding.coords = std::move(y);
  result.embedding.method = "tsne";
  result.embedding.perplexity = opts.perplexity;
  result.embedding.iterations = opts.iterations;
  result.embedding.learning_rate = opts.learning_rate;
  result.embedding.seed = opts.seed;
  return result;
}

double silhouette(const Embedding& emb, const std::vector<int>& labels) {
  if (emb.n < 2 || labels.size() != static_cast<std::size_t>(emb.n))
    fail(Errc::invalid_argument, "embedding/label size mismatch");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) fail(Errc::undefined_score, "silhouette needs at least two classes");

  double total = 0;
  int scored = 0;
  for (int i = 0; i < emb.n; ++i) {
    if (counts[labels[i]] < 2) continue;  // singleton clusters score 0 by convention
    std::map<int, std::pair<double, int>> acc;  // label -> (dist sum, count)
    for (int j = 0; j < emb.n; ++j) {
      if (j == i) continue;
      const double dx = emb.x(i) - emb.x(j);
      const double dy = emb.y(i) - emb.y(j);
      auto& a = acc[labels[j]];
      a.first += std::sqrt(dx * dx + dy * dy);
      ++a.second;
    }
    const double a = acc[labels[i]].first / acc[labels[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, sum_count] : acc)
      if (label != labels[i]) b = std::min(b, sum_count.first / sum_count.second);
    total += (b - a) / std::max(a, b);
    ++scored;
  }
  if (scored == 0) fail(Errc::undefined_score, "no sample belongs to a non-singleton class");
  return total / scored;
}

SeparabilityReport separability_report(const Embedding& hsi_emb, const Embedding& rgb_emb,
                                       const std::vector<int>& labels) {
  if (hsi_emb.n != rgb_emb.n) fail(Errc::invalid_argument, "embedding sizes differ");
  SeparabilityReport rep;
  rep.hsi_silhouette = silhouette(hsi_emb, labels);
  rep.rgb_silhouette = silhouette(rgb_emb, labels);

  std::map<int, std::size_t> index_of;
  for (int l : labels)
    if (!index_of.count(l)) {
      index_of[l] = rep.class_ids.size();
      rep.class_ids.push_back(l);
    }
  std::sort(rep.class_ids.begin(), rep.class_ids.end());
  index_of.clear();
  for (std::size_t k = 0; k < rep.class_ids.size(); ++k) index_of[rep.class_ids[k]] = k;

  const std::size_t k = rep.class_ids.size();
  auto centroid_dists = [&](const Embedding& emb) {
    std::vector<double> cx(k, 0), cy(k, 0);
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < emb.n; ++i) {
      const std::size_t c = index_of[labels[i]];
      cx[c] += emb.x(i);
      cy[c] += emb.y(i);
      ++cnt[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      cx[c] /= cnt[c];
      cy[c] /= cnt[c];
    }
    std::vector<double> d(k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        d[a * k + b] = std::hypot(cx[a] - cx[b], cy[a] - cy[b]);
    return d;
  };
  rep.hsi_centroid_dist = centroid_dists(hsi_emb);
  rep.rgb_centroid_dist = centroid_dists(rgb_emb);

  const double diff = rep.hsi_silhouette - rep.rgb_silhouette;
  rep.winner = std::abs(diff) < 1e-6 ? "tie" : (diff > 0 ? "hsi" : "rgb");
  return rep;
}

std::string SeparabilityReport::text() const {
  std::ostringstream out;
  out << "separability report\n";
  out << "  hsi silhouette: " << hsi_silhouette << "\n";
  out << "  rgb silhouette: " << rgb_silhouette << "\n";
  out << "  winner: " << winner << "\n";
  const std::size_t k = class_ids.size();
  out << "  centroid distances (hsi | rgb):\n";
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      out << "    " << class_ids[a] << "-" << class_ids[b] << ": "
          << hsi_centroid_dist[a * k + b] << " | " << rgb_centroid_dist[a * k + b] << "\n";
  return out.str();
}

}  // namespace hyperdrive::analysis
