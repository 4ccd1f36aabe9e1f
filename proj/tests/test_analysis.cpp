#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include "hyperdrive/analysis.hpp"
#include "hyperdrive/dataset.hpp"

using namespace hyperdrive;
using namespace hyperdrive::analysis;
namespace fs = std::filesystem;

namespace {

LabeledSpectra gaussian_clusters(std::uint64_t seed, int per_cluster, int dims,
                                 double separation, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  LabeledSpectra out;
  out.dims = dims;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < per_cluster; ++i) {
      for (int d = 0; d < dims; ++d)
        out.data.push_back((d == k % dims ? separation * (k + 1) : 0.0) + noise(rng));
      out.labels.push_back(k);
      ++out.n;
    }
  return out;
}

/// Independent silhouette oracle straight from the definition.
double oracle_silhouette(const Embedding& e, const std::vector<int>& labels) {
  const int n = e.n;
  auto dist = [&](int i, int j) {
    return std::hypot(e.x(i) - e.x(j), e.y(i) - e.y(j));
  };
  double total = 0;
  int counted = 0;
  for (int i = 0; i < n; ++i) {
    int same = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) ++same;
    if (same == 0) continue;  // singleton clusters are skipped
    double a = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) a += dist(i, j);
    a /= same;
    double b = std::numeric_limits<double>::infinity();
    std::set<int> others(labels.begin(), labels.end());
    for (int other : others) {
      if (other == labels[i]) continue;
      double s = 0;
      int cnt = 0;
      for (int j = 0; j < n; ++j)
        if (labels[j] == other) {
          s += dist(i, j);
          ++cnt;
        }
      if (cnt > 0) b = std::min(b, s / cnt);
    }
    total += (b - a) / std::max(a, b);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("affinities hit the target perplexity within tolerance") {
  LabeledSpectra data = gaussian_clusters(1, 12, 4, 3.0, 0.5);
  const double target = 8.0;
  detail::Affinities aff = detail::compute_affinities(data, target, 1e-4);
  REQUIRE(aff.n == data.n);
  REQUIRE(static_cast<int>(aff.betas.size()) == data.n);
  // Independent recomputation of each row's perplexity from the stored beta.
  for (int i = 0; i < data.n; ++i)
    CHECK(detail::row_perplexity(data, i, aff.betas[i]) ==
          doctest::Approx(target).epsilon(1e-3));

  // P is symmetric, non-negative, zero-diagonal, and sums to 1.
  double sum = 0;
  for (int i = 0; i < aff.n; ++i) {
    CHECK(aff.p[static_cast<std::size_t>(i) * aff.n + i] == 0.0);
    for (int j = 0; j < aff.n; ++j) {
      const double pij = aff.p[static_cast<std::size_t>(i) * aff.n + j];
      CHECK(pij >= 0.0);
      CHECK(pij ==
            doctest::Approx(aff.p[static_cast<std::size_t>(j) * aff.n + i]).epsilon(1e-12));
      sum += pij;
    }
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("KL gradient matches central finite differences") {
  LabeledSpectra data = gaussian_clusters(2, 4, 3, 2.0, 0.6);  // n = 12
  detail::Affinities aff = detail::compute_affinities(data, 3.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> y(static_cast<std::size_t>(data.n) * 2);
  for (double& v : y) v = u(rng);

  std::vector<double> grad = detail::kl_gradient(aff, y);
  REQUIRE(grad.size() == y.size());
  const double h = 1e-6;
  for (std::size_t k = 0; k < y.size(); ++k) {
    std::vector<double> yp = y, ym = y;
    yp[k] += h;
    ym[k] -= h;
    const double fd = (detail::kl_divergence(aff, yp) - detail::kl_divergence(aff, ym)) / (2 * h);
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("PCA embedding matches a covariance-eigenvector oracle") {
  // Planted 2-D structure in 5 dims: the top two principal directions are
  // axes 0 and 1 by construction.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  LabeledSpectra data;
  data.dims = 5;
  for (int i = 0; i < 40; ++i) {
    const double a = 10.0 * g(rng), b = 3.0 * g(rng);
    data.data.insert(data.data.end(), {a, b, 0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng)});
    data.labels.push_back(0);
    ++data.n;
  }
  Embedding e = pca_embed(data, 2);
  REQUIRE(e.n == data.n);
  CHECK(e.method == "pca");

  // Projected variance along component 1 should dominate component 2.
  double v1 = 0, v2 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < e.n; ++i) {
    m1 += e.x(i);
    m2 += e.y(i);
  }
  m1 /= e.n;
  m2 /= e.n;
  for (int i = 0; i < e.n; ++i) {
    v1 += (e.x(i) - m1) * (e.x(i) - m1);
    v2 += (e.y(i) - m2) * (e.y(i) - m2);
  }
  CHECK(v1 > v2);

  // Sign rule: correlation with raw axis 0 must be positive (its loading is
  // the largest in magnitude and therefore flipped positive).
  double corr = 0;
  for (int i = 0; i < e.n; ++i) corr += e.x(i) * data.at(i, 0);
  CHECK(corr > 0);

  // Projection preserves pairwise structure: PCA of already-2-D data is a
  // rigid rotation, so distances survive exactly.
  LabeledSpectra flat;
  flat.dims = 2;
  for (int i = 0; i < 10; ++i) {
    flat.data.push_back(g(rng));
    flat.data.push_back(g(rng));
    flat.labels.push_back(0);
    ++flat.n;
  }
  Embedding fe = pca_embed(flat, 2);
  for (int i = 0; i < flat.n; ++i)
    for (int j = i + 1; j < flat.n; ++j) {
      const double orig = std::hypot(flat.at(i, 0) - flat.at(j, 0), flat.at(i, 1) - flat.at(j, 1));
      const double proj = std::hypot(fe.x(i) - fe.x(j), fe.y(i) - fe.y(j));
      CHECK(proj == doctest::Approx(orig).epsilon(1e-9));
    }
}

TEST_CASE("silhouette matches the definition oracle") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  Embedding e;
  std::vector<int> labels;
  e.n = 30;
  for (int i = 0; i < 30; ++i) {
    e.coords.push_back(u(rng));
    e.coords.push_back(u(rng));
    labels.push_back(i % 4);
  }
  CHECK(silhouette(e, labels) == doctest::Approx(oracle_silhouette(e, labels)).epsilon(1e-12));

  // Singleton cluster does not poison the mean.
  labels[7] = 99;
  CHECK(silhouette(e, labels) == doctest::Approx(oracle_silhouette(e, labels)).epsilon(1e-12));
}

TEST_CASE("t-SNE separates well-separated clusters and monotonically improves KL") {
  LabeledSpectra data = gaussian_clusters(6, 15, 6, 8.0, 0.3);  // n = 45
  TsneOptions opts;
  opts.perplexity = 10.0;
  opts.iterations = 500;
  opts.seed = 1;
  TsneResult res = tsne_embed(data, opts);
  REQUIRE(res.embedding.n == data.n);
  CHECK(res.embedding.method == "tsne");
  REQUIRE(static_cast<int>(res.kl_trace.size()) == opts.iterations);
  CHECK(silhouette(res.embedding, data.labels) > 0.9);
  // KL at the end is far below KL at the start.
  CHECK(res.kl_trace.back() < 0.5 * res.kl_trace.front());
  for (double kl : res.kl_trace) CHECK(std::isfinite(kl));

  // Determinism in the seed.
  TsneResult again = tsne_embed(data, opts);
  CHECK(again.embedding.coords == res.embedding.coords);
}

TEST_CASE("t-SNE option validation") {
  LabeledSpectra data = gaussian_clusters(3, 4, 3, 2.0, 0.4);
  TsneOptions opts;
  opts.perplexity = 100.0;  // needs n > 3 * perplexity
  CHECK_THROWS_AS(tsne_embed(data, opts), Error);
  opts.perplexity = 2.0;
  opts.iterations = 0;
  CHECK_THROWS_AS(tsne_embed(data, opts), Error);
  LabeledSpectra tiny;
  tiny.n = 1;
  tiny.dims = 2;
  tiny.data = {0, 0};
  tiny.labels = {0};
  CHECK_THROWS_AS(tiny.validate(), Error);
}

TEST_CASE("separability_report picks the stronger modality") {
  // Tight, well-separated "hsi" embedding vs a shuffled "rgb" one.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.1);
  Embedding hsi, rgb;
  std::vector<int> labels;
  hsi.n = rgb.n = 40;
  for (int i = 0; i < 40; ++i) {
    const int k = i % 2;
    labels.push_back(k);
    hsi.coords.push_back(10.0 * k + g(rng));
    hsi.coords.push_back(g(rng));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    rgb.coords.push_back(u(rng));
    rgb.coords.push_back(u(rng));
  }
  SeparabilityReport rep = separability_report(hsi, rgb, labels);
  CHECK(rep.winner == "hsi");
  CHECK(rep.hsi_silhouette > rep.rgb_silhouette);
  REQUIRE(rep.class_ids.size() == 2);
  REQUIRE(rep.hsi_centroid_dist.size() == 4);
  CHECK(rep.hsi_centroid_dist[0] == 0.0);
  CHECK(rep.hsi_centroid_dist[1] == doctest::Approx(rep.hsi_centroid_dist[2]).epsilon(1e-12));
  CHECK(rep.hsi_centroid_dist[1] > 9.0);
  CHECK(rep.text().find("hsi") != std::string::npos);

  SeparabilityReport tie = separability_report(hsi, hsi, labels);
  CHECK(tie.winner == "tie");
}

TEST_CASE("sample_pixels draws a deterministic stratified sample") {
  TempDir dir("hd_sample_pixels_test");
  dataset::Ontology ontology = dataset::Ontology::default_atlas();
  const int base = ontology.entries().front().index;
  const int dirt = *ontology.find("landscape_path", "dirt");
  std::mt19937_64 rng(3);
  {
    dataset::DatasetWriter writer(dir.str(), ontology, "");
    for (int s = 0; s < 3; ++s) {
      dataset::SampleRecord rec;
      rec.id = "s" + std::to_string(s);
      rec.timestamp_ns = s;
      rec.cube = cube::DataCube(6, 6, 4);
      for (int i = 0; i < 4; ++i) {
        rec.cube.wavelengths_nm[i] = 700 + 100 * i;
        rec.cube.fwhm_nm[i] = 12;
      }
      std::uniform_real_distribution<double> u(0, 1);
      for (double& v : rec.cube.data) v = u(rng);
      rec.rgb = {6, 6, std::vector<double>(108)};
      for (double& v : rec.rgb.v) v = u(rng);
      rec.mask = {6, 6, std::vector<std::int32_t>(36, base)};
      // 5 dirt pixels per sample -> 15 total, below a 20-per-class request.
      for (int i = 0; i < 5; ++i) rec.mask.v[i] = dirt;
      rec.visnir.wavelengths_nm = {500, 800, 1100};
      rec.visnir.counts = {1, 1, 1};
      rec.visnir.integration_time_us = 1;
      rec.nir = rec.visnir;
      rec.tags = {"forest", "day", "summer", "clear"};
      writer.write_sample(rec);
    }
  }
  dataset::Manifest m = dataset::load_manifest(dir.str());
  PixelSample ps = sample_pixels(dir.str(), m, 20, 7);

  // Same pixels in both modalities, consistent labels and shapes.
  CHECK(ps.hsi.n == ps.rgb.n);
  CHECK(ps.hsi.labels == ps.rgb.labels);
  CHECK(ps.hsi.dims == 4);
  CHECK(ps.rgb.dims == 3);
  REQUIRE(ps.hsi.channel_names.size() == 4);
  CHECK(ps.hsi.channel_names[0] == "700nm");
  CHECK(ps.rgb.channel_names == std::vector<std::string>{"R", "G", "B"});

  // The dirt class is exhausted (15 < 20) and warned about; the background
  // class is capped at 20.
  int n_dirt = 0, n_base = 0;
  for (int l : ps.hsi.labels) (l == dirt ? n_dirt : n_base)++;
  CHECK(n_dirt == 15);
  CHECK(n_base == 20);
  REQUIRE_FALSE(ps.hsi.warnings.empty());
  bool warned = false;
  for (const auto& w : ps.hsi.warnings)
    if (w.find("dirt") != std::string::npos) warned = true;
  CHECK(warned);

  // Deterministic in the seed; different seeds draw different pixels.
  PixelSample again = sample_pixels(dir.str(), m, 20, 7);
  CHECK(again.hsi.data == ps.hsi.data);
  PixelSample other = sample_pixels(dir.str(), m, 20, 8);
  CHECK(other.hsi.data != ps.hsi.data);
}
