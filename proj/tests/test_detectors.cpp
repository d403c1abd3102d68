#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "segadv/detectors.hpp"
#include "segadv/errors.hpp"
#include "segadv/random.hpp"

using namespace segadv;
using namespace segadv::detect;

namespace {

// Rows shaped like real features: (E, V, M, P0..P3), Gaussian around `center`.
FeatureRows gaussian_rows(std::size_t n, Rng& rng, double center = 0.0, double spread = 1.0) {
  FeatureRows rows(n, std::vector<double>(7));
  for (auto& r : rows)
    for (auto& v : r) v = center + spread * rng.normal();
  return rows;
}

std::vector<double> column_means(const FeatureRows& rows) {
  std::vector<double> m(rows.front().size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.size(); ++k) m[k] += r[k] / static_cast<double>(rows.size());
  return m;
}

std::vector<double> column_stds(const FeatureRows& rows) {
  const auto m = column_means(rows);
  std::vector<double> s(m.size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.size(); ++k) s[k] += (r[k] - m[k]) * (r[k] - m[k]) / static_cast<double>(rows.size());
  for (auto& v : s) v = std::sqrt(v);
  return s;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::vector<double> entropy_row(double e) { return {e, 0.1, 0.2, 0.25, 0.25, 0.25, 0.25}; }

}  // namespace

TEST_SUITE("detectors") {

TEST_CASE("standardizer: zero mean, unit std, constant columns dropped") {
  Rng rng(1);
  FeatureRows rows = gaussian_rows(50, rng, 3.0, 2.0);
  for (auto& r : rows) r[4] = 0.25;
  const Standardizer s = Standardizer::fit(rows);
  CHECK(s.dropped() == std::vector<std::size_t>{4});
  const FeatureRows z = s.transform(rows);
  REQUIRE(z.front().size() == 6);
  const auto m = column_means(z), sd = column_stds(z);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(std::fabs(m[k]) <= 1e-10);
    CHECK(std::fabs(sd[k] - 1.0) <= 1e-10);
  }
  CHECK_THROWS_AS(s.transform(std::vector<double>(5, 0.0)), InputError);
}

TEST_CASE("entropy detector: p = 1 - E / ln C") {
  const DetectorModel m = train_entropy({entropy_row(0.2), entropy_row(0.3)});
  const double lnc = std::log(4.0);
  CHECK(score(m, entropy_row(lnc)) == doctest::Approx(0.0));
  CHECK(score(m, entropy_row(0.0)) == 1.0);
  CHECK(score(m, entropy_row(0.5 * lnc)) == doctest::Approx(0.5));
  CHECK(score(m, entropy_row(2.0 * lnc)) == 0.0);
  double last = 1.0;
  for (double e = 0.0; e <= lnc; e += 0.05) {
    const double p = score(m, entropy_row(e));
    CHECK(p <= last);
    last = p;
  }
  CHECK_THROWS_AS(train_entropy({entropy_row(0.1)}), InputError);
}

TEST_CASE("lasso: huge lambda shrinks every weight to zero") {
  Rng rng(2);
  const FeatureRows clean = gaussian_rows(40, rng, 0.0), adv = gaussian_rows(30, rng, 1.0);
  LassoParams params;
  params.lambda = 1e6;
  const DetectorModel m = train_lasso(clean, adv, params);
  for (double w : m.weights) CHECK(w == 0.0);
  const double p0 = score(m, clean[0]);
  CHECK(p0 == doctest::Approx(sigmoid(m.bias)).epsilon(1e-12));
  for (const auto& r : adv) CHECK(score(m, r) == p0);
}

TEST_CASE("lasso: separable data is classified perfectly at kappa 0.5") {
  Rng rng(3);
  FeatureRows clean, adv;
  for (int k = 0; k < 60; ++k) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    auto row = std::vector<double>{a, b, 0.3, 0.3, 0.3, 0.3, 0.3};
    if (a + b > 0.2) {
      clean.push_back(row);
    } else if (a + b < -0.2) {
      adv.push_back(row);
    }
  }
  const DetectorModel m = train_lasso(clean, adv);
  for (const auto& r : clean) CHECK(classify(score(m, r), 0.5) == Verdict::Clean);
  for (const auto& r : adv) CHECK(classify(score(m, r), 0.5) == Verdict::Perturbed);
}

TEST_CASE("lasso: duplicated column splits the weight") {
  Rng rng(4);
  FeatureRows clean, adv, clean_dup, adv_dup;
  for (int k = 0; k < 80; ++k) {
    const bool is_clean = k % 2 == 0;
    const double a = rng.normal() + (is_clean ? 0.8 : -0.8), b = rng.normal() + (is_clean ? 0.4 : -0.4);
    (is_clean ? clean : adv).push_back({a, b, 0.5, 0.5, 0.5, 0.5, 0.5});
    (is_clean ? clean_dup : adv_dup).push_back({a, b, b, 0.5, 0.5, 0.5, 0.5});
  }
  const DetectorModel single = train_lasso(clean, adv), dup = train_lasso(clean_dup, adv_dup);
  REQUIRE(single.weights.size() == 2);
  REQUIRE(dup.weights.size() == 3);
  CHECK(std::fabs(dup.weights[0] - single.weights[0]) < 1e-4);
  CHECK(std::fabs(dup.weights[1] + dup.weights[2] - single.weights[1]) < 1e-4);
  CHECK(std::fabs(dup.bias - single.bias) < 1e-4);
}

TEST_CASE("lasso: lambda 0 reaches a stationary point of the logistic loss") {
  Rng rng(5);
  const FeatureRows clean = gaussian_rows(60, rng, 0.3), adv = gaussian_rows(60, rng, -0.3);
  LassoParams params;
  params.lambda = 0.0;
  const DetectorModel m = train_lasso(clean, adv, params);
  std::vector<double> grad(m.weights.size() + 1, 0.0);
  const double n = 120.0;
  auto accumulate = [&](const FeatureRows& rows, double label) {
    for (const auto& r : rows) {
      const auto z = m.standardizer.transform(r);
      double t = m.bias;
      for (std::size_t k = 0; k < z.size(); ++k) t += m.weights[k] * z[k];
      const double res = sigmoid(t) - label;
      for (std::size_t k = 0; k < z.size(); ++k) grad[k] += res * z[k] / n;
      grad.back() += res / n;
    }
  };
  accumulate(clean, 1.0);
  accumulate(adv, 0.0);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("lasso: iteration cap raises a training error") {
  Rng rng(6);
  const FeatureRows clean = gaussian_rows(30, rng, 0.3), adv = gaussian_rows(30, rng, -0.3);
  LassoParams params;
  params.max_iterations = 3;
  params.lambda = 0.0;
  try {
    train_lasso(clean, adv, params);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
  CHECK_THROWS_AS(train_lasso(clean, {}, {}), InputError);
}

TEST_CASE("ocsvm: feasibility, inliers and outliers") {
  Rng rng(7);
  const FeatureRows clean = gaussian_rows(200, rng);
  const DetectorModel m = train_ocsvm(clean);
  const double cap = 1.0 / (0.1 * 200.0);
  double sum = 0.0;
  for (double a : m.alpha) {
    CHECK(a > 0.0);
    CHECK(a <= cap + 1e-12);
    sum += a;
  }
  CHECK(std::fabs(sum - 1.0) <= 1e-6);

  const auto mean = column_means(clean), sd = column_stds(clean);
  CHECK(score(m, mean) >= 0.5);
  std::vector<double> far(7);
  for (std::size_t k = 0; k < 7; ++k) far[k] = mean[k] + 10.0 * sd[k];
  CHECK(score(m, far) <= 0.05);
  for (const auto& r : clean) {
    const double p = score(m, r);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK_THROWS_AS(train_ocsvm(gaussian_rows(5, rng)), InputError);
}

TEST_CASE("ellipse: center, far point, closed-form 2-D oracle") {
  Rng rng(8);
  FeatureRows clean;
  for (int k = 0; k < 300; ++k) {
    const double u = rng.normal(), v = rng.normal();
    clean.push_back({2.0 + u, -1.0 + 0.8 * u + 0.6 * v, 0.5, 0.5, 0.5, 0.5, 0.5});
  }
  EllipseParams params;
  params.shrinkage = 0.0;
  const DetectorModel m = train_ellipse(clean, params);
  const auto mean = column_means(clean);
  CHECK(raw_score(m, mean) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score(m, mean) == 1.0);
  CHECK(score(m, std::vector<double>{50.0, 50.0, 0.5, 0.5, 0.5, 0.5, 0.5}) == 0.0);

  // Covariance of the raw columns and its explicit 2x2 inverse.
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& r : clean) {
    sxx += (r[0] - mean[0]) * (r[0] - mean[0]) / 300.0;
    sxy += (r[0] - mean[0]) * (r[1] - mean[1]) / 300.0;
    syy += (r[1] - mean[1]) * (r[1] - mean[1]) / 300.0;
  }
  const double det = sxx * syy - sxy * sxy;
  for (const auto& q : {std::pair{3.0, 0.0}, std::pair{0.5, -2.0}, std::pair{2.0, 1.5}}) {
    const double dx = q.first - mean[0], dy = q.second - mean[1];
    const double oracle = std::sqrt((syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det);
    CHECK(std::fabs(raw_score(m, std::vector<double>{q.first, q.second, 0.5, 0.5, 0.5, 0.5, 0.5}) - oracle) <= 1e-8);
  }
}

TEST_CASE("ellipse: 10-std outlier and held-out clean points") {
  Rng rng(9);
  const FeatureRows clean = gaussian_rows(200, rng), held = gaussian_rows(100, rng);
  const DetectorModel m = train_ellipse(clean);
  const auto mean = column_means(clean), sd = column_stds(clean);
  std::vector<double> far(7);
  for (std::size_t k = 0; k < 7; ++k) far[k] = mean[k] + 10.0 * sd[k];
  CHECK(score(m, far) <= 0.05);
  std::vector<double> ps;
  for (const auto& r : held) ps.push_back(score(m, r));
  std::sort(ps.begin(), ps.end());
  CHECK(0.5 * (ps[49] + ps[50]) >= 0.4);
}

TEST_CASE("training-order invariance") {
  Rng rng(10);
  FeatureRows clean = gaussian_rows(80, rng, 0.2), adv = gaussian_rows(60, rng, -0.4);
  const FeatureRows queries = gaussian_rows(10, rng);
  const DetectorModel lasso = train_lasso(clean, adv), ellipse = train_ellipse(clean), ocsvm = train_ocsvm(clean);
  FeatureRows c2 = clean, a2 = adv;
  std::reverse(c2.begin(), c2.end());
  rng.shuffle(a2);
  const DetectorModel lasso2 = train_lasso(c2, a2), ellipse2 = train_ellipse(c2), ocsvm2 = train_ocsvm(c2);
  for (const auto& q : queries) {
    CHECK(std::fabs(score(lasso, q) - score(lasso2, q)) <= 1e-4);
    CHECK(std::fabs(score(ellipse, q) - score(ellipse2, q)) <= 1e-4);
    CHECK(std::fabs(score(ocsvm, q) - score(ocsvm2, q)) <= 1e-3);
  }
}

TEST_CASE("serialization round trip reproduces scores exactly") {
  Rng rng(11);
  const FeatureRows clean = gaussian_rows(60, rng, 0.2), adv = gaussian_rows(40, rng, -0.4);
  const FeatureRows queries = gaussian_rows(20, rng);
  segadv::testing::TempDir dir("det");
  for (auto kind : {DetectorKind::Entropy, DetectorKind::Lasso, DetectorKind::Ocsvm, DetectorKind::Ellipse}) {
    DetectorSpec spec;
    spec.kind = kind;
    const DetectorModel m = train(spec, clean, adv);
    const auto path = dir.path() / (to_string(kind) + ".json");
    save_detector(path, m);
    const DetectorModel back = load_detector(path);
    for (const auto& q : queries) {
      CHECK(score(back, q) == score(m, q));
      CHECK(score(m, q) == score(m, q));
    }
    CHECK_THROWS_AS(score(m, std::vector<double>(6, 0.0)), InputError);
  }
  CHECK(detector_kind_from_string("ocsvm") == DetectorKind::Ocsvm);
  CHECK_THROWS_AS(detector_kind_from_string("svm"), ConfigError);
}

TEST_CASE("classify boundary convention") {
  CHECK(classify(0.5, 0.5) == Verdict::Clean);
  CHECK(classify(0.0, 0.0) == Verdict::Clean);
  CHECK(classify(0.3, 0.5) == Verdict::Perturbed);
  CHECK(classify(1.0, 1.0) == Verdict::Clean);
  CHECK(classify(std::nextafter(0.5, 0.0), 0.5) == Verdict::Perturbed);
}

}  // TEST_SUITE
