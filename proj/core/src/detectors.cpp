#include "segadv/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "segadv/errors.hpp"
#include "segadv/json_io.hpp"

namespace segadv::detect {

namespace {

void check_rows(const FeatureRows& rows, const std::string& what) {
  if (rows.empty()) throw InputError(what + " features are empty");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != d) throw InputError(what + " feature rows differ in length");
    for (double v : r) {
      if (!std::isfinite(v)) throw InputError(what + " features contain a non-finite value");
    }
  }
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

double median_pairwise_squared_distance(const FeatureRows& rows) {
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(squared_distance(rows[i], rows[j]));
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

// Largest eigenvalue of the symmetric PSD matrix g (n x n, row-major).
double power_iteration(const std::vector<double>& g, std::size_t n) {
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), w(n);
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    const bool done = std::fabs(norm - lambda) <= 1e-13 * norm;
    lambda = norm;
    if (done) break;
  }
  return lambda;
}

DetectorModel base_model(DetectorKind kind, const FeatureRows& clean) {
  DetectorModel m;
  m.kind = kind;
  m.spec.kind = kind;
  m.feature_count = clean.front().size();
  if (m.feature_count < 4) throw InputError("feature vectors need at least one class probability");
  return m;
}

double ocsvm_decision(const DetectorModel& m, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.support.size(); ++i) s += m.alpha[i] * std::exp(-m.gamma * squared_distance(m.support[i], z));
  return s - m.rho;
}

double mahalanobis(const DetectorModel& m, std::span<const double> z) {
  const std::size_t d = m.center.size();
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += m.precision[i * d + j] * (z[j] - m.center[j]);
    q += (z[i] - m.center[i]) * row;
  }
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const FeatureRows& rows) {
  check_rows(rows, "standardizer");
  const std::size_t d = rows.front().size();
  const double n = static_cast<double>(rows.size());
  Standardizer s;
  s.input_size = d;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[k];
    mean /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[k] - mean) * (r[k] - mean);
    const double sd = std::sqrt(var / n);
    if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) continue;
    s.mean.push_back(mean);
    s.scale.push_back(sd);
    s.kept.push_back(k);
  }
  return s;
}

std::vector<double> Standardizer::transform(std::span<const double> raw) const {
  if (raw.size() != input_size) {
    throw InputError("feature vector has " + std::to_string(raw.size()) + " entries, expected " +
                     std::to_string(input_size));
  }
  std::vector<double> z(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) z[k] = (raw[kept[k]] - mean[k]) / scale[k];
  return z;
}

FeatureRows Standardizer::transform(const FeatureRows& rows) const {
  FeatureRows out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(transform(r));
  return out;
}

std::vector<std::size_t> Standardizer::dropped() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0, next = 0; k < input_size; ++k) {
    if (next < kept.size() && kept[next] == k) {
      ++next;
    } else {
      out.push_back(k);
    }
  }
  return out;
}

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Entropy:
      return "entropy";
    case DetectorKind::Lasso:
      return "lasso";
    case DetectorKind::Ocsvm:
      return "ocsvm";
    case DetectorKind::Ellipse:
      return "ellipse";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(const std::string& name) {
  if (name == "entropy") return DetectorKind::Entropy;
  if (name == "lasso") return DetectorKind::Lasso;
  if (name == "ocsvm") return DetectorKind::Ocsvm;
  if (name == "ellipse") return DetectorKind::Ellipse;
  throw ConfigError("unknown detector kind '" + name + "'");
}

void to_json(nlohmann::json& j, const DetectorSpec& spec) {
  j = {{"kind", to_string(spec.kind)}};
  switch (spec.kind) {
    case DetectorKind::Entropy:
      break;
    case DetectorKind::Lasso:
      j["lambda"] = spec.lasso.lambda;
      j["max_iterations"] = spec.lasso.max_iterations;
      j["tolerance"] = spec.lasso.tolerance;
      break;
    case DetectorKind::Ocsvm:
      j["nu"] = spec.ocsvm.nu;
      j["gamma"] = spec.ocsvm.gamma;
      j["tolerance"] = spec.ocsvm.tolerance;
      j["max_iterations"] = spec.ocsvm.max_iterations;
      break;
    case DetectorKind::Ellipse:
      j["shrinkage"] = spec.ellipse.shrinkage;
      break;
  }
}

void from_json(const nlohmann::json& j, DetectorSpec& spec) {
  spec = DetectorSpec{};
  spec.kind = detector_kind_from_string(j.at("kind").get<std::string>());
  spec.lasso.lambda = j.value("lambda", spec.lasso.lambda);
  spec.ocsvm.nu = j.value("nu", spec.ocsvm.nu);
  spec.ocsvm.gamma = j.value("gamma", spec.ocsvm.gamma);
  spec.ellipse.shrinkage = j.value("shrinkage", spec.ellipse.shrinkage);
  if (spec.kind == DetectorKind::Lasso) {
    spec.lasso.max_iterations = j.value("max_iterations", spec.lasso.max_iterations);
    spec.lasso.tolerance = j.value("tolerance", spec.lasso.tolerance);
  } else if (spec.kind == DetectorKind::Ocsvm) {
    spec.ocsvm.max_iterations = j.value("max_iterations", spec.ocsvm.max_iterations);
    spec.ocsvm.tolerance = j.value("tolerance", spec.ocsvm.tolerance);
  }
  if (spec.lasso.lambda < 0.0) throw ConfigError("lasso lambda must be >= 0");
  if (!(spec.ocsvm.nu > 0.0 && spec.ocsvm.nu < 1.0)) throw ConfigError("ocsvm nu must lie in (0, 1)");
  if (spec.ellipse.shrinkage < 0.0) throw ConfigError("ellipse shrinkage must be >= 0");
}

// ---------------------------------------------------------------------------

DetectorModel train_entropy(const FeatureRows& clean) {
  check_rows(clean, "clean");
  if (clean.size() < 2) throw InputError("entropy detector needs at least 2 clean feature vectors");
  DetectorModel m = base_model(DetectorKind::Entropy, clean);
  m.standardizer = Standardizer::fit(clean);
  return m;
}

DetectorModel train_lasso(const FeatureRows& clean, const FeatureRows& adversarial, const LassoParams& params) {
  check_rows(clean, "clean");
  check_rows(adversarial, "adversarial");
  if (clean.front().size() != adversarial.front().size()) throw InputError("clean and adversarial features differ in length");
  if (params.lambda < 0.0) throw ConfigError("lasso lambda must be >= 0");

  DetectorModel m = base_model(DetectorKind::Lasso, clean);
  m.spec.lasso = params;
  m.standardizer = Standardizer::fit(clean);

  FeatureRows z = m.standardizer.transform(clean);
  std::vector<double> y(z.size(), 1.0);
  for (const auto& r : adversarial) {
    z.push_back(m.standardizer.transform(r));
    y.push_back(0.0);
  }
  const std::size_t n = z.size();
  const std::size_t d = m.standardizer.kept.size();

  // Lipschitz constant of the mean logistic loss gradient over [Z, 1].
  const std::size_t p = d + 1;
  std::vector<double> gram(p * p, 0.0);
  for (const auto& r : z) {
    for (std::size_t a = 0; a < p; ++a) {
      const double xa = a < d ? r[a] : 1.0;
      for (std::size_t b = 0; b < p; ++b) gram[a * p + b] += xa * (b < d ? r[b] : 1.0);
    }
  }
  const double lipschitz = power_iteration(gram, p) / (4.0 * static_cast<double>(n));
  const double step = 1.0 / lipschitz;

  // Accelerated proximal gradient (FISTA) with gradient-based restart. theta
  // holds the weights followed by the unpenalized bias.
  std::vector<double> theta(p, 0.0), look(p, 0.0), next(p), grad(p);
  double momentum = 1.0;
  std::size_t it = 0;
  for (;;) {
    if (it == params.max_iterations) {
      throw TrainingError("lasso did not converge within " + std::to_string(it) + " iterations");
    }
    ++it;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double t = look[d];
      for (std::size_t k = 0; k < d; ++k) t += look[k] * z[i][k];
      const double r = sigmoid(t) - y[i];
      for (std::size_t k = 0; k < d; ++k) grad[k] += r * z[i][k];
      grad[d] += r;
    }
    for (std::size_t k = 0; k < p; ++k) {
      const double v = look[k] - step * grad[k] / static_cast<double>(n);
      next[k] = k < d ? soft_threshold(v, params.lambda * step) : v;
    }
    double change = 0.0, restart = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      change = std::max(change, std::fabs(next[k] - theta[k]));
      restart += (look[k] - next[k]) * (next[k] - theta[k]);
    }
    const double following = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if (restart > 0.0) {
      momentum = 1.0;
      look = next;
    } else {
      const double beta = (momentum - 1.0) / following;
      for (std::size_t k = 0; k < p; ++k) look[k] = next[k] + beta * (next[k] - theta[k]);
      momentum = following;
    }
    theta.swap(next);
    if (change < params.tolerance) break;
  }
  std::vector<double> w(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  const double b = theta[d];
  m.weights = std::move(w);
  m.bias = b;
  m.iterations = it;
  return m;
}

DetectorModel train_ocsvm(const FeatureRows& clean, const OcsvmParams& params) {
  check_rows(clean, "clean");
  if (clean.size() < 10) throw InputError("ocsvm needs at least 10 clean feature vectors");
  if (!(params.nu > 0.0 && params.nu < 1.0)) throw ConfigError("ocsvm nu must lie in (0, 1)");

  DetectorModel m = base_model(DetectorKind::Ocsvm, clean);
  m.spec.ocsvm = params;
  m.standardizer = Standardizer::fit(clean);
  const FeatureRows z = m.standardizer.transform(clean);
  const std::size_t n = z.size();
  const double d = static_cast<double>(m.standardizer.kept.size());

  if (params.gamma > 0.0) {
    m.gamma = params.gamma;
  } else {
    const double med = median_pairwise_squared_distance(z);
    if (!(med > 0.0) || d == 0.0) throw TrainingError("ocsvm median heuristic needs distinct training points");
    m.gamma = 1.0 / (d * med);
  }

  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) q[i * n + j] = q[j * n + i] = std::exp(-m.gamma * squared_distance(z[i], z[j]));
  }

  // Dual: min 1/2 a'Qa subject to 0 <= a_i <= c and sum a = 1.
  const double c = 1.0 / (params.nu * static_cast<double>(n));
  std::vector<double> a(n, 0.0);
  double remaining = 1.0;
  for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
    a[i] = std::min(c, remaining);
    remaining -= a[i];
  }
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) g[k] += a[i] * q[k * n + i];
  }

  std::size_t it = 0;
  for (;; ++it) {
    // Maximal violating pair: i may grow (a_i < c) with the smallest gradient,
    // j may shrink (a_j > 0) with the largest.
    std::size_t up = n, low = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (a[k] < c && (up == n || g[k] < g[up])) up = k;
      if (a[k] > 0.0 && (low == n || g[k] > g[low])) low = k;
    }
    if (up == n || low == n || g[low] - g[up] < params.tolerance) break;
    if (it == params.max_iterations) {
      throw TrainingError("ocsvm did not reach the KKT tolerance within " + std::to_string(it) + " iterations");
    }
    const double curvature = std::max(q[up * n + up] + q[low * n + low] - 2.0 * q[up * n + low], 1e-12);
    double delta = (g[low] - g[up]) / curvature;
    delta = std::min({delta, c - a[up], a[low]});
    a[up] += delta;
    a[low] -= delta;
    if (c - a[up] < 1e-15 * c) a[up] = c;
    if (a[low] < 1e-15 * c) a[low] = 0.0;
    for (std::size_t k = 0; k < n; ++k) g[k] += delta * (q[k * n + up] - q[k * n + low]);
  }

  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lower = -INFINITY, upper = INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    if (a[k] > 0.0 && a[k] < c) {
      free_sum += g[k];
      ++free_count;
    } else if (a[k] >= c) {
      lower = std::max(lower, g[k]);
    } else {
      upper = std::min(upper, g[k]);
    }
  }
  if (free_count > 0) {
    m.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    m.rho = 0.5 * (lower + upper);
  } else {
    m.rho = std::isfinite(lower) ? lower : upper;
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (a[k] > 0.0) {
      m.support.push_back(z[k]);
      m.alpha.push_back(a[k]);
    }
  }
  m.iterations = it;
  m.calibration.reserve(n);
  for (const auto& r : z) m.calibration.push_back(ocsvm_decision(m, r));
  std::sort(m.calibration.begin(), m.calibration.end());
  return m;
}

DetectorModel train_ellipse(const FeatureRows& clean, const EllipseParams& params) {
  check_rows(clean, "clean");
  if (params.shrinkage < 0.0) throw ConfigError("ellipse shrinkage must be >= 0");
  DetectorModel m = base_model(DetectorKind::Ellipse, clean);
  m.spec.ellipse = params;
  m.standardizer = Standardizer::fit(clean);
  const FeatureRows z = m.standardizer.transform(clean);
  const std::size_t d = m.standardizer.kept.size();
  if (d == 0) throw TrainingError("ellipse: every feature is constant on the training set");
  if (z.size() < d + 2) {
    throw InputError("ellipse needs at least " + std::to_string(d + 2) + " clean feature vectors, got " +
                     std::to_string(z.size()));
  }

  const double n = static_cast<double>(z.size());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (const auto& r : z) mu += Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(d));
  mu /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& r : z) {
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(d)) - mu;
    cov.noalias() += e * e.transpose();
  }
  cov /= n;
  cov.diagonal().array() += params.shrinkage * cov.trace() / static_cast<double>(d);

  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw TrainingError("ellipse covariance is singular after shrinkage");
  const Eigen::MatrixXd precision =
      llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));

  m.center.assign(mu.data(), mu.data() + d);
  m.precision.resize(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      // Symmetrize so the stored matrix is exactly symmetric.
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      m.precision[i * d + j] = 0.5 * (precision(ii, jj) + precision(jj, ii));
    }
  }
  m.calibration.reserve(z.size());
  for (const auto& r : z) m.calibration.push_back(mahalanobis(m, r));
  std::sort(m.calibration.begin(), m.calibration.end());
  return m;
}

DetectorModel train(const DetectorSpec& spec, const FeatureRows& clean, const FeatureRows& adversarial) {
  DetectorModel m;
  switch (spec.kind) {
    case DetectorKind::Entropy:
      m = train_entropy(clean);
      break;
    case DetectorKind::Lasso:
      m = train_lasso(clean, adversarial, spec.lasso);
      break;
    case DetectorKind::Ocsvm:
      m = train_ocsvm(clean, spec.ocsvm);
      break;
    case DetectorKind::Ellipse:
      m = train_ellipse(clean, spec.ellipse);
      break;
  }
  m.spec = spec;
  return m;
}

// ---------------------------------------------------------------------------

double raw_score(const DetectorModel& model, std::span<const double> features) {
  if (features.size() != model.feature_count) {
    throw InputError("detector expects " + std::to_string(model.feature_count) + " features, got " +
                     std::to_string(features.size()));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw InputError("feature vector contains a non-finite value");
  }
  switch (model.kind) {
    case DetectorKind::Entropy:
      return features[0];
    case DetectorKind::Lasso: {
      const auto z = model.standardizer.transform(features);
      double t = model.bias;
      for (std::size_t k = 0; k < z.size(); ++k) t += model.weights[k] * z[k];
      return t;
    }
    case DetectorKind::Ocsvm:
      return ocsvm_decision(model, model.standardizer.transform(features));
    case DetectorKind::Ellipse:
      return mahalanobis(model, model.standardizer.transform(features));
  }
  throw InternalError("unhandled detector kind");
}

double score(const DetectorModel& model, std::span<const double> features) {
  const double raw = raw_score(model, features);
  const auto& cal = model.calibration;
  switch (model.kind) {
    case DetectorKind::Entropy:
      return std::clamp(1.0 - raw / std::log(static_cast<double>(model.classes())), 0.0, 1.0);
    case DetectorKind::Lasso:
      return sigmoid(raw);
    case DetectorKind::Ocsvm: {
      const auto below = std::upper_bound(cal.begin(), cal.end(), raw) - cal.begin();
      return static_cast<double>(below) / static_cast<double>(cal.size());
    }
    case DetectorKind::Ellipse: {
      const auto at_least = cal.end() - std::lower_bound(cal.begin(), cal.end(), raw);
      return static_cast<double>(at_least) / static_cast<double>(cal.size());
    }
  }
  throw InternalError("unhandled detector kind");
}

// ---------------------------------------------------------------------------

namespace {

std::string hex1(double v) { return io::encode_hex(std::span<const double>(&v, 1)); }

double unhex1(const nlohmann::json& j) {
  const auto v = io::decode_hex(j.get<std::string>());
  if (v.size() != 1) throw InputError("expected one encoded number");
  return v.front();
}

std::vector<double> unhex(const nlohmann::json& j, std::size_t expected, const char* what) {
  auto v = io::decode_hex(j.get<std::string>());
  if (v.size() != expected) {
    throw InputError(std::string("detector field '") + what + "' has " + std::to_string(v.size()) +
                     " values, expected " + std::to_string(expected));
  }
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const DetectorModel& model) {
  const auto& s = model.standardizer;
  j = {{"kind", to_string(model.kind)},
       {"spec", model.spec},
       {"feature_count", model.feature_count},
       {"standardizer",
        {{"input_size", s.input_size}, {"kept", s.kept}, {"mean", io::encode_hex(s.mean)}, {"scale", io::encode_hex(s.scale)}}}};
  switch (model.kind) {
    case DetectorKind::Entropy:
      break;
    case DetectorKind::Lasso:
      j["weights"] = io::encode_hex(model.weights);
      j["bias"] = hex1(model.bias);
      j["iterations"] = model.iterations;
      break;
    case DetectorKind::Ocsvm: {
      std::vector<double> flat;
      for (const auto& r : model.support) flat.insert(flat.end(), r.begin(), r.end());
      j["support_count"] = model.support.size();
      j["support"] = io::encode_hex(flat);
      j["alpha"] = io::encode_hex(model.alpha);
      j["rho"] = hex1(model.rho);
      j["gamma"] = hex1(model.gamma);
      j["iterations"] = model.iterations;
      j["calibration"] = io::encode_hex(model.calibration);
      break;
    }
    case DetectorKind::Ellipse:
      j["center"] = io::encode_hex(model.center);
      j["precision"] = io::encode_hex(model.precision);
      j["calibration"] = io::encode_hex(model.calibration);
      break;
  }
}

void from_json(const nlohmann::json& j, DetectorModel& model) {
  try {
    model = DetectorModel{};
    model.kind = detector_kind_from_string(j.at("kind").get<std::string>());
    model.spec = j.at("spec").get<DetectorSpec>();
    model.feature_count = j.at("feature_count").get<std::size_t>();
    auto& s = model.standardizer;
    const auto& js = j.at("standardizer");
    s.input_size = js.at("input_size").get<std::size_t>();
    s.kept = js.at("kept").get<std::vector<std::size_t>>();
    s.mean = unhex(js.at("mean"), s.kept.size(), "mean");
    s.scale = unhex(js.at("scale"), s.kept.size(), "scale");
    for (std::size_t k : s.kept) {
      if (k >= s.input_size) throw InputError("standardizer index out of range");
    }
    if (s.input_size != model.feature_count) throw InputError("standardizer size disagrees with feature count");
    const std::size_t d = s.kept.size();

    switch (model.kind) {
      case DetectorKind::Entropy:
        break;
      case DetectorKind::Lasso:
        model.weights = unhex(j.at("weights"), d, "weights");
        model.bias = unhex1(j.at("bias"));
        model.iterations = j.value("iterations", std::size_t{0});
        break;
      case DetectorKind::Ocsvm: {
        const auto count = j.at("support_count").get<std::size_t>();
        const auto flat = unhex(j.at("support"), count * d, "support");
        for (std::size_t i = 0; i < count; ++i) {
          model.support.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i * d),
                                     flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        }
        model.alpha = unhex(j.at("alpha"), count, "alpha");
        model.rho = unhex1(j.at("rho"));
        model.gamma = unhex1(j.at("gamma"));
        model.iterations = j.value("iterations", std::size_t{0});
        model.calibration = io::decode_hex(j.at("calibration").get<std::string>());
        break;
      }
      case DetectorKind::Ellipse:
        model.center = unhex(j.at("center"), d, "center");
        model.precision = unhex(j.at("precision"), d * d, "precision");
        model.calibration = io::decode_hex(j.at("calibration").get<std::string>());
        break;
    }
    if ((model.kind == DetectorKind::Ocsvm || model.kind == DetectorKind::Ellipse) && model.calibration.empty()) {
      throw InputError("detector calibration table is empty");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed detector JSON: ") + e.what());
  }
}

void save_detector(const std::filesystem::path& path, const DetectorModel& model) {
  io::write_json(path, nlohmann::json(model));
}

DetectorModel load_detector(const std::filesystem::path& path) { return io::read_json(path).get<DetectorModel>(); }

}  // namespace segadv::detect
