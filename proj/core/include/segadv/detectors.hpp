#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Image-level detectors mapping a feature vector (E, V, M, P0..P{C-1}) to
// p(x), the probability of the image being clean.
namespace segadv::detect {

using FeatureRows = std::vector<std::vector<double>>;

/// Per-feature z-scoring fitted on clean features. Features whose population
/// standard deviation is (numerically) zero are dropped.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::size_t> kept;  // indices into the raw feature vector
  std::size_t input_size = 0;

  static Standardizer fit(const FeatureRows& rows);
  std::vector<double> transform(std::span<const double> raw) const;
  FeatureRows transform(const FeatureRows& rows) const;
  std::vector<std::size_t> dropped() const;
};

enum class DetectorKind { Entropy, Lasso, Ocsvm, Ellipse };

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& name);

struct LassoParams {
  double lambda = 0.01;
  std::size_t max_iterations = 10000;
  double tolerance = 1e-8;
};

struct OcsvmParams {
  double nu = 0.1;
  double gamma = 0.0;  // <= 0: 1 / (d * median pairwise squared distance)
  double tolerance = 1e-6;
  std::size_t max_iterations = 100000;
};

struct EllipseParams {
  double shrinkage = 1e-3;
};

/// Which detector to train and with what hyperparameters.
struct DetectorSpec {
  DetectorKind kind = DetectorKind::Entropy;
  LassoParams lasso;
  OcsvmParams ocsvm;
  EllipseParams ellipse;

  bool supervised() const noexcept { return kind == DetectorKind::Lasso; }
};

void to_json(nlohmann::json& j, const DetectorSpec& spec);
void from_json(const nlohmann::json& j, DetectorSpec& spec);

struct DetectorModel {
  DetectorKind kind = DetectorKind::Entropy;
  DetectorSpec spec;
  std::size_t feature_count = 0;  // raw feature vector length, |C| + 3
  Standardizer standardizer;

  // Lasso
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t iterations = 0;

  // Ocsvm
  FeatureRows support;  // standardized training rows with alpha > 0
  std::vector<double> alpha;
  double rho = 0.0;
  double gamma = 0.0;

  // Ellipse
  std::vector<double> center;
  std::vector<double> precision;  // d x d row-major inverse of the shrunk covariance

  // Sorted raw scores of the training points, for the p(x) mapping
  // (Ocsvm: decision values, Ellipse: Mahalanobis distances).
  std::vector<double> calibration;

  std::size_t classes() const noexcept { return feature_count >= 3 ? feature_count - 3 : 0; }
};

DetectorModel train_entropy(const FeatureRows& clean);
/// Labels: clean = 1, adversarial = 0.
DetectorModel train_lasso(const FeatureRows& clean, const FeatureRows& adversarial, const LassoParams& params = {});
DetectorModel train_ocsvm(const FeatureRows& clean, const OcsvmParams& params = {});
DetectorModel train_ellipse(const FeatureRows& clean, const EllipseParams& params = {});

/// Dispatch on spec.kind; `adversarial` is only used by supervised kinds.
DetectorModel train(const DetectorSpec& spec, const FeatureRows& clean, const FeatureRows& adversarial);

/// p(x) in [0, 1]. Throws InputError on a feature-length mismatch.
double score(const DetectorModel& model, std::span<const double> features);

/// The kernel decision value (Ocsvm) or Mahalanobis distance (Ellipse) before
/// calibration; the logit for Lasso; mean entropy for Entropy.
double raw_score(const DetectorModel& model, std::span<const double> features);

enum class Verdict { Clean, Perturbed };

/// Perturbed iff p < kappa.
constexpr Verdict classify(double p, double kappa) noexcept {
  return p < kappa ? Verdict::Perturbed : Verdict::Clean;
}

void to_json(nlohmann::json& j, const DetectorModel& model);
void from_json(const nlohmann::json& j, DetectorModel& model);

void save_detector(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace segadv::detect
