#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segadv/detectors.hpp"
#include "segadv/tensor.hpp"
#include "segadv/uncertainty.hpp"

namespace segadv::metrics {

/// Fraction of pixels whose predicted label differs from the ground truth.
double apsr(const LabelMap& predicted, const LabelMap& ground_truth);

struct ScoreSet {
  std::vector<double> clean;
  std::vector<double> perturbed;
  std::string detector;
  std::string attack;
};

inline constexpr std::size_t kKappaSteps = 40;

/// kappa_i = i / 39 for i = 0..39.
std::array<double, kKappaSteps> kappa_grid();

/// Accuracy of "perturbed iff p < kappa" over both lists.
double ada(const ScoreSet& scores, double kappa);

struct AdaResult {
  double ada = 0.0;
  double kappa = 0.0;
};

/// Best accuracy over the kappa grid; ties go to the smallest kappa.
AdaResult ada_star(const ScoreSet& scores);

/// P(clean score > perturbed score) with ties counted 1/2.
double auroc(const ScoreSet& scores);

/// Threshold: the (k+1)-th smallest clean score with k = floor(fpr_cap * n),
/// so at most k clean scores fall strictly below it. Returns the fraction of
/// perturbed scores strictly below that threshold.
double tpr_at_fpr(const ScoreSet& scores, double fpr_cap = 0.05);

/// Seeded shuffle of the sorted unique ids, split into `folds` contiguous
/// groups whose sizes differ by at most one.
std::vector<std::vector<std::string>> make_folds(std::span<const std::string> ids, std::size_t folds,
                                                 std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over the finite fold values
  std::vector<double> folds;

  static Summary of(std::vector<double> values);
};

struct DetectionRow {
  std::string detector;
  std::string attack;
  Summary ada_star;
  Summary kappa;
  Summary auroc;
  Summary tpr5;
};

struct ApsrRow {
  std::string attack;  // "clean" for unperturbed images
  double mean = 0.0;
  std::size_t images = 0;
};

struct AttackFeatures {
  std::string tag;
  std::vector<uncertainty::FeatureVector> features;
};

struct CrossValidationOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 13;
  std::string training_attack = "ifgsm_ll_eps2";
  double fpr_cap = 0.05;
};

void to_json(nlohmann::json& j, const CrossValidationOptions& opts);
void from_json(const nlohmann::json& j, CrossValidationOptions& opts);

/// Folds partition the clean image ids. Each detector is trained on the
/// clean features outside the fold (plus, for supervised kinds, the training
/// attack's features of those same images) and evaluated on the fold's clean
/// features against every attack's features of the fold's images. A metric
/// that cannot be computed on a fold (too few clean scores for the FPR cap,
/// no perturbed image of that attack in the fold) is NaN for that fold.
std::vector<DetectionRow> cross_validate(const std::vector<uncertainty::FeatureVector>& clean,
                                         const std::vector<AttackFeatures>& attacks,
                                         const std::vector<detect::DetectorSpec>& detectors,
                                         const CrossValidationOptions& opts = {});

struct EvalReport {
  std::vector<ApsrRow> apsr;
  std::vector<DetectionRow> detection;
  CrossValidationOptions options;
};

/// One APSR row per attack (clean first), then one row per detector x attack.
std::string report_csv(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);
/// Inverse of report_json; null entries read back as NaN.
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace segadv::metrics
