#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "segadv/attacks.hpp"
#include "segadv/detectors.hpp"
#include "segadv/errors.hpp"
#include "segadv/evalmetrics.hpp"
#include "segadv/refmodel.hpp"
#include "segadv/synthdata.hpp"

// End-to-end experiment: data -> model -> attacks -> features -> detectors ->
// cross-validated report. Every stage reads its inputs from and writes its
// outputs to the output directory, so stages can be run one at a time.
namespace segadv::pipeline {

struct AttackSpec {
  attacks::AttackKind kind = attacks::AttackKind::Fgsm;
  attacks::AttackConfig gradient;  // Fgsm / IFgsm
  attacks::SsmmConfig ssmm;
  attacks::DnnmConfig dnnm;
  attacks::PatchConfig patch;

  static AttackSpec fgsm(double epsilon, bool least_likely = false);
  static AttackSpec ifgsm(double epsilon, bool least_likely = false);
  static AttackSpec of(attacks::AttackKind kind);

  /// Directory and report name, e.g. "ifgsm_ll_eps2", "ssmm".
  std::string tag() const;
};

void to_json(nlohmann::json& j, const AttackSpec& spec);
void from_json(const nlohmann::json& j, AttackSpec& spec);

struct ExperimentConfig {
  std::uint64_t seed = 2024;
  std::filesystem::path out = "segadv_out";
  synth::DatasetConfig dataset = synth::DatasetConfig::defaults();
  model::TrainConfig train;
  model::GradCheckOptions gradcheck;
  std::size_t attack_images = 0;  // first n validation images; 0 = all
  std::vector<AttackSpec> attacks;
  std::vector<detect::DetectorSpec> detectors;
  metrics::CrossValidationOptions evaluation;
  double kappa = 0.5;          // threshold used by the detect stage
  std::size_t heatmaps = 4;    // entropy heatmaps exported per attack

  /// FGSM and I-FGSM (plain and least-likely) at 4, 8, 16, I-FGSM-ll at 2,
  /// SSMM, DNNM and the patch; all four detectors.
  static ExperimentConfig defaults();

  /// Replaces every stage seed with one derived from `global`.
  void reseed(std::uint64_t global);
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

/// Defaults, then the config file, then the JSON merge patch in `overrides`
/// (inline JSON or a path to a JSON file), then seed and output directory.
ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                                const std::optional<std::string>& overrides, std::optional<std::uint64_t> seed,
                                const std::optional<std::filesystem::path>& out);

enum class Stage { GenData, TrainModel, GradCheck, Attack, ExtractFeatures, TrainDetector, Detect, Evaluate, Report };

std::string stage_name(Stage stage);
std::optional<Stage> stage_from_name(std::string_view name);
const std::vector<Stage>& all_stages();

/// A failure inside a stage; keeps the category of the underlying error.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.category(), stage_name(stage) + ": " + cause.what()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

using LogFn = std::function<void(std::string_view stage, std::string_view message)>;

/// Paths of the artifacts under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path model() const { return root / "model"; }
  std::filesystem::path gradcheck() const { return root / "gradcheck.json"; }
  std::filesystem::path attack(const std::string& tag) const { return root / "attacks" / tag; }
  std::filesystem::path features(const std::string& tag) const { return root / "features" / (tag + ".csv"); }
  std::filesystem::path apsr() const { return root / "features" / "apsr.json"; }
  std::filesystem::path heatmap(const std::string& tag, const std::string& id) const {
    return root / "heatmaps" / tag / (id + ".pgm");
  }
  std::filesystem::path detector(const std::string& kind) const { return root / "detectors" / (kind + ".json"); }
  std::filesystem::path detections(const std::string& kind) const { return root / "detections" / (kind + ".csv"); }
  std::filesystem::path evaluation() const { return root / "evaluation.json"; }
  std::filesystem::path report_csv() const { return root / "report" / "report.csv"; }
  std::filesystem::path report_json() const { return root / "report" / "summary.json"; }
  std::filesystem::path stamp(Stage stage) const { return root / "stamps" / (stage_name(stage) + ".json"); }
};

/// Runs one stage unconditionally. Errors are rethrown as StageError.
void run_stage(Stage stage, const ExperimentConfig& cfg, const LogFn& log = {});

/// Runs all stages in order. With `resume`, a stage whose stamp matches the
/// current config is skipped.
metrics::EvalReport run_all(const ExperimentConfig& cfg, bool resume = true, const LogFn& log = {});

/// The attacked validation images: the first `attack_images` of the split.
std::vector<synth::SegSample> attack_subset(const ExperimentConfig& cfg, const synth::Dataset& data);

}  // namespace segadv::pipeline
