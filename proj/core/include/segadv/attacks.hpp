#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segadv/refmodel.hpp"
#include "segadv/synthdata.hpp"
#include "segadv/tensor.hpp"

// White-box attacks on the segmentation model: FGSM / I-FGSM (untargeted and
// least-likely targeted), the universal stationary-mask perturbation, the
// dynamic nearest-neighbour class eraser and a translation-EOT patch.
//
// All perturbations live in raw 0-255 pixel space. sign(0) is 0, every output
// is clamped to [0, 255] in addition to the epsilon ball, and targeted attacks
// fix their target map from the clean prediction once.
namespace segadv::attacks {

/// What an attack needs from the network: predictions and input gradients.
class Victim {
 public:
  virtual ~Victim() = default;
  virtual ProbabilityMap predict(const Tensor& image) const = 0;
  virtual model::LossGrad loss_input_grad(const Tensor& image, const LabelMap& target,
                                          const Tensor& pixel_weights) const = 0;
};

class ModelVictim final : public Victim {
 public:
  explicit ModelVictim(const model::ModelParams& params) : params_(params) {}
  ProbabilityMap predict(const Tensor& image) const override;
  model::LossGrad loss_input_grad(const Tensor& image, const LabelMap& target,
                                  const Tensor& pixel_weights) const override;

 private:
  const model::ModelParams& params_;
};

enum class AttackKind { Fgsm, IFgsm, Ssmm, Dnnm, Patch };

struct AttackConfig {
  AttackKind kind = AttackKind::Fgsm;
  double epsilon = 8.0;
  double alpha = 1.0;
  std::size_t iterations = 0;  // 0: use iteration_count(epsilon)
  bool targeted = false;

  static AttackConfig fgsm(double epsilon, bool least_likely = false);
  static AttackConfig ifgsm(double epsilon, bool least_likely = false);

  std::size_t resolved_iterations() const;
  /// e.g. "fgsm_eps4", "ifgsm_ll_eps2".
  std::string tag() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const AttackConfig& cfg);

struct PerturbedSample {
  synth::SegSample adversarial;  // id and ground-truth labels of the clean sample
  std::string attack_tag;
  nlohmann::json config;
  std::optional<LabelMap> target;
  double linf = 0.0;  // max |x_adv - x|
};

/// n = min(eps + 4, floor(1.25 eps)).
std::size_t iteration_count(std::int64_t epsilon);

/// Per-pixel argmin over classes; ties go to the smallest class id.
LabelMap least_likely_target(const ProbabilityMap& probs);

/// Called after every iterate with the iterate and the loss evaluated at the
/// point where the step's gradient was taken.
using IterateObserver = std::function<void(std::size_t step, const Tensor& iterate, double loss)>;

PerturbedSample fgsm(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg);
PerturbedSample ifgsm(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg,
                      const IterateObserver& observer = {});
/// Dispatches to fgsm/ifgsm by cfg.kind.
PerturbedSample run_gradient_attack(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg);

// ---------------------------------------------------------------------------
// Stationary segmentation mask: universal noise pushed toward fixed targets.

struct SsmmConfig {
  double epsilon = 0.1 * 255.0;
  double alpha = 0.01 * 255.0;
  std::size_t iterations = 60;
  double tau = 0.75;
  std::size_t train_size = 10;  // m
  std::uint64_t seed = 5;

  void validate() const;
};

void to_json(nlohmann::json& j, const SsmmConfig& cfg);
void from_json(const nlohmann::json& j, SsmmConfig& cfg);

struct UniversalPerturbation {
  Tensor noise;  // H x W x 3, |noise| <= epsilon everywhere
  double epsilon = 0.0;
  std::size_t iterations = 0;
  nlohmann::json provenance;
};

/// Ground-truth labels of one randomly drawn pool image, used as the fixed
/// target for every training image. The pool should not overlap the images
/// being attacked.
LabelMap ssmm_target(std::span<const synth::SegSample> pool, std::uint64_t seed);

UniversalPerturbation ssmm_train(const Victim& victim, std::span<const synth::SegSample> samples,
                                 std::span<const LabelMap> targets, const SsmmConfig& cfg);

/// x_adv = clamp(x + noise, 0, 255).
PerturbedSample apply_universal(const synth::SegSample& sample, const UniversalPerturbation& noise);

/// Fraction of pixels whose predicted label equals the target label.
double target_agreement(const LabelMap& predicted, const LabelMap& target);

// ---------------------------------------------------------------------------
// Dynamic nearest neighbour: erase class `hidden_class` from the prediction.

struct DnnmConfig {
  std::int32_t hidden_class = 1;
  double omega = 0.9;
  double epsilon = 0.1 * 255.0;
  double alpha = 0.01 * 255.0;
  std::size_t iterations = 60;

  void validate(std::size_t classes) const;
};

void to_json(nlohmann::json& j, const DnnmConfig& cfg);
void from_json(const nlohmann::json& j, DnnmConfig& cfg);

struct DnnmTarget {
  LabelMap target;
  Tensor weights;  // omega on pixels predicted as the hidden class, 1 - omega elsewhere
};

/// Pixels predicted as `hidden_class` take the prediction of the nearest
/// (squared Euclidean, ties to the lexicographically smallest position) pixel
/// predicted as anything else; other pixels keep their own prediction.
DnnmTarget dnnm_target(const LabelMap& predicted, std::int32_t hidden_class, double omega);

PerturbedSample dnnm_attack(const Victim& victim, const synth::SegSample& sample, const DnnmConfig& cfg,
                            const IterateObserver& observer = {});

// ---------------------------------------------------------------------------
// Patch attack, expectation over random translations.

struct PatchConfig {
  std::size_t height = 48;
  std::size_t width = 48;
  std::size_t iterations = 100;
  double step = 4.0;            // pixel units per sign step
  std::size_t placements = 8;   // random (sample, offset) draws per iteration
  std::uint64_t seed = 3;

  void validate(std::size_t image_height, std::size_t image_width) const;
};

void to_json(nlohmann::json& j, const PatchConfig& cfg);
void from_json(const nlohmann::json& j, PatchConfig& cfg);

struct AdversarialPatch {
  Tensor pixels;  // ph x pw x 3, in [0, 255]
  nlohmann::json provenance;
};

AdversarialPatch patch_attack(const Victim& victim, std::span<const synth::SegSample> samples,
                              const PatchConfig& cfg);

PerturbedSample apply_patch(const synth::SegSample& sample, const AdversarialPatch& patch, std::size_t top,
                            std::size_t left);
/// Placement drawn from a per-sample stream derived from `seed` and the sample id.
PerturbedSample apply_patch_random(const synth::SegSample& sample, const AdversarialPatch& patch,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------

/// max |a - b| computed exactly in double precision.
double linf_distance(const Tensor& a, const Tensor& b);

}  // namespace segadv::attacks
