#include "segadv/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "segadv/errors.hpp"
#include "segadv/parallel.hpp"
#include "segadv/random.hpp"

namespace segadv::attacks {
namespace {

constexpr float kPixelMax = 255.0f;

float sign_of(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Largest float f with f - x <= eps exactly (and the mirror image below x),
// intersected with the valid pixel range.
float ball_upper(float x, double eps) {
  float hi = static_cast<float>(static_cast<double>(x) + eps);
  while (static_cast<double>(hi) - static_cast<double>(x) > eps) hi = std::nextafter(hi, -std::numeric_limits<float>::infinity());
  return std::min(hi, kPixelMax);
}

float ball_lower(float x, double eps) {
  float lo = static_cast<float>(static_cast<double>(x) - eps);
  while (static_cast<double>(x) - static_cast<double>(lo) > eps) lo = std::nextafter(lo, std::numeric_limits<float>::infinity());
  return std::max(lo, 0.0f);
}

/// Projects `candidate` onto the eps-ball around `origin` and the pixel range.
void clip_to_ball(const Tensor& origin, Tensor& candidate, double eps) {
  for (std::size_t k = 0; k < candidate.size(); ++k) {
    candidate[k] = std::clamp(candidate[k], ball_lower(origin[k], eps), ball_upper(origin[k], eps));
  }
}

void check_gradient(const Tensor& g) {
  if (!g.all_finite()) throw AttackError("input gradient is not finite");
}

/// x_next = clip(x + direction * step * sign(grad)).
void sign_step(const Tensor& origin, Tensor& x, const Tensor& grad, float direction, double step, double eps) {
  const auto s = static_cast<float>(step);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += direction * s * sign_of(grad[k]);
  clip_to_ball(origin, x, eps);
}

Tensor ones_like_labels(const LabelMap& labels) { return model::uniform_weights(labels.height(), labels.width()); }

void check_sample(const synth::SegSample& s) {
  if (s.image.rank() != 3 || s.image.dim(2) != 3 || s.image.dim(0) != s.labels.height() ||
      s.image.dim(1) != s.labels.width()) {
    throw InputError("sample " + s.id + " has inconsistent image/label shapes");
  }
}

PerturbedSample make_result(const synth::SegSample& clean, Tensor adv, std::string tag, nlohmann::json cfg,
                            std::optional<LabelMap> target = std::nullopt) {
  PerturbedSample out;
  out.linf = linf_distance(clean.image, adv);
  out.adversarial = synth::SegSample{clean.id, std::move(adv), clean.labels};
  out.attack_tag = std::move(tag);
  out.config = std::move(cfg);
  out.target = std::move(target);
  return out;
}

}  // namespace

ProbabilityMap ModelVictim::predict(const Tensor& image) const { return model::predict(params_, image); }

model::LossGrad ModelVictim::loss_input_grad(const Tensor& image, const LabelMap& target,
                                             const Tensor& pixel_weights) const {
  return model::loss_input_grad(params_, image, target, pixel_weights);
}

// ---------------------------------------------------------------------------

AttackConfig AttackConfig::fgsm(double epsilon, bool least_likely) {
  AttackConfig c;
  c.kind = AttackKind::Fgsm;
  c.epsilon = epsilon;
  c.alpha = epsilon;
  c.iterations = 1;
  c.targeted = least_likely;
  return c;
}

AttackConfig AttackConfig::ifgsm(double epsilon, bool least_likely) {
  AttackConfig c;
  c.kind = AttackKind::IFgsm;
  c.epsilon = epsilon;
  c.alpha = 1.0;
  c.iterations = 0;
  c.targeted = least_likely;
  return c;
}

std::size_t AttackConfig::resolved_iterations() const {
  if (kind == AttackKind::Fgsm) return 1;
  if (iterations > 0) return iterations;
  return iteration_count(static_cast<std::int64_t>(std::llround(epsilon)));
}

std::string AttackConfig::tag() const {
  std::string base = kind == AttackKind::Fgsm ? "fgsm" : "ifgsm";
  if (targeted) base += "_ll";
  return base + "_eps" + format_number(epsilon);
}

void AttackConfig::validate() const {
  if (kind != AttackKind::Fgsm && kind != AttackKind::IFgsm) throw ConfigError("not a gradient-sign attack config");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (kind == AttackKind::IFgsm && iterations == 0 && (epsilon < 1.0 || epsilon != std::floor(epsilon))) {
    throw ConfigError("the iteration rule needs an integer epsilon >= 1; set iterations explicitly");
  }
}

void to_json(nlohmann::json& j, const AttackConfig& cfg) {
  j = nlohmann::json{{"kind", cfg.kind == AttackKind::Fgsm ? "fgsm" : "ifgsm"},
                     {"epsilon", cfg.epsilon},
                     {"alpha", cfg.kind == AttackKind::Fgsm ? cfg.epsilon : cfg.alpha},
                     {"iterations", cfg.resolved_iterations()},
                     {"targeted", cfg.targeted}};
}

std::size_t iteration_count(std::int64_t epsilon) {
  if (epsilon < 1) throw ConfigError("iteration rule needs epsilon >= 1");
  const std::int64_t by_offset = epsilon + 4;
  const std::int64_t by_scale = (5 * epsilon) / 4;  // floor(1.25 eps) for eps >= 0
  return static_cast<std::size_t>(std::min(by_offset, by_scale));
}

LabelMap least_likely_target(const ProbabilityMap& probs) {
  LabelMap out(probs.height(), probs.width());
  const std::size_t c = probs.classes();
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    auto row = probs.pixel(p);
    std::size_t best = 0;
    for (std::size_t y = 1; y < c; ++y) {
      if (row[y] < row[best]) best = y;
    }
    out[p] = static_cast<std::int32_t>(best);
  }
  return out;
}

PerturbedSample fgsm(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg) {
  check_sample(sample);
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  AttackConfig single = cfg;
  single.kind = AttackKind::Fgsm;

  std::optional<LabelMap> target;
  const LabelMap* labels = &sample.labels;
  if (cfg.targeted) {
    target = least_likely_target(victim.predict(sample.image));
    labels = &*target;
  }
  const auto lg = victim.loss_input_grad(sample.image, *labels, ones_like_labels(sample.labels));
  check_gradient(lg.grad);

  Tensor adv = sample.image;
  sign_step(sample.image, adv, lg.grad, cfg.targeted ? -1.0f : 1.0f, cfg.epsilon, cfg.epsilon);
  return make_result(sample, std::move(adv), single.tag(), single, std::move(target));
}

PerturbedSample ifgsm(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg,
                      const IterateObserver& observer) {
  check_sample(sample);
  AttackConfig c = cfg;
  c.kind = AttackKind::IFgsm;
  c.validate();
  const std::size_t steps = c.resolved_iterations();

  std::optional<LabelMap> target;
  const LabelMap* labels = &sample.labels;
  if (c.targeted) {
    target = least_likely_target(victim.predict(sample.image));
    labels = &*target;
  }
  const Tensor weights = ones_like_labels(sample.labels);
  const float direction = c.targeted ? -1.0f : 1.0f;

  Tensor x = sample.image;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto lg = victim.loss_input_grad(x, *labels, weights);
    check_gradient(lg.grad);
    sign_step(sample.image, x, lg.grad, direction, c.alpha, c.epsilon);
    if (observer) observer(t + 1, x, lg.loss);
  }
  c.iterations = steps;
  return make_result(sample, std::move(x), c.tag(), c, std::move(target));
}

PerturbedSample run_gradient_attack(const Victim& victim, const synth::SegSample& sample, const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::Fgsm:
      return fgsm(victim, sample, cfg);
    case AttackKind::IFgsm:
      return ifgsm(victim, sample, cfg);
    default:
      throw ConfigError("run_gradient_attack handles FGSM and I-FGSM only");
  }
}

// ---------------------------------------------------------------------------

void SsmmConfig::validate() const {
  if (!(epsilon > 0.0) || !(alpha > 0.0)) throw ConfigError("SSMM epsilon and alpha must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("SSMM tau must lie in (0, 1)");
  if (train_size < 1) throw ConfigError("SSMM needs at least one training image");
}

void to_json(nlohmann::json& j, const SsmmConfig& cfg) {
  j = nlohmann::json{{"epsilon", cfg.epsilon},       {"alpha", cfg.alpha},     {"iterations", cfg.iterations},
                     {"tau", cfg.tau},               {"train_size", cfg.train_size}, {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SsmmConfig& cfg) {
  cfg = SsmmConfig{};
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.train_size = j.value("train_size", cfg.train_size);
  cfg.seed = j.value("seed", cfg.seed);
}

LabelMap ssmm_target(std::span<const synth::SegSample> pool, std::uint64_t seed) {
  if (pool.empty()) throw InputError("SSMM target pool is empty");
  Rng rng(derive_seed(seed, 0x7373));
  const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
  return pool[pick].labels;
}

UniversalPerturbation ssmm_train(const Victim& victim, std::span<const synth::SegSample> samples,
                                 std::span<const LabelMap> targets, const SsmmConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw InputError("SSMM training set is empty");
  if (targets.size() != samples.size()) throw InputError("SSMM needs one target map per training image");
  const Tensor& first = samples.front().image;
  for (const auto& s : samples) {
    check_sample(s);
    if (s.image.dims() != first.dims()) throw InputError("SSMM training images must share one size");
  }
  for (const auto& t : targets) {
    if (t.height() != first.dim(0) || t.width() != first.dim(1)) throw InputError("SSMM target has wrong size");
  }

  const std::size_t h = first.dim(0), w = first.dim(1);
  Tensor noise(first.dims());
  std::vector<Tensor> grads(samples.size());

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    parallel_for(samples.size(), [&](std::size_t k) {
      Tensor x = samples[k].image;
      for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::clamp(x[n] + noise[n], 0.0f, kPixelMax);
      const ProbabilityMap probs = victim.predict(x);
      Tensor weights({h, w}, 1.0f);
      const LabelMap& target = targets[k];
      for (std::size_t p = 0; p < target.size(); ++p) {
        if (probs.pixel(p)[static_cast<std::size_t>(target[p])] > cfg.tau) weights[p] = 0.0f;
      }
      auto lg = victim.loss_input_grad(x, target, weights);
      check_gradient(lg.grad);
      grads[k] = std::move(lg.grad);
    });

    // The 1/m mean does not change the sign; summing in index order keeps the
    // result independent of thread scheduling.
    Tensor mean(first.dims());
    for (const Tensor& g : grads) {
      for (std::size_t n = 0; n < mean.size(); ++n) mean[n] += g[n];
    }
    for (std::size_t n = 0; n < noise.size(); ++n) noise[n] -= static_cast<float>(cfg.alpha) * sign_of(mean[n]);
    // clip_eps on the noise itself: the ball around zero, without the pixel range.
    for (std::size_t n = 0; n < noise.size(); ++n) {
      const float hi = static_cast<float>(cfg.epsilon);
      const float bound = static_cast<double>(hi) > cfg.epsilon ? std::nextafter(hi, 0.0f) : hi;
      noise[n] = std::clamp(noise[n], -bound, bound);
    }
  }

  UniversalPerturbation out;
  out.noise = std::move(noise);
  out.epsilon = cfg.epsilon;
  out.iterations = cfg.iterations;
  out.provenance = cfg;
  return out;
}

PerturbedSample apply_universal(const synth::SegSample& sample, const UniversalPerturbation& noise) {
  check_sample(sample);
  if (noise.noise.dims() != sample.image.dims()) {
    throw InputError("universal perturbation " + shape_string(noise.noise.dims()) + " does not match image " +
                     shape_string(sample.image.dims()));
  }
  Tensor adv = sample.image;
  for (std::size_t n = 0; n < adv.size(); ++n) adv[n] = std::clamp(adv[n] + noise.noise[n], 0.0f, kPixelMax);
  // Float rounding of x + noise can land one ulp outside the ball.
  clip_to_ball(sample.image, adv, noise.epsilon);
  return make_result(sample, std::move(adv), "ssmm", noise.provenance);
}

double target_agreement(const LabelMap& predicted, const LabelMap& target) {
  if (predicted.height() != target.height() || predicted.width() != target.width()) {
    throw InputError("target agreement needs maps of equal size");
  }
  if (predicted.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < predicted.size(); ++p) hits += predicted[p] == target[p] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------

void DnnmConfig::validate(std::size_t classes) const {
  if (hidden_class < 0 || static_cast<std::size_t>(hidden_class) >= classes) {
    throw ConfigError("DNNM hidden class " + std::to_string(hidden_class) + " is not a valid class");
  }
  if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("DNNM omega must lie in [0, 1]");
  if (!(epsilon > 0.0) || !(alpha > 0.0)) throw ConfigError("DNNM epsilon and alpha must be positive");
}

void to_json(nlohmann::json& j, const DnnmConfig& cfg) {
  j = nlohmann::json{{"hidden_class", cfg.hidden_class}, {"omega", cfg.omega},         {"epsilon", cfg.epsilon},
                     {"alpha", cfg.alpha},               {"iterations", cfg.iterations}};
}

void from_json(const nlohmann::json& j, DnnmConfig& cfg) {
  cfg = DnnmConfig{};
  cfg.hidden_class = j.value("hidden_class", cfg.hidden_class);
  cfg.omega = j.value("omega", cfg.omega);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.iterations = j.value("iterations", cfg.iterations);
}

DnnmTarget dnnm_target(const LabelMap& predicted, std::int32_t hidden_class, double omega) {
  const auto h = static_cast<std::ptrdiff_t>(predicted.height());
  const auto w = static_cast<std::ptrdiff_t>(predicted.width());
  DnnmTarget out{predicted, Tensor({predicted.height(), predicted.width()}, static_cast<float>(1.0 - omega))};

  bool any_hidden = false, any_other = false;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    (predicted[p] == hidden_class ? any_hidden : any_other) = true;
  }
  if (!any_hidden) return out;
  if (!any_other) throw AttackError("every pixel is predicted as the hidden class; nothing to copy from");

  auto is_other = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
    return i >= 0 && j >= 0 && i < h && j < w && predicted.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) != hidden_class;
  };

  // Ring search: every pixel on Chebyshev ring r is at squared distance >= r^2,
  // so the scan can stop once r^2 exceeds the best distance found.
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      if (predicted.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) != hidden_class) continue;
      std::ptrdiff_t best_d = std::numeric_limits<std::ptrdiff_t>::max(), best_i = -1, best_j = -1;
      auto consider = [&](std::ptrdiff_t a, std::ptrdiff_t b) {
        if (!is_other(a, b)) return;
        const std::ptrdiff_t d = (a - i) * (a - i) + (b - j) * (b - j);
        if (d < best_d || (d == best_d && (a < best_i || (a == best_i && b < best_j)))) {
          best_d = d;
          best_i = a;
          best_j = b;
        }
      };
      const std::ptrdiff_t max_r = std::max(h, w);
      for (std::ptrdiff_t r = 1; r <= max_r && r * r <= best_d; ++r) {
        for (std::ptrdiff_t b = j - r; b <= j + r; ++b) {
          consider(i - r, b);
          consider(i + r, b);
        }
        for (std::ptrdiff_t a = i - r + 1; a <= i + r - 1; ++a) {
          consider(a, j - r);
          consider(a, j + r);
        }
      }
      const auto flat = static_cast<std::size_t>(i * w + j);
      out.target[flat] = predicted.at(static_cast<std::size_t>(best_i), static_cast<std::size_t>(best_j));
      out.weights[flat] = static_cast<float>(omega);
    }
  }
  return out;
}

PerturbedSample dnnm_attack(const Victim& victim, const synth::SegSample& sample, const DnnmConfig& cfg,
                            const IterateObserver& observer) {
  check_sample(sample);
  const ProbabilityMap clean = victim.predict(sample.image);
  cfg.validate(clean.classes());
  DnnmTarget tw = dnnm_target(clean.argmax(), cfg.hidden_class, cfg.omega);

  Tensor x = sample.image;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const auto lg = victim.loss_input_grad(x, tw.target, tw.weights);
    check_gradient(lg.grad);
    sign_step(sample.image, x, lg.grad, -1.0f, cfg.alpha, cfg.epsilon);
    if (observer) observer(t + 1, x, lg.loss);
  }
  return make_result(sample, std::move(x), "dnnm", cfg, std::move(tw.target));
}

// ---------------------------------------------------------------------------

void PatchConfig::validate(std::size_t image_height, std::size_t image_width) const {
  if (height == 0 || width == 0) throw ConfigError("patch must be non-empty");
  if (height > image_height || width > image_width) {
    throw InputError("patch " + std::to_string(height) + "x" + std::to_string(width) + " is larger than the image " +
                     std::to_string(image_height) + "x" + std::to_string(image_width));
  }
  if (!(step > 0.0)) throw ConfigError("patch step must be positive");
  if (placements == 0) throw ConfigError("patch needs at least one placement per iteration");
}

void to_json(nlohmann::json& j, const PatchConfig& cfg) {
  j = nlohmann::json{{"height", cfg.height}, {"width", cfg.width},           {"iterations", cfg.iterations},
                     {"step", cfg.step},     {"placements", cfg.placements}, {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, PatchConfig& cfg) {
  cfg = PatchConfig{};
  cfg.height = j.value("height", cfg.height);
  cfg.width = j.value("width", cfg.width);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.step = j.value("step", cfg.step);
  cfg.placements = j.value("placements", cfg.placements);
  cfg.seed = j.value("seed", cfg.seed);
}

namespace {

void paste(Tensor& image, const Tensor& patch, std::size_t top, std::size_t left) {
  const std::size_t ph = patch.dim(0), pw = patch.dim(1);
  for (std::size_t i = 0; i < ph; ++i) {
    for (std::size_t j = 0; j < pw; ++j) {
      for (std::size_t c = 0; c < 3; ++c) image.at(top + i, left + j, c) = patch.at(i, j, c);
    }
  }
}

struct Placement {
  std::size_t sample = 0, top = 0, left = 0;
};

Placement draw_placement(Rng& rng, std::size_t samples, std::size_t h, std::size_t w, std::size_t ph, std::size_t pw) {
  Placement p;
  p.sample = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(samples) - 1));
  p.top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h - ph)));
  p.left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w - pw)));
  return p;
}

}  // namespace

AdversarialPatch patch_attack(const Victim& victim, std::span<const synth::SegSample> samples,
                              const PatchConfig& cfg) {
  if (samples.empty()) throw InputError("patch attack needs training images");
  const std::size_t h = samples.front().image.dim(0), w = samples.front().image.dim(1);
  cfg.validate(h, w);
  for (const auto& s : samples) {
    check_sample(s);
    if (s.image.dim(0) != h || s.image.dim(1) != w) throw InputError("patch training images must share one size");
  }

  Tensor patch({cfg.height, cfg.width, 3}, 127.5f);
  Rng rng(derive_seed(cfg.seed, 0x7061));
  std::vector<Placement> draws(cfg.placements);
  std::vector<Tensor> grads(cfg.placements);

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    for (auto& d : draws) d = draw_placement(rng, samples.size(), h, w, cfg.height, cfg.width);
    parallel_for(draws.size(), [&](std::size_t b) {
      const auto& s = samples[draws[b].sample];
      Tensor x = s.image;
      paste(x, patch, draws[b].top, draws[b].left);
      auto lg = victim.loss_input_grad(x, s.labels, ones_like_labels(s.labels));
      check_gradient(lg.grad);
      Tensor window({cfg.height, cfg.width, 3});
      for (std::size_t i = 0; i < cfg.height; ++i) {
        for (std::size_t j = 0; j < cfg.width; ++j) {
          for (std::size_t c = 0; c < 3; ++c) window.at(i, j, c) = lg.grad.at(draws[b].top + i, draws[b].left + j, c);
        }
      }
      grads[b] = std::move(window);
    });

    Tensor total({cfg.height, cfg.width, 3});
    for (const Tensor& g : grads) {
      for (std::size_t n = 0; n < total.size(); ++n) total[n] += g[n];
    }
    const auto step = static_cast<float>(cfg.step);
    for (std::size_t n = 0; n < patch.size(); ++n) {
      patch[n] = std::clamp(patch[n] + step * sign_of(total[n]), 0.0f, kPixelMax);
    }
  }
  return AdversarialPatch{std::move(patch), cfg};
}

PerturbedSample apply_patch(const synth::SegSample& sample, const AdversarialPatch& patch, std::size_t top,
                            std::size_t left) {
  check_sample(sample);
  const std::size_t ph = patch.pixels.dim(0), pw = patch.pixels.dim(1);
  if (top + ph > sample.image.dim(0) || left + pw > sample.image.dim(1)) {
    throw InputError("patch placement exceeds the image");
  }
  Tensor adv = sample.image;
  paste(adv, patch.pixels, top, left);
  nlohmann::json cfg = patch.provenance;
  cfg["top"] = top;
  cfg["left"] = left;
  return make_result(sample, std::move(adv), "patch", cfg);
}

PerturbedSample apply_patch_random(const synth::SegSample& sample, const AdversarialPatch& patch,
                                   std::uint64_t seed) {
  const std::size_t h = sample.image.dim(0), w = sample.image.dim(1);
  const std::size_t ph = patch.pixels.dim(0), pw = patch.pixels.dim(1);
  if (ph > h || pw > w) throw InputError("patch larger than image");
  Rng rng(derive_seed(seed, hash_string(sample.id)));
  const auto top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h - ph)));
  const auto left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w - pw)));
  return apply_patch(sample, patch, top, left);
}

double linf_distance(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) throw InputError("linf distance needs tensors of equal shape");
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    m = std::max(m, std::fabs(static_cast<double>(a[n]) - static_cast<double>(b[n])));
  }
  return m;
}

}  // namespace segadv::attacks
