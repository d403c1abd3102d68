#include "segadv/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "segadv/errors.hpp"
#include "segadv/parallel.hpp"
#include "segadv/random.hpp"

namespace segadv::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_scores(const ScoreSet& s, bool need_both) {
  for (const auto* list : {&s.clean, &s.perturbed}) {
    for (double v : *list) {
      if (!(v >= 0.0 && v <= 1.0)) throw InputError("scores must lie in [0, 1]");
    }
  }
  if (need_both && (s.clean.empty() || s.perturbed.empty())) {
    throw InputError("score set needs clean and perturbed scores");
  }
}

}  // namespace

double apsr(const LabelMap& predicted, const LabelMap& ground_truth) {
  if (predicted.height() != ground_truth.height() || predicted.width() != ground_truth.width()) {
    throw InputError("APSR needs label maps of equal size");
  }
  if (predicted.size() == 0) throw InputError("APSR of an empty label map");
  std::size_t wrong = 0;
  for (std::size_t p = 0; p < predicted.size(); ++p) wrong += predicted[p] != ground_truth[p] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

std::array<double, kKappaSteps> kappa_grid() {
  std::array<double, kKappaSteps> g{};
  for (std::size_t i = 0; i < kKappaSteps; ++i) g[i] = static_cast<double>(i) / static_cast<double>(kKappaSteps - 1);
  return g;
}

double ada(const ScoreSet& scores, double kappa) {
  const std::size_t total = scores.clean.size() + scores.perturbed.size();
  if (total == 0) throw InputError("ADA of an empty score set");
  std::size_t right = 0;
  for (double p : scores.clean) right += p >= kappa ? 1 : 0;
  for (double p : scores.perturbed) right += p < kappa ? 1 : 0;
  return static_cast<double>(right) / static_cast<double>(total);
}

AdaResult ada_star(const ScoreSet& scores) {
  check_scores(scores, false);
  AdaResult best{-1.0, 0.0};
  for (double kappa : kappa_grid()) {
    const double a = ada(scores, kappa);
    if (a > best.ada) best = {a, kappa};
  }
  return best;
}

double auroc(const ScoreSet& scores) {
  check_scores(scores, true);
  std::vector<double> clean = scores.clean, adv = scores.perturbed;
  std::sort(clean.begin(), clean.end());
  std::sort(adv.begin(), adv.end());
  // Twice the Mann-Whitney count, kept integral so the result is exact.
  std::uint64_t twice = 0;
  std::size_t below = 0, upto = 0;
  for (double c : clean) {
    while (below < adv.size() && adv[below] < c) ++below;
    upto = std::max(upto, below);
    while (upto < adv.size() && adv[upto] <= c) ++upto;
    twice += 2 * below + (upto - below);
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(clean.size()) * static_cast<double>(adv.size()));
}

double tpr_at_fpr(const ScoreSet& scores, double fpr_cap) {
  check_scores(scores, true);
  if (!(fpr_cap > 0.0 && fpr_cap < 1.0)) throw InputError("FPR cap must lie in (0, 1)");
  const std::size_t n = scores.clean.size();
  if (static_cast<double>(n) * fpr_cap < 1.0 - 1e-9) {
    throw InputError("TPR at " + std::to_string(fpr_cap) + " FPR needs at least " +
                     std::to_string(static_cast<std::size_t>(std::ceil(1.0 / fpr_cap - 1e-9))) + " clean scores, got " +
                     std::to_string(n));
  }
  std::vector<double> clean = scores.clean;
  std::sort(clean.begin(), clean.end());
  const auto k = static_cast<std::size_t>(std::floor(fpr_cap * static_cast<double>(n) + 1e-9));
  const double kappa = clean[k];
  std::size_t hit = 0;
  for (double p : scores.perturbed) hit += p < kappa ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(scores.perturbed.size());
}

std::vector<std::vector<std::string>> make_folds(std::span<const std::string> ids, std::size_t folds,
                                                 std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
  std::vector<std::string> order(ids.begin(), ids.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (order.size() < folds) {
    throw InputError(std::to_string(order.size()) + " images cannot be split into " + std::to_string(folds) + " folds");
  }
  Rng rng(derive_seed(seed, 0xf01d));
  rng.shuffle(order);
  std::vector<std::vector<std::string>> out(folds);
  const std::size_t base = order.size() / folds, extra = order.size() % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

Summary Summary::of(std::vector<double> values) {
  Summary s;
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  s.folds = std::move(values);
  if (n == 0) {
    s.mean = s.std = kNaN;
    return s;
  }
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : s.folds) {
    if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
  }
  s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

void to_json(nlohmann::json& j, const CrossValidationOptions& opts) {
  j = {{"folds", opts.folds},
       {"seed", opts.seed},
       {"training_attack", opts.training_attack},
       {"fpr_cap", opts.fpr_cap}};
}

void from_json(const nlohmann::json& j, CrossValidationOptions& opts) {
  opts = CrossValidationOptions{};
  opts.folds = j.value("folds", opts.folds);
  opts.seed = j.value("seed", opts.seed);
  opts.training_attack = j.value("training_attack", opts.training_attack);
  opts.fpr_cap = j.value("fpr_cap", opts.fpr_cap);
  if (opts.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (!(opts.fpr_cap > 0.0 && opts.fpr_cap < 1.0)) throw ConfigError("fpr_cap must lie in (0, 1)");
}

namespace {

struct FoldMetrics {
  double ada = kNaN, kappa = kNaN, auroc = kNaN, tpr = kNaN;
};

}  // namespace

std::vector<DetectionRow> cross_validate(const std::vector<uncertainty::FeatureVector>& clean,
                                         const std::vector<AttackFeatures>& attacks,
                                         const std::vector<detect::DetectorSpec>& detectors,
                                         const CrossValidationOptions& opts) {
  if (detectors.empty() || attacks.empty()) return {};
  std::vector<std::string> ids;
  for (const auto& f : clean) ids.push_back(f.id);
  const auto folds = make_folds(ids, opts.folds, opts.seed);

  const AttackFeatures* training = nullptr;
  for (const auto& a : attacks) {
    if (a.tag == opts.training_attack) training = &a;
  }
  for (const auto& spec : detectors) {
    if (spec.supervised() && training == nullptr) {
      throw ConfigError("supervised detector '" + detect::to_string(spec.kind) + "' needs features of attack '" +
                        opts.training_attack + "'");
    }
  }

  // results[fold][detector][attack]
  std::vector<std::vector<std::vector<FoldMetrics>>> results(
      folds.size(), std::vector<std::vector<FoldMetrics>>(detectors.size(), std::vector<FoldMetrics>(attacks.size())));

  parallel_for(folds.size() * detectors.size(), [&](std::size_t job) {
    const std::size_t f = job / detectors.size(), d = job % detectors.size();
    const std::set<std::string> held(folds[f].begin(), folds[f].end());

    detect::FeatureRows train_clean, train_adv;
    std::vector<const uncertainty::FeatureVector*> test_clean;
    for (const auto& fv : clean) {
      if (held.count(fv.id)) {
        test_clean.push_back(&fv);
      } else {
        train_clean.push_back(fv.values);
      }
    }
    if (detectors[d].supervised()) {
      for (const auto& fv : training->features) {
        if (!held.count(fv.id)) train_adv.push_back(fv.values);
      }
    }
    const detect::DetectorModel model = detect::train(detectors[d], train_clean, train_adv);

    ScoreSet base;
    for (const auto* fv : test_clean) base.clean.push_back(detect::score(model, fv->values));
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      ScoreSet s = base;
      for (const auto& fv : attacks[a].features) {
        if (held.count(fv.id)) s.perturbed.push_back(detect::score(model, fv.values));
      }
      FoldMetrics& out = results[f][d][a];
      if (s.clean.empty() || s.perturbed.empty()) continue;
      const AdaResult best = ada_star(s);
      out.ada = best.ada;
      out.kappa = best.kappa;
      out.auroc = auroc(s);
      if (static_cast<double>(s.clean.size()) * opts.fpr_cap >= 1.0 - 1e-9) out.tpr = tpr_at_fpr(s, opts.fpr_cap);
    }
  });

  std::vector<DetectionRow> rows;
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      std::vector<double> ada_v, kappa_v, auroc_v, tpr_v;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const FoldMetrics& m = results[f][d][a];
        ada_v.push_back(m.ada);
        kappa_v.push_back(m.kappa);
        auroc_v.push_back(m.auroc);
        tpr_v.push_back(m.tpr);
      }
      rows.push_back({detect::to_string(detectors[d].kind), attacks[a].tag, Summary::of(std::move(ada_v)),
                      Summary::of(std::move(kappa_v)), Summary::of(std::move(auroc_v)), Summary::of(std::move(tpr_v))});
    }
  }
  return rows;
}

namespace {

std::string fixed(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::json summary_json(const Summary& s) {
  auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json folds = nlohmann::json::array();
  for (double v : s.folds) folds.push_back(num(v));
  return {{"mean", num(s.mean)}, {"std", num(s.std)}, {"folds", folds}};
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::map<std::string, double> apsr_of;
  for (const auto& r : report.apsr) apsr_of[r.attack] = r.mean;

  std::string out =
      "section,detector,attack,apsr,ada_star_mean,ada_star_std,kappa_mean,auroc_mean,auroc_std,tpr5_mean,tpr5_std\n";
  for (const auto& r : report.apsr) out += "apsr,," + r.attack + "," + fixed(r.mean) + ",,,,,,,\n";
  for (const auto& r : report.detection) {
    const auto it = apsr_of.find(r.attack);
    out += "detection," + r.detector + "," + r.attack + "," + (it == apsr_of.end() ? std::string() : fixed(it->second)) +
           "," + fixed(r.ada_star.mean) + "," + fixed(r.ada_star.std) + "," + fixed(r.kappa.mean) + "," +
           fixed(r.auroc.mean) + "," + fixed(r.auroc.std) + "," + fixed(r.tpr5.mean) + "," + fixed(r.tpr5.std) + "\n";
  }
  return out;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json apsr = nlohmann::json::array();
  for (const auto& r : report.apsr) apsr.push_back({{"attack", r.attack}, {"apsr", r.mean}, {"images", r.images}});
  nlohmann::json detection = nlohmann::json::array();
  for (const auto& r : report.detection) {
    detection.push_back({{"detector", r.detector},
                         {"attack", r.attack},
                         {"ada_star", summary_json(r.ada_star)},
                         {"kappa", summary_json(r.kappa)},
                         {"auroc", summary_json(r.auroc)},
                         {"tpr5", summary_json(r.tpr5)}});
  }
  return {{"cross_validation", report.options}, {"apsr", apsr}, {"detection", detection}};
}

namespace {

double number_or_nan(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  s.mean = number_or_nan(j.at("mean"));
  s.std = number_or_nan(j.at("std"));
  for (const auto& v : j.at("folds")) s.folds.push_back(number_or_nan(v));
  return s;
}

}  // namespace

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.options = j.at("cross_validation").get<CrossValidationOptions>();
    for (const auto& a : j.at("apsr")) {
      r.apsr.push_back({a.at("attack").get<std::string>(), a.at("apsr").get<double>(), a.at("images").get<std::size_t>()});
    }
    for (const auto& d : j.at("detection")) {
      r.detection.push_back({d.at("detector").get<std::string>(), d.at("attack").get<std::string>(),
                             summary_from_json(d.at("ada_star")), summary_from_json(d.at("kappa")),
                             summary_from_json(d.at("auroc")), summary_from_json(d.at("tpr5"))});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed evaluation JSON: ") + e.what());
  }
}

}  // namespace segadv::metrics
