// Acceptance suite: runs the default experiment end to end and prints one
// PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails,
// except those named by --known-failure.
//
//   segadv_acceptance --workdir /tmp/segadv_acceptance [--known-failure A7]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segadv/attacks.hpp"
#include "segadv/container.hpp"
#include "segadv/detectors.hpp"
#include "segadv/evalmetrics.hpp"
#include "segadv/json_io.hpp"
#include "segadv/pipeline.hpp"
#include "segadv/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace segadv;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  std::string id;
  std::string title;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> g_results;

void report(std::string id, std::string title, bool pass, std::string detail) {
  std::cout << id << " " << (pass ? "PASS" : "FAIL") << "  " << title << ": " << detail << std::endl;
  g_results.push_back({std::move(id), std::move(title), pass, std::move(detail)});
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// -- helpers over pipeline artifacts

struct Artifacts {
  pipeline::ExperimentConfig cfg;
  pipeline::Layout layout;
  synth::Dataset data;
  model::ModelParams model;
  std::vector<synth::SegSample> victims;
  std::map<std::string, const synth::SegSample*> clean_by_id;
};

std::vector<synth::SegSample> attacked(const Artifacts& a, const std::string& tag) {
  return synth::load_samples(a.layout.attack(tag));
}

double mean_apsr(const model::ModelParams& m, const std::vector<synth::SegSample>& samples, std::size_t limit) {
  const std::size_t n = std::min(limit, samples.size());
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += metrics::apsr(model::predict_labels(m, samples[k].image), samples[k].labels);
  return s / static_cast<double>(n);
}

double attack_budget(const pipeline::AttackSpec& spec) {
  switch (spec.kind) {
    case attacks::AttackKind::Fgsm:
    case attacks::AttackKind::IFgsm:
      return spec.gradient.epsilon;
    case attacks::AttackKind::Ssmm:
      return spec.ssmm.epsilon;
    case attacks::AttackKind::Dnnm:
      return spec.dnnm.epsilon;
    case attacks::AttackKind::Patch:
      return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

// -- A1

void check_gradients(const Artifacts& a) {
  const auto t0 = Clock::now();
  const auto& s = a.data.val.front();
  model::GradCheckOptions opts;  // 200 coordinates, h = 0.1
  const auto r = model::grad_check(a.model, s.image, s.labels, model::uniform_weights(s.labels.height(), s.labels.width()),
                                   opts);
  const double secs = seconds_since(t0);
  report("A1", "gradient fidelity", r.fraction_within >= 0.95 && r.median_rel_error < 1e-3 && secs < 60.0,
         format("%zu coordinates, %.3f with rel. error < 1e-2 (need >= 0.95), median %.2e (need < 1e-3), %.1f s",
                r.entries.size(), r.fraction_within, r.median_rel_error, secs));
}

// -- A2

void check_model_quality(const Artifacts& a, double train_seconds) {
  const double acc = model::pixel_accuracy(a.model, a.data.val);
  report("A2", "toy model quality", acc >= 0.90 && train_seconds < 300.0 && a.data.train.size() == 200,
         format("held-out pixel accuracy %.4f over %zu images (need >= 0.90), clean APSR %.4f, trained on %zu images "
                "in %.1f s (need < 300 s)",
                acc, a.data.val.size(), 1.0 - acc, a.data.train.size(), train_seconds));
}

// -- A3, A4

void check_attack_strength(const Artifacts& a) {
  const std::size_t n = 50;
  const double clean = mean_apsr(a.model, a.victims, n);
  std::map<std::string, double> apsr;
  for (const char* kind : {"fgsm", "ifgsm"})
    for (int eps : {4, 8, 16}) {
      const std::string tag = std::string(kind) + "_eps" + std::to_string(eps);
      apsr[tag] = mean_apsr(a.model, attacked(a, tag), n);
    }
  const double gain = apsr["fgsm_eps16"] - clean;
  const bool monotone = apsr["fgsm_eps8"] >= apsr["fgsm_eps4"] - 0.02 && apsr["fgsm_eps16"] >= apsr["fgsm_eps8"] - 0.02;
  report("A3", "attack potency", gain >= 0.20 && monotone,
         format("over %zu images: clean %.4f, FGSM eps4 %.4f, eps8 %.4f, eps16 %.4f; eps16 gain %.4f (need >= 0.20), "
                "nondecreasing within 0.02: %s",
                n, clean, apsr["fgsm_eps4"], apsr["fgsm_eps8"], apsr["fgsm_eps16"], gain, monotone ? "yes" : "no"));

  bool dominant = true;
  std::string detail;
  for (int eps : {4, 8, 16}) {
    const double f = apsr["fgsm_eps" + std::to_string(eps)], i = apsr["ifgsm_eps" + std::to_string(eps)];
    dominant = dominant && i >= f;
    detail += format("%seps%d I-FGSM %.4f vs FGSM %.4f", detail.empty() ? "" : ", ", eps, i, f);
  }
  report("A4", "iterative dominance", dominant, detail);
}

// -- A5

void check_budgets(const Artifacts& a) {
  std::size_t images = 0, violations = 0;
  std::string first_violation;
  auto violate = [&](const std::string& what) {
    if (violations++ == 0) first_violation = what;
  };
  for (const auto& spec : a.cfg.attacks) {
    const std::string tag = spec.tag();
    const auto adv = attacked(a, tag);
    const double eps = attack_budget(spec);
    const auto meta = io::read_json(a.layout.attack(tag) / "attack.json");
    std::map<std::string, std::pair<std::size_t, std::size_t>> placement;
    Tensor patch;
    if (spec.kind == attacks::AttackKind::Patch) {
      patch = io::read_tensor(a.layout.attack(tag) / "patch.ten");
      for (const auto& e : meta.at("images")) placement[e.at("id")] = {e.at("top"), e.at("left")};
    }
    for (const auto& s : adv) {
      ++images;
      const auto it = a.clean_by_id.find(s.id);
      if (it == a.clean_by_id.end()) {
        violate(tag + "/" + s.id + ": no clean counterpart");
        continue;
      }
      const Tensor& x = it->second->image;
      for (float v : s.image.values())
        if (!(v >= 0.0f && v <= 255.0f)) violate(tag + "/" + s.id + ": pixel out of [0,255]");
      if (spec.kind == attacks::AttackKind::Patch) {
        const auto [top, left] = placement.at(s.id);
        for (std::size_t i = 0; i < x.dim(0); ++i)
          for (std::size_t j = 0; j < x.dim(1); ++j)
            for (std::size_t c = 0; c < 3; ++c) {
              const bool inside = i >= top && i < top + patch.dim(0) && j >= left && j < left + patch.dim(1);
              const float want = inside ? patch.at(i - top, j - left, c) : x.at(i, j, c);
              if (s.image.at(i, j, c) != want) violate(tag + "/" + s.id + ": pixel differs from clean outside the patch");
            }
      } else {
        double linf = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k)
          linf = std::max(linf, std::fabs(static_cast<double>(s.image[k]) - static_cast<double>(x[k])));
        if (!(linf <= eps)) violate(tag + "/" + s.id + format(": linf %.9g > %.9g", linf, eps));
      }
    }
  }
  report("A5", "budget invariants", violations == 0 && images > 0,
         format("%zu adversarial images over %zu attacks, %zu violations%s", images, a.cfg.attacks.size(), violations,
                violations ? (" (first: " + first_violation + ")").c_str() : ""));
}

// -- A6

void check_oracles() {
  Rng rng(20240601);
  std::size_t auroc_bad = 0, ada_bad = 0, dnnm_bad = 0;
  double worst_auroc = 0.0;
  for (int t = 0; t < 100; ++t) {
    metrics::ScoreSet s;
    const auto nc = rng.uniform_int(1, 200), na = rng.uniform_int(1, 200);
    const bool coarse = t % 2 == 0;
    auto draw = [&](double shift) {
      const double v = std::clamp(0.8 * rng.uniform() + shift, 0.0, 1.0);
      return coarse ? std::round(v * 39.0) / 39.0 : v;
    };
    for (std::int64_t k = 0; k < nc; ++k) s.clean.push_back(draw(0.2));
    for (std::int64_t k = 0; k < na; ++k) s.perturbed.push_back(draw(0.0));

    double pairs = 0.0;
    for (double c : s.clean)
      for (double p : s.perturbed) pairs += c > p ? 1.0 : (c == p ? 0.5 : 0.0);
    const double brute = pairs / static_cast<double>(s.clean.size() * s.perturbed.size());
    const double diff = std::fabs(metrics::auroc(s) - brute);
    worst_auroc = std::max(worst_auroc, diff);
    auroc_bad += diff > 1e-12;

    double best = -1.0, best_kappa = 0.0;
    for (int i = 0; i < 40; ++i) {
      const double kappa = i / 39.0;
      double right = 0.0;
      for (double c : s.clean) right += c >= kappa;
      for (double p : s.perturbed) right += p < kappa;
      const double acc = right / static_cast<double>(s.clean.size() + s.perturbed.size());
      if (acc > best) {
        best = acc;
        best_kappa = kappa;
      }
    }
    const auto got = metrics::ada_star(s);
    ada_bad += got.ada != best || got.kappa != best_kappa;
  }

  for (int t = 0; t < 50; ++t) {
    LabelMap pred(16, 16);
    const double frac = rng.uniform(0.05, 0.95);
    for (std::size_t k = 0; k < pred.size(); ++k)
      pred[k] = rng.uniform() < frac ? 1 : static_cast<std::int32_t>(2 * rng.uniform_int(0, 1));
    if (std::all_of(pred.ids().begin(), pred.ids().end(), [](std::int32_t v) { return v == 1; })) pred[255] = 0;
    LabelMap want = pred;
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j) {
        if (pred.at(i, j) != 1) continue;
        long best = std::numeric_limits<long>::max();
        for (std::size_t u = 0; u < 16; ++u)
          for (std::size_t v = 0; v < 16; ++v) {
            if (pred.at(u, v) == 1) continue;
            const long di = static_cast<long>(u) - static_cast<long>(i), dj = static_cast<long>(v) - static_cast<long>(j);
            if (di * di + dj * dj < best) {
              best = di * di + dj * dj;
              want.at(i, j) = pred.at(u, v);
            }
          }
      }
    dnnm_bad += !(attacks::dnnm_target(pred, 1, 0.9).target == want);
  }

  const std::size_t n4 = attacks::iteration_count(4), n8 = attacks::iteration_count(8), n16 = attacks::iteration_count(16);
  const bool rule = n4 == 5 && n8 == 10 && n16 == 20;
  report("A6", "oracle equivalences", auroc_bad == 0 && ada_bad == 0 && dnnm_bad == 0 && rule,
         format("AUROC mismatches %zu/100 (max diff %.1e), ADA* mismatches %zu/100, dnnm_target mismatches %zu/50, "
                "n(4,8,16) = (%zu,%zu,%zu)",
                auroc_bad, worst_auroc, ada_bad, dnnm_bad, n4, n8, n16));
}

// -- A7

void check_detectors(const Artifacts& a) {
  // Lasso on constructed separable features.
  Rng rng(77);
  detect::FeatureRows sep_clean, sep_adv;
  while (sep_clean.size() < 50 || sep_adv.size() < 50) {
    const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
    std::vector<double> row{u, v, 0.1, 0.2, 0.3, 0.4, 0.3};
    if (u - v > 0.1 && sep_clean.size() < 50) sep_clean.push_back(row);
    if (u - v < -0.1 && sep_adv.size() < 50) sep_adv.push_back(row);
  }
  const auto lasso = detect::train_lasso(sep_clean, sep_adv);
  std::size_t right = 0;
  for (const auto& r : sep_clean) right += detect::classify(detect::score(lasso, r), 0.5) == detect::Verdict::Clean;
  for (const auto& r : sep_adv) right += detect::classify(detect::score(lasso, r), 0.5) == detect::Verdict::Perturbed;
  const double lasso_acc = static_cast<double>(right) / 100.0;

  // One-class detectors on the pipeline's clean features: 5 folds, each
  // trained on the other 80% and scored on its held-out 20%.
  const auto clean = uncertainty::read_features_csv(a.layout.features("clean"));
  std::vector<std::string> ids;
  for (const auto& f : clean) ids.push_back(f.id);
  const auto folds = metrics::make_folds(ids, 5, 4242);

  struct Result {
    std::vector<double> held;
    double outlier_worst = 0.0;
  };
  std::map<std::string, Result> results;
  for (const auto& fold : folds) {
    detect::FeatureRows train, test;
    for (const auto& f : clean) {
      const bool held = std::find(fold.begin(), fold.end(), f.id) != fold.end();
      (held ? test : train).push_back(f.values);
    }
    const std::size_t d = train.front().size();
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const auto& r : train)
      for (std::size_t k = 0; k < d; ++k) mean[k] += r[k] / static_cast<double>(train.size());
    for (const auto& r : train)
      for (std::size_t k = 0; k < d; ++k) sd[k] += (r[k] - mean[k]) * (r[k] - mean[k]) / static_cast<double>(train.size());
    std::vector<double> far(d);
    for (std::size_t k = 0; k < d; ++k) far[k] = mean[k] + 10.0 * std::sqrt(sd[k]);

    for (auto kind : {detect::DetectorKind::Ocsvm, detect::DetectorKind::Ellipse}) {
      detect::DetectorSpec spec;
      spec.kind = kind;
      const auto m = detect::train(spec, train, {});
      auto& r = results[detect::to_string(kind)];
      for (const auto& row : test) r.held.push_back(detect::score(m, row));
      r.outlier_worst = std::max(r.outlier_worst, detect::score(m, far));
    }
  }
  bool ok = lasso_acc == 1.0;
  std::string detail = format("lasso training accuracy %.3f (need 1.0)", lasso_acc);
  for (auto& [name, r] : results) {
    std::sort(r.held.begin(), r.held.end());
    const std::size_t n = r.held.size();
    const double median = n % 2 ? r.held[n / 2] : 0.5 * (r.held[n / 2 - 1] + r.held[n / 2]);
    ok = ok && r.outlier_worst <= 0.05 && median >= 0.5;
    detail += format("; %s: 10-std outlier p <= %.3f (need <= 0.05), held-out clean median p %.3f over %zu (need >= 0.5)",
                     name.c_str(), r.outlier_worst, median, n);
  }
  report("A7", "detector sanity", ok, detail);
}

// -- A8

void check_ssmm(const Artifacts& a) {
  const pipeline::AttackSpec* spec = nullptr;
  for (const auto& s : a.cfg.attacks)
    if (s.kind == attacks::AttackKind::Ssmm) spec = &s;
  if (spec == nullptr) {
    report("A8", "SSMM efficacy", false, "no SSMM attack configured");
    return;
  }
  const fs::path dir = a.layout.attack(spec->tag());
  const Tensor noise = io::read_tensor(dir / "noise.ten");
  const LabelMap target = io::read_labels(dir / "target.ten");
  attacks::UniversalPerturbation xi{noise, spec->ssmm.epsilon, spec->ssmm.iterations, {}};
  double noise_linf = 0.0;
  for (float v : noise.values()) noise_linf = std::max(noise_linf, std::fabs(static_cast<double>(v)));

  const std::size_t m = std::min(spec->ssmm.train_size, a.victims.size());
  double before = 0.0, after = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    before += attacks::target_agreement(model::predict_labels(a.model, a.victims[k].image), target);
    const auto adv = attacks::apply_universal(a.victims[k], xi);
    after += attacks::target_agreement(model::predict_labels(a.model, adv.adversarial.image), target);
  }
  before /= static_cast<double>(m);
  after /= static_cast<double>(m);
  report("A8", "SSMM efficacy", after - before >= 0.20 && noise_linf <= spec->ssmm.epsilon,
         format("eps %.2f, alpha %.3f, n %zu, tau %.2f, m %zu: target agreement %.4f -> %.4f (gain %.4f, need >= 0.20), "
                "max |xi| %.9g (need <= eps)",
                spec->ssmm.epsilon, spec->ssmm.alpha, spec->ssmm.iterations, spec->ssmm.tau, m, before, after,
                after - before, noise_linf));
}

// -- A9

void check_cross_attack(const Artifacts& a) {
  const auto rep = metrics::report_from_json(io::read_json(a.layout.evaluation()));
  for (const auto& r : rep.detection) {
    if (r.detector != "lasso" || r.attack != "fgsm_ll_eps16") continue;
    report("A9", "cross-attack detection",
           r.ada_star.mean >= 0.85 && r.auroc.mean >= 0.90 && r.ada_star.folds.size() == 5,
           format("lasso trained on %s, against fgsm_ll_eps16 over %zu folds: ADA* %.4f +- %.4f (need >= 0.85), "
                  "AUROC %.4f +- %.4f (need >= 0.90)",
                  rep.options.training_attack.c_str(), r.ada_star.folds.size(), r.ada_star.mean, r.ada_star.std,
                  r.auroc.mean, r.auroc.std));
    return;
  }
  report("A9", "cross-attack detection", false, "no lasso / fgsm_ll_eps16 row in the evaluation");
}

// -- A10

void check_determinism(const pipeline::Layout& first, const fs::path& second_out) {
  fs::remove_all(second_out);
  const auto t0 = Clock::now();
  std::string how;
#ifdef SEGADV_CLI_PATH
  const std::string cmd = std::string(SEGADV_CLI_PATH) + " run-all -q --out '" + second_out.string() + "'";
  const int status = std::system(cmd.c_str());
  how = format("segadv run-all (exit %d)", WIFEXITED(status) ? WEXITSTATUS(status) : -1);
#else
  pipeline::run_all(pipeline::resolve_config(std::nullopt, std::nullopt, std::nullopt, second_out), false);
  how = "run_all";
#endif
  const std::string a = slurp(first.report_csv()), b = slurp(pipeline::Layout{second_out}.report_csv());
  report("A10", "determinism", !a.empty() && a == b,
         format("second fresh run via %s in %.0f s; report.csv %zu vs %zu bytes, %s", how.c_str(), seconds_since(t0),
                a.size(), b.size(), a == b ? "byte-identical" : "different"));
}

// -- A11

void check_feature_math() {
  double worst = 0.0;
  bool onehot_ok = true;
  for (std::size_t c : {3u, 4u, 6u}) {
    const auto uniform = uncertainty::feature_vector(ProbabilityMap(Tensor({8, 8, c}, 1.0f / static_cast<float>(c))));
    const double cc = static_cast<double>(c);
    std::vector<double> want{std::log(cc), 1.0 - 1.0 / cc, 1.0};
    want.resize(c + 3, 1.0 / cc);
    for (std::size_t k = 0; k < want.size(); ++k) worst = std::max(worst, std::fabs(uniform.values[k] - want[k]));

    // One-hot map: 3/4 of the pixels class 0, the rest class c-1.
    Tensor t({8, 8, c});
    std::vector<double> means(c, 0.0);
    for (std::size_t p = 0; p < 64; ++p) {
      const std::size_t cls = p % 4 == 3 ? c - 1 : 0;
      t[p * c + cls] = 1.0f;
      means[cls] += 1.0 / 64.0;
    }
    const auto onehot = uncertainty::feature_vector(ProbabilityMap(t));
    std::vector<double> expect{0.0, 0.0, 0.0};
    expect.insert(expect.end(), means.begin(), means.end());
    onehot_ok = onehot_ok && onehot.values == expect;
  }
  report("A11", "feature-math spot checks", worst <= 1e-6 && onehot_ok,
         format("uniform maps (C = 3, 4, 6) max deviation %.1e (need <= 1e-6); one-hot maps exact: %s", worst,
                onehot_ok ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segadv acceptance suite"};
  std::string workdir = (fs::temp_directory_path() / "segadv_acceptance").string();
  bool keep = false;
  std::set<std::string> known;
  app.add_option("--workdir", workdir, "Scratch directory for the two pipeline runs");
  app.add_flag("--keep", keep, "Keep the pipeline outputs");
  app.add_option("--known-failure", known, "Criterion id whose failure does not fail the run");
  CLI11_PARSE(app, argc, argv);

  const auto t_start = Clock::now();
  const fs::path root = workdir;
  fs::remove_all(root);

  Artifacts a;
  std::map<pipeline::Stage, double> stage_seconds;
  try {
    a.cfg = pipeline::resolve_config(std::nullopt, std::nullopt, std::nullopt, root / "run1");
    a.layout = pipeline::Layout{a.cfg.out};
    const auto log = [](std::string_view stage, std::string_view msg) {
      std::cerr << "  [" << stage << "] " << msg << "\n";
    };
    for (auto stage : pipeline::all_stages()) {
      const auto t0 = Clock::now();
      pipeline::run_stage(stage, a.cfg, log);
      stage_seconds[stage] = seconds_since(t0);
    }
    a.data = synth::load_dataset(a.layout.data());
    a.model = model::load_checkpoint(a.layout.model());
    a.victims = pipeline::attack_subset(a.cfg, a.data);
    for (const auto& s : a.data.val) a.clean_by_id[s.id] = &s;
  } catch (const std::exception& e) {
    std::cout << "pipeline failed: " << e.what() << std::endl;
    return 1;
  }
  std::cerr << "default pipeline finished in " << format("%.0f", seconds_since(t_start)) << " s\n";

  check_gradients(a);
  check_model_quality(a, stage_seconds[pipeline::Stage::TrainModel]);
  check_attack_strength(a);
  check_budgets(a);
  check_oracles();
  check_detectors(a);
  check_ssmm(a);
  check_cross_attack(a);
  check_determinism(a.layout, root / "run2");
  check_feature_math();

  std::size_t failed = 0, tolerated = 0;
  for (const auto& o : g_results) {
    if (o.pass) continue;
    ++(known.contains(o.id) ? tolerated : failed);
  }
  std::cout << format("%zu/%zu criteria passed in %.0f s", g_results.size() - failed - tolerated, g_results.size(),
                      seconds_since(t_start));
  if (tolerated > 0) std::cout << format(" (%zu known failure%s)", tolerated, tolerated == 1 ? "" : "s");
  std::cout << std::endl;
  if (!keep) fs::remove_all(root);
  return failed == 0 ? 0 : 1;
}
