#include "segadv/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "segadv/container.hpp"
#include "segadv/heatmap.hpp"
#include "segadv/json_io.hpp"
#include "segadv/parallel.hpp"
#include "segadv/random.hpp"
#include "segadv/uncertainty.hpp"

namespace segadv::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

AttackSpec AttackSpec::fgsm(double epsilon, bool least_likely) {
  AttackSpec s;
  s.kind = attacks::AttackKind::Fgsm;
  s.gradient = attacks::AttackConfig::fgsm(epsilon, least_likely);
  return s;
}

AttackSpec AttackSpec::ifgsm(double epsilon, bool least_likely) {
  AttackSpec s;
  s.kind = attacks::AttackKind::IFgsm;
  s.gradient = attacks::AttackConfig::ifgsm(epsilon, least_likely);
  return s;
}

AttackSpec AttackSpec::of(attacks::AttackKind kind) {
  AttackSpec s;
  s.kind = kind;
  return s;
}

std::string AttackSpec::tag() const {
  switch (kind) {
    case attacks::AttackKind::Fgsm:
    case attacks::AttackKind::IFgsm:
      return gradient.tag();
    case attacks::AttackKind::Ssmm:
      return "ssmm";
    case attacks::AttackKind::Dnnm:
      return "dnnm";
    case attacks::AttackKind::Patch:
      return "patch";
  }
  return "unknown";
}

void to_json(json& j, const AttackSpec& spec) {
  switch (spec.kind) {
    case attacks::AttackKind::Fgsm:
      j = {{"kind", "fgsm"}, {"epsilon", spec.gradient.epsilon}, {"targeted", spec.gradient.targeted}};
      break;
    case attacks::AttackKind::IFgsm:
      j = {{"kind", "ifgsm"},
           {"epsilon", spec.gradient.epsilon},
           {"alpha", spec.gradient.alpha},
           {"iterations", spec.gradient.iterations},
           {"targeted", spec.gradient.targeted}};
      break;
    case attacks::AttackKind::Ssmm:
      j = spec.ssmm;
      j["kind"] = "ssmm";
      break;
    case attacks::AttackKind::Dnnm:
      j = spec.dnnm;
      j["kind"] = "dnnm";
      break;
    case attacks::AttackKind::Patch:
      j = spec.patch;
      j["kind"] = "patch";
      break;
  }
}

void from_json(const json& j, AttackSpec& spec) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "fgsm" || kind == "ifgsm") {
    const double eps = j.at("epsilon").get<double>();
    const bool targeted = j.value("targeted", false);
    spec = kind == "fgsm" ? AttackSpec::fgsm(eps, targeted) : AttackSpec::ifgsm(eps, targeted);
    if (kind == "ifgsm") {
      spec.gradient.alpha = j.value("alpha", spec.gradient.alpha);
      spec.gradient.iterations = j.value("iterations", spec.gradient.iterations);
    }
    spec.gradient.validate();
  } else if (kind == "ssmm") {
    spec = AttackSpec::of(attacks::AttackKind::Ssmm);
    spec.ssmm = j.get<attacks::SsmmConfig>();
  } else if (kind == "dnnm") {
    spec = AttackSpec::of(attacks::AttackKind::Dnnm);
    spec.dnnm = j.get<attacks::DnnmConfig>();
  } else if (kind == "patch") {
    spec = AttackSpec::of(attacks::AttackKind::Patch);
    spec.patch = j.get<attacks::PatchConfig>();
  } else {
    throw ConfigError("unknown attack kind '" + kind + "'");
  }
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  for (bool ll : {false, true}) {
    for (double eps : {4.0, 8.0, 16.0}) {
      c.attacks.push_back(AttackSpec::fgsm(eps, ll));
      c.attacks.push_back(AttackSpec::ifgsm(eps, ll));
    }
  }
  c.attacks.push_back(AttackSpec::ifgsm(2.0, true));
  c.attacks.push_back(AttackSpec::of(attacks::AttackKind::Ssmm));
  c.attacks.push_back(AttackSpec::of(attacks::AttackKind::Dnnm));
  c.attacks.push_back(AttackSpec::of(attacks::AttackKind::Patch));
  for (auto kind : {detect::DetectorKind::Entropy, detect::DetectorKind::Lasso, detect::DetectorKind::Ocsvm,
                    detect::DetectorKind::Ellipse}) {
    detect::DetectorSpec d;
    d.kind = kind;
    c.detectors.push_back(d);
  }
  return c;
}

void ExperimentConfig::reseed(std::uint64_t global) {
  seed = global;
  dataset.seed = global;
  train.seed = derive_seed(global, 1);
  gradcheck.seed = derive_seed(global, 2);
  evaluation.seed = derive_seed(global, 3);
  for (std::size_t k = 0; k < attacks.size(); ++k) {
    attacks[k].ssmm.seed = derive_seed(global, 4, k);
    attacks[k].patch.seed = derive_seed(global, 5, k);
  }
}

void ExperimentConfig::validate() const {
  dataset.validate();
  train.validate();
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
  std::map<std::string, int> tags;
  bool has_training_attack = false;
  for (const auto& a : attacks) {
    if (++tags[a.tag()] > 1) throw ConfigError("attack '" + a.tag() + "' is listed twice");
    if (a.tag() == "clean") throw ConfigError("'clean' is reserved");
    has_training_attack = has_training_attack || a.tag() == evaluation.training_attack;
    switch (a.kind) {
      case attacks::AttackKind::Fgsm:
      case attacks::AttackKind::IFgsm:
        a.gradient.validate();
        break;
      case attacks::AttackKind::Ssmm:
        a.ssmm.validate();
        break;
      case attacks::AttackKind::Dnnm:
        a.dnnm.validate(dataset.classes);
        break;
      case attacks::AttackKind::Patch:
        a.patch.validate(dataset.height, dataset.width);
        break;
    }
  }
  std::map<std::string, int> kinds;
  for (const auto& d : detectors) {
    if (++kinds[detect::to_string(d.kind)] > 1) throw ConfigError("detector '" + detect::to_string(d.kind) + "' is listed twice");
    if (d.supervised() && !attacks.empty() && !has_training_attack) {
      throw ConfigError("detector '" + detect::to_string(d.kind) + "' trains on attack '" + evaluation.training_attack +
                        "', which is not in the attack list");
    }
  }
  const std::size_t n = attack_images == 0 ? dataset.val_size : attack_images;
  if (n > dataset.val_size) throw ConfigError("attack_images exceeds the validation split");
  if (!detectors.empty() && !attacks.empty() && n < evaluation.folds) {
    throw ConfigError("fewer attacked images than cross-validation folds");
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  json detectors = json::array();
  for (const auto& d : c.detectors) detectors.push_back(d);
  json attack_list = json::array();
  for (const auto& a : c.attacks) attack_list.push_back(a);
  j = {{"seed", c.seed},
       {"out", c.out.string()},
       {"dataset", c.dataset},
       {"train", c.train},
       {"gradcheck", c.gradcheck},
       {"attack_images", c.attack_images},
       {"attacks", attack_list},
       {"detectors", detectors},
       {"evaluation", c.evaluation},
       {"kappa", c.kappa},
       {"heatmaps", c.heatmaps}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig::defaults();
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<synth::DatasetConfig>();
    if (j.contains("train")) c.train = j.at("train").get<model::TrainConfig>();
    if (j.contains("gradcheck")) c.gradcheck = j.at("gradcheck").get<model::GradCheckOptions>();
    c.attack_images = j.value("attack_images", c.attack_images);
    if (j.contains("attacks")) c.attacks = j.at("attacks").get<std::vector<AttackSpec>>();
    if (j.contains("detectors")) c.detectors = j.at("detectors").get<std::vector<detect::DetectorSpec>>();
    if (j.contains("evaluation")) c.evaluation = j.at("evaluation").get<metrics::CrossValidationOptions>();
    c.kappa = j.value("kappa", c.kappa);
    c.heatmaps = j.value("heatmaps", c.heatmaps);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
}

ExperimentConfig resolve_config(const std::optional<fs::path>& config_file, const std::optional<std::string>& overrides,
                                std::optional<std::uint64_t> seed, const std::optional<fs::path>& out) {
  json j = ExperimentConfig::defaults();
  if (config_file) j.merge_patch(io::read_json(*config_file));
  if (overrides && !overrides->empty()) {
    json patch;
    const auto text = *overrides;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      try {
        patch = json::parse(text);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad --stage-overrides JSON: ") + e.what());
      }
    } else {
      patch = io::read_json(text);
    }
    if (!patch.is_object()) throw ConfigError("--stage-overrides must be a JSON object");
    j.merge_patch(patch);
  }
  ExperimentConfig cfg = j.get<ExperimentConfig>();
  if (seed) cfg.reseed(*seed);
  if (out) cfg.out = *out;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct StageInfo {
  Stage stage;
  const char* name;
};

constexpr StageInfo kStages[] = {
    {Stage::GenData, "gen-data"},           {Stage::TrainModel, "train-model"},
    {Stage::GradCheck, "gradcheck"},        {Stage::Attack, "attack"},
    {Stage::ExtractFeatures, "extract-features"}, {Stage::TrainDetector, "train-detector"},
    {Stage::Detect, "detect"},              {Stage::Evaluate, "evaluate"},
    {Stage::Report, "report"},
};

void say(const LogFn& log, Stage stage, const std::string& msg) {
  if (log) log(stage_name(stage), msg);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

synth::Dataset load_data(const ExperimentConfig& cfg) { return synth::load_dataset(Layout{cfg.out}.data()); }

std::vector<uncertainty::FeatureVector> load_features(const ExperimentConfig& cfg, const std::string& tag) {
  return uncertainty::read_features_csv(Layout{cfg.out}.features(tag));
}

std::vector<metrics::AttackFeatures> load_attack_features(const ExperimentConfig& cfg) {
  std::vector<metrics::AttackFeatures> out;
  for (const auto& a : cfg.attacks) out.push_back({a.tag(), load_features(cfg, a.tag())});
  return out;
}

detect::FeatureRows rows_of(const std::vector<uncertainty::FeatureVector>& fs) {
  detect::FeatureRows rows;
  rows.reserve(fs.size());
  for (const auto& f : fs) rows.push_back(f.values);
  return rows;
}

// -- gen-data

void gen_data(const ExperimentConfig& cfg, const LogFn& log) {
  const auto data = synth::generate_dataset(cfg.dataset);
  synth::write_dataset(Layout{cfg.out}.data(), data);
  say(log, Stage::GenData,
      std::to_string(data.train.size()) + " train / " + std::to_string(data.val.size()) + " val images");
}

// -- train-model

void train_model(const ExperimentConfig& cfg, const LogFn& log) {
  const auto data = load_data(cfg);
  const auto params = model::train(data.train, data.config.classes, cfg.train, [&](const model::EpochStats& s) {
    say(log, Stage::TrainModel, "epoch " + std::to_string(s.epoch) + " loss " + fmt("%.4f", s.mean_loss));
  });
  const Layout lay{cfg.out};
  model::save_checkpoint(lay.model(), params);
  const double train_acc = model::pixel_accuracy(params, data.train);
  const double val_acc = model::pixel_accuracy(params, data.val);
  io::write_json(lay.model() / "training.json",
                 {{"config", cfg.train}, {"train_pixel_accuracy", train_acc}, {"val_pixel_accuracy", val_acc}});
  say(log, Stage::TrainModel, "val pixel accuracy " + fmt("%.4f", val_acc));
}

// -- gradcheck

void gradcheck(const ExperimentConfig& cfg, const LogFn& log) {
  const auto data = load_data(cfg);
  const auto params = model::load_checkpoint(Layout{cfg.out}.model());
  if (data.val.empty()) throw InputError("no validation image to check gradients on");
  const auto& s = data.val.front();
  const auto report = model::grad_check(params, s.image, s.labels,
                                        model::uniform_weights(s.labels.height(), s.labels.width()), cfg.gradcheck);
  json j = report;
  j["image"] = s.id;
  j["options"] = cfg.gradcheck;
  io::write_json(Layout{cfg.out}.gradcheck(), j);
  say(log, Stage::GradCheck,
      fmt("%.3f", report.fraction_within) + " within tolerance, median rel. error " + fmt("%.2e", report.median_rel_error));
  if (!report.passed) say(log, Stage::GradCheck, "warning: check failed, input gradients may be unreliable");
}

// -- attack

struct AttackOutcome {
  std::vector<attacks::PerturbedSample> samples;
  json extra = json::object();
};

AttackOutcome run_attack(const AttackSpec& spec, const model::ModelParams& params, const synth::Dataset& data,
                         const std::vector<synth::SegSample>& victims, const fs::path& dir) {
  const attacks::ModelVictim victim(params);
  AttackOutcome out;
  auto per_image = [&](auto&& fn, const std::vector<const synth::SegSample*>& which) {
    out.samples.resize(which.size());
    parallel_for(which.size(), [&](std::size_t k) { out.samples[k] = fn(*which[k]); });
  };
  std::vector<const synth::SegSample*> all;
  for (const auto& v : victims) all.push_back(&v);

  switch (spec.kind) {
    case attacks::AttackKind::Fgsm:
    case attacks::AttackKind::IFgsm:
      per_image([&](const synth::SegSample& s) { return attacks::run_gradient_attack(victim, s, spec.gradient); }, all);
      break;
    case attacks::AttackKind::Ssmm: {
      const std::size_t m = std::min(spec.ssmm.train_size, victims.size());
      const std::span<const synth::SegSample> train_set(victims.data(), m);
      const LabelMap target = attacks::ssmm_target(data.train, spec.ssmm.seed);
      const std::vector<LabelMap> targets(m, target);
      const auto noise = attacks::ssmm_train(victim, train_set, targets, spec.ssmm);
      io::write_tensor(dir / "noise.ten", noise.noise);
      io::write_labels(dir / "target.ten", target);
      per_image([&](const synth::SegSample& s) { return attacks::apply_universal(s, noise); }, all);
      double before = 0.0, after = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        before += attacks::target_agreement(model::predict_labels(params, victims[k].image), target);
        after += attacks::target_agreement(model::predict_labels(params, out.samples[k].adversarial.image), target);
      }
      out.extra = {{"train_images", m},
                   {"target_agreement_clean", before / static_cast<double>(m)},
                   {"target_agreement_adversarial", after / static_cast<double>(m)},
                   {"noise_linf", attacks::linf_distance(noise.noise, Tensor(noise.noise.dims()))}};
      break;
    }
    case attacks::AttackKind::Dnnm: {
      std::vector<const synth::SegSample*> with_class;
      for (const auto& v : victims) {
        const auto pred = model::predict_labels(params, v.image);
        const auto ids = pred.ids();
        const bool has = std::find(ids.begin(), ids.end(), spec.dnnm.hidden_class) != ids.end();
        const bool only = std::all_of(ids.begin(), ids.end(), [&](std::int32_t y) { return y == spec.dnnm.hidden_class; });
        if (has && !only) with_class.push_back(&v);
      }
      per_image([&](const synth::SegSample& s) { return attacks::dnnm_attack(victim, s, spec.dnnm); }, with_class);
      out.extra = {{"images_with_hidden_class", with_class.size()}};
      break;
    }
    case attacks::AttackKind::Patch: {
      const auto patch = attacks::patch_attack(victim, victims, spec.patch);
      io::write_tensor(dir / "patch.ten", patch.pixels);
      per_image([&](const synth::SegSample& s) { return attacks::apply_patch_random(s, patch, spec.patch.seed); }, all);
      break;
    }
  }
  return out;
}

void attack(const ExperimentConfig& cfg, const LogFn& log) {
  const auto data = load_data(cfg);
  const auto params = model::load_checkpoint(Layout{cfg.out}.model());
  const auto victims = attack_subset(cfg, data);
  for (const auto& spec : cfg.attacks) {
    const fs::path dir = Layout{cfg.out}.attack(spec.tag());
    fs::remove_all(dir);
    auto outcome = run_attack(spec, params, data, victims, dir);

    std::vector<synth::SegSample> adv;
    json images = json::array();
    double max_linf = 0.0;
    for (auto& p : outcome.samples) {
      json entry = {{"id", p.adversarial.id}, {"linf", p.linf}};
      if (p.config.contains("top")) {
        entry["top"] = p.config["top"];
        entry["left"] = p.config["left"];
      }
      images.push_back(std::move(entry));
      max_linf = std::max(max_linf, p.linf);
      if (p.target) io::write_labels(dir / "targets" / (p.adversarial.id + ".ten"), *p.target);
      adv.push_back(std::move(p.adversarial));
    }
    synth::write_samples(dir, adv, "adversarial", json{{"attack", spec}});
    json meta = {{"tag", spec.tag()}, {"attack", spec}, {"images", images}, {"max_linf", max_linf}};
    meta.update(outcome.extra);
    io::write_json(dir / "attack.json", meta);
    say(log, Stage::Attack, spec.tag() + ": " + std::to_string(adv.size()) + " images, max linf " + fmt("%g", max_linf));
  }
}

// -- extract-features

json extract_one(const ExperimentConfig& cfg, const model::ModelParams& params, const std::string& tag,
                 const std::vector<synth::SegSample>& samples, uncertainty::SampleLabel label) {
  const Layout lay{cfg.out};
  std::vector<uncertainty::FeatureVector> feats(samples.size());
  std::vector<double> apsr(samples.size());
  parallel_for(samples.size(), [&](std::size_t k) {
    const auto probs = model::predict(params, samples[k].image);
    feats[k] = uncertainty::feature_vector(probs, samples[k].id, label,
                                           label == uncertainty::SampleLabel::Clean ? "none" : tag);
    apsr[k] = metrics::apsr(probs.argmax(), samples[k].labels);
    if (k < cfg.heatmaps) io::export_entropy_heatmap(probs, lay.heatmap(tag, samples[k].id));
  });
  uncertainty::write_features_csv(lay.features(tag), feats);
  double mean = 0.0;
  json per_image = json::object();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    mean += apsr[k];
    per_image[samples[k].id] = apsr[k];
  }
  if (!samples.empty()) mean /= static_cast<double>(samples.size());
  return {{"mean", mean}, {"images", samples.size()}, {"per_image", per_image}};
}

void extract_features(const ExperimentConfig& cfg, const LogFn& log) {
  const auto data = load_data(cfg);
  const auto params = model::load_checkpoint(Layout{cfg.out}.model());
  json apsr = json::object();
  apsr["clean"] = extract_one(cfg, params, "clean", attack_subset(cfg, data), uncertainty::SampleLabel::Clean);
  say(log, Stage::ExtractFeatures, "clean: APSR " + fmt("%.4f", apsr["clean"]["mean"].get<double>()));
  for (const auto& spec : cfg.attacks) {
    const auto samples = synth::load_samples(Layout{cfg.out}.attack(spec.tag()));
    apsr[spec.tag()] = extract_one(cfg, params, spec.tag(), samples, uncertainty::SampleLabel::Attacked);
    say(log, Stage::ExtractFeatures, spec.tag() + ": APSR " + fmt("%.4f", apsr[spec.tag()]["mean"].get<double>()));
  }
  io::write_json(Layout{cfg.out}.apsr(), apsr);
}

// -- train-detector

void train_detector(const ExperimentConfig& cfg, const LogFn& log) {
  const auto clean = rows_of(load_features(cfg, "clean"));
  detect::FeatureRows adv;
  const bool have_training_attack =
      std::any_of(cfg.attacks.begin(), cfg.attacks.end(),
                  [&](const AttackSpec& a) { return a.tag() == cfg.evaluation.training_attack; });
  if (have_training_attack) adv = rows_of(load_features(cfg, cfg.evaluation.training_attack));
  for (const auto& spec : cfg.detectors) {
    const auto kind = detect::to_string(spec.kind);
    if (spec.supervised() && !have_training_attack) {
      say(log, Stage::TrainDetector, kind + ": skipped, no training attack configured");
      continue;
    }
    const auto model = detect::train(spec, clean, adv);
    detect::save_detector(Layout{cfg.out}.detector(kind), model);
    say(log, Stage::TrainDetector, kind + ": trained on " + std::to_string(clean.size()) + " clean images");
  }
}

// -- detect

void run_detect(const ExperimentConfig& cfg, const LogFn& log) {
  std::vector<std::string> tags{"clean"};
  for (const auto& a : cfg.attacks) tags.push_back(a.tag());
  for (const auto& spec : cfg.detectors) {
    const auto kind = detect::to_string(spec.kind);
    const fs::path path = Layout{cfg.out}.detector(kind);
    if (!fs::exists(path)) continue;
    const auto model = detect::load_detector(path);
    std::string csv = "id,label,attack,p,verdict\n";
    std::size_t flagged = 0, total = 0;
    for (const auto& tag : tags) {
      for (const auto& f : load_features(cfg, tag)) {
        const double p = detect::score(model, f.values);
        const bool perturbed = detect::classify(p, cfg.kappa) == detect::Verdict::Perturbed;
        flagged += perturbed ? 1 : 0;
        ++total;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", p);
        csv += f.id + (f.label == uncertainty::SampleLabel::Clean ? ",clean," : ",attacked,") + f.attack + "," + buf +
               (perturbed ? ",perturbed\n" : ",clean\n");
      }
    }
    io::write_text(Layout{cfg.out}.detections(kind), csv);
    say(log, Stage::Detect, kind + ": " + std::to_string(flagged) + " of " + std::to_string(total) + " flagged at kappa " +
                                fmt("%g", cfg.kappa));
  }
}

// -- evaluate / report

metrics::EvalReport evaluate(const ExperimentConfig& cfg, const LogFn& log) {
  metrics::EvalReport report;
  report.options = cfg.evaluation;
  const json apsr = io::read_json(Layout{cfg.out}.apsr());
  report.apsr.push_back({"clean", apsr.at("clean").at("mean").get<double>(), apsr.at("clean").at("images").get<std::size_t>()});
  for (const auto& a : cfg.attacks) {
    const auto& e = apsr.at(a.tag());
    report.apsr.push_back({a.tag(), e.at("mean").get<double>(), e.at("images").get<std::size_t>()});
  }
  if (!cfg.attacks.empty()) {
    report.detection =
        metrics::cross_validate(load_features(cfg, "clean"), load_attack_features(cfg), cfg.detectors, cfg.evaluation);
  }
  io::write_json(Layout{cfg.out}.evaluation(), metrics::report_json(report));
  say(log, Stage::Evaluate, std::to_string(report.detection.size()) + " detector x attack rows");
  return report;
}

metrics::EvalReport write_report(const ExperimentConfig& cfg, const LogFn& log) {
  const Layout lay{cfg.out};
  const auto report = metrics::report_from_json(io::read_json(lay.evaluation()));
  io::write_text(lay.report_csv(), metrics::report_csv(report));
  json summary = metrics::report_json(report);
  summary["config"] = cfg;
  summary["config"].erase("out");
  if (fs::exists(lay.gradcheck())) {
    const json g = io::read_json(lay.gradcheck());
    summary["gradcheck"] = {{"passed", g.at("passed")},
                            {"fraction_within", g.at("fraction_within")},
                            {"median_rel_error", g.at("median_rel_error")}};
  }
  io::write_json(lay.report_json(), summary);
  say(log, Stage::Report, "wrote " + lay.report_csv().string());
  return report;
}

// Stage stamps: the hash of the config (minus the output directory) so a
// resumed run only skips stages that ran under the same settings.
std::string config_fingerprint(const ExperimentConfig& cfg) {
  json j = cfg;
  j.erase("out");
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(j.dump())));
  return buf;
}

bool stamp_matches(const ExperimentConfig& cfg, Stage stage) {
  const fs::path p = Layout{cfg.out}.stamp(stage);
  if (!fs::exists(p)) return false;
  try {
    return io::read_json(p).value("config", std::string()) == config_fingerprint(cfg);
  } catch (const Error&) {
    return false;
  }
}

void write_stamp(const ExperimentConfig& cfg, Stage stage) {
  io::write_json(Layout{cfg.out}.stamp(stage), {{"stage", stage_name(stage)}, {"config", config_fingerprint(cfg)}});
}

}  // namespace

std::string stage_name(Stage stage) {
  for (const auto& s : kStages) {
    if (s.stage == stage) return s.name;
  }
  return "unknown";
}

std::optional<Stage> stage_from_name(std::string_view name) {
  for (const auto& s : kStages) {
    if (name == s.name) return s.stage;
  }
  return std::nullopt;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> v;
    for (const auto& s : kStages) v.push_back(s.stage);
    return v;
  }();
  return stages;
}

std::vector<synth::SegSample> attack_subset(const ExperimentConfig& cfg, const synth::Dataset& data) {
  const std::size_t n = cfg.attack_images == 0 ? data.val.size() : std::min(cfg.attack_images, data.val.size());
  return {data.val.begin(), data.val.begin() + static_cast<std::ptrdiff_t>(n)};
}

void run_stage(Stage stage, const ExperimentConfig& cfg, const LogFn& log) {
  try {
    cfg.validate();
    // Invalidate downstream stamps first so an interrupted stage is redone.
    bool later = false;
    for (Stage s : all_stages()) {
      later = later || s == stage;
      if (later) fs::remove(Layout{cfg.out}.stamp(s));
    }
    switch (stage) {
      case Stage::GenData:
        gen_data(cfg, log);
        break;
      case Stage::TrainModel:
        train_model(cfg, log);
        break;
      case Stage::GradCheck:
        gradcheck(cfg, log);
        break;
      case Stage::Attack:
        attack(cfg, log);
        break;
      case Stage::ExtractFeatures:
        extract_features(cfg, log);
        break;
      case Stage::TrainDetector:
        train_detector(cfg, log);
        break;
      case Stage::Detect:
        run_detect(cfg, log);
        break;
      case Stage::Evaluate:
        evaluate(cfg, log);
        break;
      case Stage::Report:
        write_report(cfg, log);
        break;
    }
    write_stamp(cfg, stage);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, IoError(e.what()));
  } catch (const nlohmann::json::exception& e) {
    throw StageError(stage, InputError(e.what()));
  }
}

metrics::EvalReport run_all(const ExperimentConfig& cfg, bool resume, const LogFn& log) {
  bool rerun = !resume;
  for (Stage s : all_stages()) {
    if (!rerun && stamp_matches(cfg, s)) {
      say(log, s, "up to date, skipped");
      continue;
    }
    rerun = true;
    run_stage(s, cfg, log);
  }
  try {
    return metrics::report_from_json(io::read_json(Layout{cfg.out}.evaluation()));
  } catch (const Error& e) {
    throw StageError(Stage::Report, e);
  }
}

}  // namespace segadv::pipeline
