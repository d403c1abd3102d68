// segadv: runs the experiment pipeline one stage at a time or end to end.
//
//   segadv run-all --out runs/a --seed 7
//   segadv attack --out runs/a --stage-overrides '{"attacks":[{"kind":"fgsm","epsilon":8}]}'
//
// Every subcommand accepts --config, --seed, --out and --stage-overrides and
// reads its inputs from the artifacts earlier stages left under --out.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "segadv/parallel.hpp"
#include "segadv/pipeline.hpp"

namespace {

int exit_code_for(const std::string& category) {
  static const std::map<std::string, int> codes{{"config", 2}, {"input", 3}, {"io", 4},
                                                {"attack", 5}, {"training", 6}, {"internal", 7}};
  const auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks on a toy segmentation network and their uncertainty-based detection"};
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> overrides;
  bool quiet = false;
  bool no_resume = false;

  app.add_option("--config", config_file, "Experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Global seed; replaces every stage seed");
  app.add_option("--out", out, "Output directory (default: segadv_out)");
  app.add_option("--stage-overrides", overrides, "JSON merge patch applied to the config (inline JSON or a file)");
  app.add_flag("-q,--quiet", quiet, "Only print errors");

  std::map<CLI::App*, std::optional<segadv::pipeline::Stage>> commands;
  const std::map<std::string, std::string> help{
      {"gen-data", "Generate the synthetic train/val dataset"},
      {"train-model", "Train the segmentation network"},
      {"gradcheck", "Check input gradients against finite differences"},
      {"attack", "Run every configured attack on the validation images"},
      {"extract-features", "Compute image-level uncertainty features and APSR"},
      {"train-detector", "Fit the configured detectors on all features"},
      {"detect", "Score every feature row with the trained detectors"},
      {"evaluate", "Cross-validate the detectors against every attack"},
      {"report", "Write report.csv and summary.json"},
  };
  for (auto stage : segadv::pipeline::all_stages()) {
    const auto name = segadv::pipeline::stage_name(stage);
    auto* sub = app.add_subcommand(name, help.at(name))->fallthrough();
    commands[sub] = stage;
  }
  auto* run_all = app.add_subcommand("run-all", "Run every stage, skipping those already up to date")->fallthrough();
  run_all->add_flag("--no-resume", no_resume, "Rerun every stage even if its stamp matches");
  commands[run_all] = std::nullopt;

  CLI11_PARSE(app, argc, argv);

  const auto log = [quiet](std::string_view stage, std::string_view msg) {
    if (!quiet) std::cerr << "[" << stage << "] " << msg << "\n";
  };

  try {
    const auto cfg = segadv::pipeline::resolve_config(config_file, overrides, seed, out);
    if (!quiet) std::cerr << "segadv: " << segadv::worker_count() << " worker thread(s), output " << cfg.out << "\n";
    for (auto* sub : app.get_subcommands()) {
      const auto stage = commands.at(sub);
      if (stage) {
        segadv::pipeline::run_stage(*stage, cfg, log);
      } else {
        const auto report = segadv::pipeline::run_all(cfg, !no_resume, log);
        if (!quiet) std::cout << segadv::metrics::report_csv(report);
      }
    }
  } catch (const segadv::pipeline::StageError& e) {
    std::cerr << "error [" << segadv::pipeline::stage_name(e.stage()) << "] " << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const segadv::Error& e) {
    std::cerr << "error [config] " << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
