#include "vf/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fnmatch.h>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>

#include "vf/cli/run_config.hpp"
#include "vf/core/error.hpp"
#include "vf/eval/sweep.hpp"
#include "vf/nn/checkpoint.hpp"
#include "vf/ppo/trainer.hpp"

namespace vf {

namespace fs = std::filesystem;

std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string name = p.filename().string();
  if (name.find_first_of("*?[") == std::string::npos) {
    return fs::exists(p) ? std::vector<fs::path>{p} : std::vector<fs::path>{};
  }
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return v < 0 ? "-" + out : out;
}

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

RunConfig resolve(const Common& c, std::optional<TrainingProfile> profile = {}) {
  RunConfig cfg = c.config.empty() ? run_config_from_json(nlohmann::json::object(), profile)
                                   : run_config_from_json(load_config_tree(c.config), profile);
  apply_env_overrides(cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  cfg.validate();
  omp_set_num_threads(cfg.deterministic ? 1 : cfg.jobs);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::Io, "write to " + path.string() + " failed (disk full?)");
}

std::string timestamp(const char* format) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

// World for evaluating `spec`: the configured environment, with the render
// size taken from the model unless a config file pinned it.
WorldConfig world_for(const RunConfig& cfg, bool from_file, const ModelSpec& spec) {
  WorldConfig w = cfg.world;
  if (!from_file) {
    w.render_height = spec.height;
    w.render_width = spec.width;
  } else if (w.render_height != spec.height || w.render_width != spec.width) {
    fail(ErrorKind::Config, "environment renders " + std::to_string(w.render_height) + "x" +
                                std::to_string(w.render_width) + " but the model " + spec.arch_id() + " expects " +
                                std::to_string(spec.height) + "x" + std::to_string(spec.width));
  }
  return w;
}

std::vector<PerturbationSpec> battery_from(const std::string& text) {
  if (text.find(':') == std::string::npos) return perturbation_battery(text);
  std::vector<PerturbationSpec> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) out.push_back(PerturbationSpec::parse(part));
  return out;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string profile;
  std::string resume;
  std::optional<long long> steps;
  std::string out_dir;
  std::string run_id;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::optional<TrainingProfile> profile;
  if (!a.profile.empty()) profile = parse_profile(a.profile);
  RunConfig cfg = resolve(a.common, profile);
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (a.steps) cfg.training.total_steps = *a.steps;
  if (!a.resume.empty()) cfg.resume_from = a.resume;
  cfg.validate();

  if (!cfg.resume_from.empty()) {
    auto matches = expand_glob(cfg.resume_from);
    if (matches.empty()) fail(ErrorKind::Io, "no checkpoint matches " + cfg.resume_from);
    if (matches.size() > 1) {
      // Best of several: highest clean success over a 100-episode probe.
      auto probe_world = cfg.world;
      auto first = load_checkpoint(matches.front());
      probe_world.render_height = first.model.spec().height;
      probe_world.render_width = first.model.spec().width;
      cfg.resume_from = select_best_checkpoint(matches, probe_world, 100, selection_seed(cfg.eval.seed)).string();
    } else {
      cfg.resume_from = matches.front().string();
    }
  }

  const std::string run_id =
      !a.run_id.empty() ? a.run_id
                        : std::string(to_string(cfg.profile)) + "-s" + std::to_string(cfg.seed) + "-" +
                              timestamp("%Y%m%dT%H%M%SZ");
  const fs::path run_dir = fs::path(cfg.output_dir) / run_id;
  fs::create_directories(run_dir / "checkpoints");
  fs::create_directories(run_dir / "reports");
  write_text(run_dir / "config.resolved.json", to_json(cfg).dump(2) + "\n");

  std::ofstream log(run_dir / "run.log", std::ios::app);
  log << timestamp("%Y-%m-%dT%H:%M:%SZ") << " start " << run_id << "\n";

  TrainOptions o;
  o.profile = cfg.profile;
  o.config = cfg.training;
  o.world = cfg.world;
  o.spec = cfg.model;
  o.seed = cfg.seed;
  if (!cfg.resume_from.empty()) o.resume_from = cfg.resume_from;
  o.out_dir = run_dir;
  o.progress = [&](const MetricsRow& r) {
    log << timestamp("%Y-%m-%dT%H:%M:%SZ") << ' ' << format_metrics_row(r) << '\n' << std::flush;
  };
  auto result = train(o);
  log << timestamp("%Y-%m-%dT%H:%M:%SZ") << " done at step " << result.final_step << "\n";

  nlohmann::json summary = {{"run_dir", run_dir.string()},
                            {"arch", result.model.spec().arch_id()},
                            {"start_step", result.start_step},
                            {"final_step", result.final_step},
                            {"checkpoints", result.checkpoints.size()}};
  if (!result.metrics.empty()) {
    summary["last_success_rate"] = result.metrics.back().success_rate;
    summary["last_mean_return"] = result.metrics.back().mean_return;
  }
  out << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string battery;
  std::optional<int> episodes;
  std::string out_dir;
  std::vector<std::string> variants;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  const bool from_file = !a.common.config.empty();
  const int episodes = a.episodes ? *a.episodes : cfg.eval.episodes;
  if (episodes <= 0) fail(ErrorKind::Config, "--episodes must be positive, got " + std::to_string(episodes));
  const auto battery = battery_from(a.battery.empty() ? cfg.eval.battery : a.battery);
  const std::uint64_t seed = a.common.seed ? *a.common.seed : cfg.eval.seed;

  if (!a.variants.empty()) {
    std::vector<AblationVariant> variants;
    for (const auto& v : a.variants) {
      const auto eq = v.find('=');
      if (eq == std::string::npos || eq == 0) fail(ErrorKind::Config, "--variant expects name=checkpoint, got " + v);
      variants.push_back({v.substr(0, eq), v.substr(eq + 1)});
    }
    const fs::path first = variants.front().checkpoint;
    if (!fs::exists(first)) {
      fail(ErrorKind::Io, "ablation variant '" + variants.front().name + "': checkpoint " + first.string() + " not found");
    }
    const auto world = world_for(cfg, from_file, load_checkpoint(first).model.spec());
    const auto rows = run_ablation_protocol(variants, world, battery, episodes, seed);
    const std::string csv = ablation_csv(rows);
    if (!a.out_dir.empty()) write_text(fs::path(a.out_dir) / "ablation.csv", csv);
    out << csv;
    return 0;
  }

  if (a.checkpoint.empty()) fail(ErrorKind::Config, "eval needs --checkpoint (a file, 'oracle' or 'random')");
  std::unique_ptr<EvalPolicy> policy;
  std::optional<ModelCheckpoint> ck;
  WorldConfig world = cfg.world;
  if (a.checkpoint == "oracle") {
    policy = std::make_unique<ScriptedOracle>();
  } else if (a.checkpoint == "random") {
    policy = std::make_unique<RandomPolicy>();
  } else {
    ck = load_checkpoint(a.checkpoint);
    world = world_for(cfg, from_file, ck->model.spec());
    policy = std::make_unique<ModelPolicy>(ck->model);
  }
  const auto result = evaluate_battery(*policy, world, battery, episodes, seed);
  auto j = to_json(result);
  j["policy"] = policy->name();
  if (ck) j["step"] = ck->step;
  if (!a.out_dir.empty()) {
    write_text(fs::path(a.out_dir) / "eval.json", j.dump(2) + "\n");
    write_text(fs::path(a.out_dir) / "eval.csv", eval_csv(result));
  }
  out << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  Common common;
  std::string checkpoint;
  std::string dataset;
  std::string site;
  std::string out;
};

int cmd_align(const AlignArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  const FeatureSite site = parse_feature_site(a.site.empty() ? cfg.align.site : a.site);
  const auto dataset = load_dataset(a.dataset);
  const auto ck = load_checkpoint(a.checkpoint);
  const auto grid = cfg.align.grid.empty() ? default_ridge_grid() : cfg.align.grid;
  const auto report = align(ck.model, dataset, site, grid, cfg.align.folds);
  auto j = to_json(report);
  j["step"] = ck.step;
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  Common common;
  std::string pattern;
  std::string dataset;
  std::string battery;
  std::string site;
  std::optional<int> episodes;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  const auto paths = expand_glob(a.pattern);
  if (paths.empty()) fail(ErrorKind::Config, "no checkpoints match " + a.pattern);
  const FeatureSite site = parse_feature_site(a.site.empty() ? cfg.align.site : a.site);
  const int episodes = a.episodes ? *a.episodes : cfg.eval.episodes;
  if (episodes <= 0) fail(ErrorKind::Config, "--episodes must be positive, got " + std::to_string(episodes));
  const auto battery = battery_from(a.battery.empty() ? cfg.eval.battery : a.battery);
  const auto dataset = load_dataset(a.dataset);
  const auto world = world_for(cfg, !a.common.config.empty(), load_checkpoint(paths.front()).model.spec());
  const std::uint64_t seed = a.common.seed ? *a.common.seed : cfg.eval.seed;
  const auto report = checkpoint_sweep(paths, dataset, site, world, battery, episodes, seed);
  if (report.duplicate_steps > 0) {
    std::cerr << "warning: " << report.duplicate_steps << " checkpoint(s) share a step count; all rows kept\n";
  }
  const std::string csv = sweep_csv(report);
  if (!a.out.empty()) write_text(a.out, csv);
  out << csv;
  return 0;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  std::string checkpoint;
  std::string arch;
};

// "track1" / "track2" name the full-resolution final models; ids without
// "@HxW" default to the full render size.
ModelSpec inspect_spec(const std::string& arch) {
  if (arch == "track1") return ModelSpec{EncoderKind::SimpleCnn, true, true, 86, 155};
  if (arch == "track2") return ModelSpec{EncoderKind::DeepResNet, true, true, 86, 155};
  return ModelSpec::from_arch_id(arch.find('@') == std::string::npos ? arch + "@86x155" : arch);
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  std::optional<ModelCheckpoint> ck;
  std::optional<Model<float>> fresh;
  if (!a.checkpoint.empty()) {
    ck = load_checkpoint(a.checkpoint);
  } else if (!a.arch.empty()) {
    fresh.emplace(inspect_spec(a.arch), 0);
  } else {
    fail(ErrorKind::Config, "inspect needs --checkpoint or --arch");
  }
  const Model<float>& model = ck ? ck->model : *fresh;
  out << "Architecture: " << model.spec().arch_id() << "\n";
  if (ck) out << "Step: " << ck->step << "\n";
  out << std::left << std::setw(40) << "Layer" << std::setw(22) << "Type" << std::setw(16) << "Output Shape"
      << std::setw(28) << "Kernel / Units" << std::right << std::setw(14) << "Params" << "\n";
  long long total = 0;
  for (const auto& row : model.layer_table()) {
    std::string shape = "(";
    for (std::size_t i = 0; i < row.output_shape.size(); ++i) {
      shape += (i ? ", " : "") + std::to_string(row.output_shape[i]);
    }
    shape += ")";
    out << std::left << std::setw(40) << row.name << std::setw(22) << row.type << std::setw(16) << shape
        << std::setw(28) << row.details << std::right << std::setw(14) << thousands(row.params) << "\n";
    total += row.params;
  }
  out << std::left << std::setw(106) << "Total" << std::right << std::setw(14) << thousands(total) << "\n";
  return 0;
}

// ---------------------------------------------------------------- gen-dataset

struct GenArgs {
  Common common;
  std::string out;
  std::optional<int> stimuli;
  std::optional<std::uint64_t> cortex_seed;
  std::optional<int> sites;
  std::optional<double> sigma;
  std::string targets_from;
  std::string site;
};

int cmd_gen_dataset(const GenArgs& a, std::ostream& out) {
  RunConfig cfg = resolve(a.common);
  const int count = a.stimuli ? *a.stimuli : cfg.align.stimuli;
  if (count < 10) fail(ErrorKind::Config, "--stimuli must be at least 10");
  const std::uint64_t seed = a.common.seed ? *a.common.seed : cfg.align.dataset_seed;
  AlignmentDataset d;
  std::string source = "surrogate-cortex";
  if (!a.targets_from.empty()) {
    // Realisable targets: the model's own features replace the cortex responses.
    const auto ck = load_checkpoint(a.targets_from);
    const FeatureSite site = parse_feature_site(a.site.empty() ? cfg.align.site : a.site);
    d = generate_alignment_dataset(cfg.world, count, seed, [&](const std::vector<Observation>& stimuli) {
      return extract_features(ck.model, stimuli, site);
    });
    source = std::string("features:") + to_string(site);
  } else {
    SurrogateCortex cortex(cfg.world.render_height, cfg.world.render_width,
                           a.cortex_seed ? *a.cortex_seed : cfg.align.cortex_seed, a.sites ? *a.sites : cfg.align.sites,
                           a.sigma ? *a.sigma : cfg.align.sigma);
    d = generate_alignment_dataset(cfg.world, count, seed, cortex);
  }
  save_dataset(d, a.out);
  out << nlohmann::json{{"path", a.out},
                        {"rows", d.stimuli.size()},
                        {"height", d.height},
                        {"width", d.width},
                        {"neurons", d.responses.cols()},
                        {"train_rows", d.train_rows.size()},
                        {"test_rows", d.test_rows.size()},
                        {"responses", source}}
             .dump(2)
      << "\n";
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run configuration");
  app->add_option("--seed", c.seed, "master seed (overrides config and VF_SEED)");
  app->add_option("--jobs", c.jobs, "worker threads when not in deterministic mode");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visuomotor foraging lab: train, evaluate and align PPO agents", "vf"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "run PPO training for a profile");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--profile", train_args.profile, "track1_phase1 | track1_phase2 | track2");
  train_cmd->add_option("--resume", train_args.resume, "checkpoint (or glob: best of several) to start from");
  train_cmd->add_option("--steps", train_args.steps, "override Total Training Steps");
  train_cmd->add_option("--out", train_args.out_dir, "output root (overrides config and VF_OUT_DIR)");
  train_cmd->add_option("--run-id", train_args.run_id, "run directory name (default profile-seed-timestamp)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "success rates on clean and perturbed conditions");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file, or 'oracle' / 'random'");
  eval_cmd->add_option("--battery", eval_args.battery, "clean | standard | photometric | kind:strength,...");
  eval_cmd->add_option("--episodes", eval_args.episodes, "episodes per condition");
  eval_cmd->add_option("--out", eval_args.out_dir, "directory for eval.json / eval.csv / ablation.csv");
  eval_cmd->add_option("--variant", eval_args.variants, "name=checkpoint; repeat for an ablation table");

  AlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align", "ridge readout R^2 and RDM correlation against a dataset");
  add_common(align_cmd, align_args.common);
  align_cmd->add_option("--checkpoint", align_args.checkpoint, "checkpoint file")->required();
  align_cmd->add_option("--dataset", align_args.dataset, "alignment dataset file")->required();
  align_cmd->add_option("--site", align_args.site, "post-encoder | post-GLU");
  align_cmd->add_option("--out", align_args.out, "report JSON path");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "alignment and behaviour across a checkpoint series");
  add_common(sweep_cmd, sweep_args.common);
  sweep_cmd->add_option("--checkpoints", sweep_args.pattern, "glob, e.g. out/run/checkpoints/step_*.ckpt")->required();
  sweep_cmd->add_option("--dataset", sweep_args.dataset, "alignment dataset file")->required();
  sweep_cmd->add_option("--battery", sweep_args.battery, "perturbation battery");
  sweep_cmd->add_option("--site", sweep_args.site, "post-encoder | post-GLU");
  sweep_cmd->add_option("--episodes", sweep_args.episodes, "episodes per condition");
  sweep_cmd->add_option("--out", sweep_args.out, "CSV path");

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "per-layer parameter table");
  inspect_cmd->add_option("--checkpoint", inspect_args.checkpoint, "checkpoint file");
  inspect_cmd->add_option("--arch", inspect_args.arch, "track1, track2, or an id such as deep_resnet+norm+glu[@86x155]");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-dataset", "render stimuli and record surrogate responses");
  add_common(gen_cmd, gen_args.common);
  gen_cmd->add_option("--out", gen_args.out, "dataset file")->required();
  gen_cmd->add_option("--stimuli", gen_args.stimuli, "number of stimuli");
  gen_cmd->add_option("--cortex-seed", gen_args.cortex_seed, "surrogate filter-bank seed");
  gen_cmd->add_option("--sites", gen_args.sites, "number of surrogate neurons");
  gen_cmd->add_option("--sigma", gen_args.sigma, "response noise standard deviation");
  gen_cmd->add_option("--targets-from", gen_args.targets_from, "use this checkpoint's features as responses");
  gen_cmd->add_option("--site", gen_args.site, "feature site for --targets-from");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorKind::Config);
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*eval_cmd) return cmd_eval(eval_args, out);
    if (*align_cmd) return cmd_align(align_args, out);
    if (*sweep_cmd) return cmd_sweep(sweep_args, out);
    if (*inspect_cmd) return cmd_inspect(inspect_args, out);
    if (*gen_cmd) return cmd_gen_dataset(gen_args, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error [config]: " << e.what() << "\n";
    return exit_code(ErrorKind::Config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace vf
