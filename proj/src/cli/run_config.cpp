#include "vf/cli/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "vf/core/error.hpp"
#include "vf/env/io.hpp"
#include "vf/env/perturb.hpp"

namespace vf {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Config, where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::Config, where + "." + key + ": unknown key");
  }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, where + "." + key + ": " + e.what());
  }
}

nlohmann::json load_tree(const std::filesystem::path& path, std::set<std::string>& chain) {
  const std::string key = std::filesystem::weakly_canonical(path).string();
  if (!chain.insert(key).second) fail(ErrorKind::Config, "config inheritance cycle through " + path.string());
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Config, path.string() + ": top level must be an object");
  if (j.contains("inherits")) {
    if (!j["inherits"].is_string()) fail(ErrorKind::Config, path.string() + ": inherits must be a path string");
    auto base = load_tree(path.parent_path() / j["inherits"].get<std::string>(), chain);
    j.erase("inherits");
    base.merge_patch(j);
    j = std::move(base);
  }
  return j;
}

}  // namespace

RunConfig RunConfig::defaults(TrainingProfile profile) {
  RunConfig c;
  c.profile = profile;
  c.training = TrainingConfig::for_profile(profile);
  c.model.encoder = profile == TrainingProfile::Track2 ? EncoderKind::DeepResNet : EncoderKind::SimpleCnn;
  c.model.use_norm = true;
  c.model.use_glu = profile != TrainingProfile::Track1Phase1;
  c.model.height = c.world.render_height;
  c.model.width = c.world.render_width;
  return c;
}

void RunConfig::validate() const {
  world.validate();
  training.validate();
  if (precision != "single") {
    fail(ErrorKind::Config, "precision: only \"single\" is supported for runs (double is reserved for gradient checks)");
  }
  if (jobs <= 0) fail(ErrorKind::Config, "jobs: must be positive");
  if (model.height != world.render_height || model.width != world.render_width) {
    fail(ErrorKind::Config, "model input must match environment render size");
  }
  if ((model.encoder == EncoderKind::DeepResNet) != (profile == TrainingProfile::Track2)) {
    fail(ErrorKind::Config, std::string("model.encoder does not match profile ") + to_string(profile));
  }
  if (model.encoder == EncoderKind::DeepResNet) deep_stage_dims(model.height, model.width);
  if (eval.episodes <= 0) fail(ErrorKind::Config, "evaluation.episodes: must be positive");
  perturbation_battery(eval.battery);
  parse_feature_site(align.site);
  if (align.stimuli < 10) fail(ErrorKind::Config, "alignment.stimuli: need at least 10");
  if (align.sites <= 0) fail(ErrorKind::Config, "alignment.sites: must be positive");
  if (!(align.sigma >= 0)) fail(ErrorKind::Config, "alignment.sigma: must be non-negative");
  if (align.folds < 2) fail(ErrorKind::Config, "alignment.folds: need at least 2");
  for (double g : align.grid) {
    if (!(g >= 0)) fail(ErrorKind::Config, "alignment.grid: strengths must be non-negative");
  }
}

nlohmann::json load_config_tree(const std::filesystem::path& path) {
  std::set<std::string> chain;
  return load_tree(path, chain);
}

ModelSpec parse_model_json(const nlohmann::json& j, ModelSpec m) {
  reject_unknown(j, {"encoder", "use_norm", "use_glu"}, "model");
  if (j.contains("encoder")) {
    const std::string e = j["encoder"].is_string() ? j["encoder"].get<std::string>() : "";
    if (e == "simple_cnn") m.encoder = EncoderKind::SimpleCnn;
    else if (e == "deep_resnet") m.encoder = EncoderKind::DeepResNet;
    else fail(ErrorKind::Config, "model.encoder: expected \"simple_cnn\" or \"deep_resnet\"");
  }
  read(j, "use_norm", m.use_norm, "model");
  read(j, "use_glu", m.use_glu, "model");
  return m;
}

RunConfig run_config_from_json(const nlohmann::json& j, std::optional<TrainingProfile> profile_override) {
  reject_unknown(j, {"profile", "seed", "output_dir", "precision", "deterministic", "jobs", "resume_from", "environment",
                     "model", "training", "evaluation", "alignment"},
                 "config");
  TrainingProfile profile = TrainingProfile::Track1Phase1;
  if (j.contains("profile")) {
    if (!j["profile"].is_string()) fail(ErrorKind::Config, "config.profile: expected a string");
    profile = parse_profile(j["profile"].get<std::string>());
  }
  if (profile_override) profile = *profile_override;
  RunConfig c = RunConfig::defaults(profile);
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "precision", c.precision, "config");
  read(j, "deterministic", c.deterministic, "config");
  read(j, "jobs", c.jobs, "config");
  read(j, "resume_from", c.resume_from, "config");
  if (j.contains("environment")) {
    // Environment keys override the defaults one by one.
    nlohmann::json env = to_json(c.world);
    env.merge_patch(j["environment"]);
    c.world = world_config_from_json(env);
  }
  if (j.contains("model")) c.model = parse_model_json(j["model"], c.model);
  c.model.height = c.world.render_height;
  c.model.width = c.world.render_width;
  if (j.contains("training")) c.training = training_config_from_json(j["training"], c.training);
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    reject_unknown(e, {"battery", "episodes", "seed"}, "evaluation");
    read(e, "battery", c.eval.battery, "evaluation");
    read(e, "episodes", c.eval.episodes, "evaluation");
    read(e, "seed", c.eval.seed, "evaluation");
  }
  if (j.contains("alignment")) {
    const auto& a = j["alignment"];
    reject_unknown(a, {"site", "stimuli", "sites", "sigma", "folds", "dataset_seed", "cortex_seed", "grid"}, "alignment");
    read(a, "site", c.align.site, "alignment");
    read(a, "stimuli", c.align.stimuli, "alignment");
    read(a, "sites", c.align.sites, "alignment");
    read(a, "sigma", c.align.sigma, "alignment");
    read(a, "folds", c.align.folds, "alignment");
    read(a, "dataset_seed", c.align.dataset_seed, "alignment");
    read(a, "cortex_seed", c.align.cortex_seed, "alignment");
    read(a, "grid", c.align.grid, "alignment");
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["profile"] = to_string(c.profile);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["precision"] = c.precision;
  j["deterministic"] = c.deterministic;
  j["jobs"] = c.jobs;
  j["resume_from"] = c.resume_from;
  j["environment"] = to_json(c.world);
  j["model"] = {{"encoder", c.model.encoder == EncoderKind::SimpleCnn ? "simple_cnn" : "deep_resnet"},
                {"use_norm", c.model.use_norm},
                {"use_glu", c.model.use_glu}};
  j["training"] = to_json(c.training);
  j["evaluation"] = {{"battery", c.eval.battery}, {"episodes", c.eval.episodes}, {"seed", c.eval.seed}};
  j["alignment"] = {{"site", c.align.site},
                    {"stimuli", c.align.stimuli},
                    {"sites", c.align.sites},
                    {"sigma", c.align.sigma},
                    {"folds", c.align.folds},
                    {"dataset_seed", c.align.dataset_seed},
                    {"cortex_seed", c.align.cortex_seed},
                    {"grid", c.align.grid}};
  return j;
}

void apply_env_overrides(RunConfig& c) {
  if (const char* s = std::getenv("VF_SEED"); s && *s) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(s, &used);
      if (s[used] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      fail(ErrorKind::Config, std::string("VF_SEED: not an unsigned integer: ") + s);
    }
  }
  if (const char* d = std::getenv("VF_OUT_DIR"); d && *d) c.output_dir = d;
}

}  // namespace vf
