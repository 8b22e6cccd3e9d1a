#include "vf/eval/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <sstream>

#include "vf/core/error.hpp"
#include "vf/nn/checkpoint.hpp"

namespace vf {

void ModelPolicy::act(std::span<const EpisodeView> batch, std::span<Action> out) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) return;
  const int h = model_.spec().height, w = model_.spec().width;
  const std::size_t obs_size = static_cast<std::size_t>(h) * w;
  std::vector<float> x(obs_size * n);
  for (int i = 0; i < n; ++i) {
    const Observation& o = *batch[i].observation;
    if (o.height != h || o.width != w) {
      fail(ErrorKind::Dimension, "model " + model_.spec().arch_id() + " cannot take " + std::to_string(o.height) +
                                     "x" + std::to_string(o.width) + " observations");
    }
    std::copy(o.pixels.begin(), o.pixels.end(), x.begin() + i * obs_size);
  }
  GradTape<float> tape;
  auto r = model_.forward(tape, Tensor<float>({n, h, w, 1}, std::move(x)), false);
  const auto& mean = tape.value(r.mean);
  for (int i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i) * 3;
    out[i] = Action{mean[k], mean[k + 1], mean[k + 2]};
  }
}

void ScriptedOracle::act(std::span<const EpisodeView> batch, std::span<Action> out) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const WorldState& s = *batch[i].state;
    double bearing = std::atan2(s.target_y - s.y, s.target_x - s.x) - s.heading;
    bearing = std::remainder(bearing, 2.0 * std::numbers::pi);
    out[i] = Action{std::abs(bearing) < 0.5 ? 1.0 : 0.0, 0.0, std::clamp(4.0 * bearing, -1.0, 1.0)};
  }
}

void RandomPolicy::act(std::span<const EpisodeView> batch, std::span<Action> out) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng(derive_seed(batch[i].episode_seed, kSeedPolicy, static_cast<std::uint64_t>(batch[i].t)));
    out[i].forward = rng.uniform(-1.0, 1.0);
    out[i].strafe = rng.uniform(-1.0, 1.0);
    out[i].rotate = rng.uniform(-1.0, 1.0);
  }
}

ConditionResult evaluate_success(EvalPolicy& policy, const WorldConfig& world, const PerturbationSpec& perturbation,
                                 int episodes, std::uint64_t seed, int batch) {
  if (episodes <= 0) fail(ErrorKind::Config, "episodes must be positive, got " + std::to_string(episodes));
  if (batch <= 0) fail(ErrorKind::Config, "evaluation batch must be positive");
  perturbation.validate();
  world.validate();

  ConditionResult result;
  result.spec = perturbation;
  result.episodes = episodes;
  double total_length = 0, total_return = 0;

  for (int first = 0; first < episodes; first += batch) {
    const int n = std::min(batch, episodes - first);
    std::vector<std::uint64_t> seeds(n);
    std::vector<WorldState> states(n);
    std::vector<Observation> raw(n), seen(n);
    std::vector<double> returns(n, 0.0);
    std::vector<char> active(n, 1);
    for (int i = 0; i < n; ++i) {
      seeds[i] = derive_seed(seed, kSeedEval, static_cast<std::uint64_t>(first + i));
      auto [s, o] = reset(world, seeds[i]);
      states[i] = s;
      raw[i] = std::move(o);
    }
    std::vector<int> live(n);
    std::vector<EpisodeView> views;
    std::vector<Action> actions;
    std::vector<StepResult> results(n);
    std::vector<std::exception_ptr> errors(n);
    while (true) {
      live.clear();
      for (int i = 0; i < n; ++i) {
        if (active[i]) live.push_back(i);
      }
      if (live.empty()) break;
      const int m = static_cast<int>(live.size());
#pragma omp parallel for schedule(static)
      for (int k = 0; k < m; ++k) {
        const int i = live[k];
        seen[i] = apply_perturbation(raw[i], perturbation,
                                     derive_seed(seeds[i], kSeedNoise, static_cast<std::uint64_t>(states[i].step)));
      }
      views.resize(m);
      actions.assign(m, Action{});
      for (int k = 0; k < m; ++k) {
        const int i = live[k];
        views[k] = EpisodeView{&seen[i], &states[i], seeds[i], states[i].step};
      }
      policy.act(views, actions);
#pragma omp parallel for schedule(static)
      for (int k = 0; k < m; ++k) {
        const int i = live[k];
        try {
          results[i] = step(world, states[i], actions[k]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
      for (int k = 0; k < m; ++k) {
        const int i = live[k];
        if (errors[i]) std::rethrow_exception(errors[i]);
        StepResult& r = results[i];
        returns[i] += r.reward;
        states[i] = r.state;
        raw[i] = std::move(r.observation);
        if (r.done) {
          active[i] = 0;
          result.successes += r.success ? 1 : 0;
          total_length += r.state.step;
          total_return += returns[i];
        }
      }
    }
  }
  result.success_rate = static_cast<double>(result.successes) / episodes;
  result.mean_length = total_length / episodes;
  result.mean_return = total_return / episodes;
  return result;
}

double final_score(double asr, double msr) {
  auto check = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream msg;
      msg << what << " must lie in [0, 1], got " << v;
      fail(ErrorKind::Data, msg.str());
    }
  };
  check(asr, "ASR");
  check(msr, "MSR");
  return 0.5 * asr + 0.5 * msr;
}

EvalResult evaluate_battery(EvalPolicy& policy, const WorldConfig& world, const std::vector<PerturbationSpec>& battery,
                            int episodes, std::uint64_t seed) {
  if (episodes <= 0) fail(ErrorKind::Config, "episodes must be positive, got " + std::to_string(episodes));
  for (const auto& p : battery) p.validate();
  EvalResult r;
  r.episodes = episodes;
  r.seed = seed;
  r.conditions.push_back(evaluate_success(policy, world, PerturbationSpec{}, episodes, seed));
  r.asr = r.conditions[0].success_rate;
  double sum = 0;
  int count = 0;
  for (const auto& p : battery) {
    if (p.kind == PerturbationKind::None) continue;
    r.conditions.push_back(evaluate_success(policy, world, p, episodes, seed));
    sum += r.conditions.back().success_rate;
    ++count;
  }
  r.msr = count > 0 ? sum / count : r.asr;
  r.final_score = final_score(r.asr, r.msr);
  return r;
}

double subset_success(const EvalResult& result, const std::vector<PerturbationSpec>& subset) {
  double sum = 0;
  int count = 0;
  for (const auto& p : subset) {
    for (const auto& c : result.conditions) {
      if (c.spec.name() == p.name()) {
        sum += c.success_rate;
        ++count;
        break;
      }
    }
  }
  if (count == 0) fail(ErrorKind::Data, "none of the requested conditions were evaluated");
  return sum / count;
}

nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : r.conditions) {
    conds.push_back({{"condition", c.spec.name()},
                     {"episodes", c.episodes},
                     {"successes", c.successes},
                     {"success_rate", c.success_rate},
                     {"mean_length", c.mean_length},
                     {"mean_return", c.mean_return}});
  }
  return {{"ASR", r.asr},       {"MSR", r.msr},         {"final_score", r.final_score}, {"gap", r.gap()},
          {"episodes", r.episodes}, {"seed", r.seed}, {"conditions", conds}};
}

std::string eval_csv(const EvalResult& r) {
  std::ostringstream out;
  out.precision(9);
  out << "condition,episodes,successes,success_rate,mean_length,mean_return\n";
  for (const auto& c : r.conditions) {
    out << c.spec.name() << ',' << c.episodes << ',' << c.successes << ',' << c.success_rate << ',' << c.mean_length
        << ',' << c.mean_return << '\n';
  }
  return out.str();
}

std::vector<AblationRow> run_ablation_protocol(const std::vector<AblationVariant>& variants, const WorldConfig& world,
                                               const std::vector<PerturbationSpec>& battery, int episodes,
                                               std::uint64_t seed) {
  for (const auto& v : variants) {
    if (!std::filesystem::exists(v.checkpoint)) {
      fail(ErrorKind::Io, "ablation variant '" + v.name + "': checkpoint " + v.checkpoint.string() + " not found");
    }
  }
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto ck = load_checkpoint(v.checkpoint);
    ModelPolicy policy(ck.model);
    auto r = evaluate_battery(policy, world, battery, episodes, seed);
    rows.push_back({v.name, ck.model.spec().arch_id(), r.asr, r.msr, final_score(r.asr, r.msr), r.gap()});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out.precision(9);
  out << "variant,arch,asr,msr,final_score,gap\n";
  for (const auto& r : rows) {
    out << r.variant << ',' << r.arch_id << ',' << r.asr << ',' << r.msr << ',' << r.final_score << ',' << r.gap
        << '\n';
  }
  return out.str();
}

std::filesystem::path select_best_checkpoint(const std::vector<std::filesystem::path>& checkpoints,
                                             const WorldConfig& world, int episodes, std::uint64_t seed) {
  if (checkpoints.empty()) fail(ErrorKind::Config, "no checkpoints to choose from");
  std::filesystem::path best;
  double best_rate = -1;
  std::uint64_t best_step = 0;
  for (const auto& path : checkpoints) {
    auto ck = load_checkpoint(path);
    ModelPolicy policy(ck.model);
    const double rate = evaluate_success(policy, world, PerturbationSpec{}, episodes, seed).success_rate;
    if (rate > best_rate || (rate == best_rate && ck.step > best_step)) {
      best = path;
      best_rate = rate;
      best_step = ck.step;
    }
  }
  return best;
}

}  // namespace vf
