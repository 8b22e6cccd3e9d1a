#include "vf/ppo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <fstream>
#include <sstream>

#include "vf/core/error.hpp"
#include "vf/nn/checkpoint.hpp"
#include "vf/nn/policy.hpp"

namespace vf {

RolloutCollector::RolloutCollector(WorldConfig world, int num_envs, std::uint64_t seed) : world_(std::move(world)) {
  world_.validate();
  if (num_envs <= 0) fail(ErrorKind::Config, "num_envs must be positive");
  envs_.resize(static_cast<std::size_t>(num_envs));
  for (int i = 0; i < num_envs; ++i) {
    Slot& s = envs_[static_cast<std::size_t>(i)];
    s.env_seed = derive_seed(seed, kSeedEnv, static_cast<std::uint64_t>(i));
    s.policy_rng.reseed(derive_seed(seed, kSeedPolicy, static_cast<std::uint64_t>(i)));
    begin_episode(s);
  }
}

void RolloutCollector::begin_episode(Slot& s) {
  auto [state, obs] = reset(world_, derive_seed(s.env_seed, kSeedEnv, s.episodes));
  s.state = state;
  s.obs = std::move(obs);
  s.episode_return = 0.0;
}

void RolloutCollector::collect(Model<float>& model, RolloutBuffer& buffer, std::int64_t& global_step,
                               std::int64_t step_limit, const TransitionHook& hook) {
  const int n_env = num_envs();
  const int h = world_.render_height, w = world_.render_width;
  const std::size_t obs_size = static_cast<std::size_t>(h) * w;
  if (buffer.num_envs() != n_env || buffer.obs_size() != static_cast<int>(obs_size)) {
    fail(ErrorKind::Dimension, "rollout buffer layout does not match " + std::to_string(n_env) + " envs of " +
                                   std::to_string(h) + "x" + std::to_string(w));
  }
  buffer.clear();
  const bool norm = model.spec().use_norm;
  std::vector<float> raw(obs_size * n_env), input(obs_size * n_env);

  auto policy_outputs = [&](bool update_stats) {
    for (int e = 0; e < n_env; ++e) {
      std::copy(envs_[e].obs.pixels.begin(), envs_[e].obs.pixels.end(), raw.begin() + e * obs_size);
    }
    if (norm) {
      if (update_stats) model.normalizer().update(raw);
      model.normalizer().apply(raw, input);
    } else {
      input = raw;
    }
    GradTape<float> tape;
    auto r = model.forward(tape, Tensor<float>({n_env, h, w, 1}, input), false, true);
    return std::make_pair(tape.value(r.mean), tape.value(r.value));
  };

  const auto log_std = model.log_std();
  std::vector<PolicySample> samples(static_cast<std::size_t>(n_env));
  std::vector<StepResult> results(static_cast<std::size_t>(n_env));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_env));

  for (int t = 0; t < buffer.steps_per_env(); ++t) {
    if (global_step >= step_limit) return;
    auto [mean, value] = policy_outputs(true);
    for (int e = 0; e < n_env; ++e) {
      samples[e] = sample_policy<float>(mean.data().subspan(static_cast<std::size_t>(e) * 3, 3), log_std,
                                        value[static_cast<std::size_t>(e)], envs_[e].policy_rng, false);
    }

#pragma omp parallel for schedule(static)
    for (int e = 0; e < n_env; ++e) {
      try {
        const auto& a = samples[e].action;
        results[e] = step(world_, envs_[e].state, Action{a[0], a[1], a[2]});
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
    for (int e = 0; e < n_env; ++e) {
      if (!errors[e]) continue;
      try {
        std::rethrow_exception(errors[e]);
      } catch (const Error& err) {
        fail(err.kind(), "env " + std::to_string(e) + ": " + err.what());
      }
    }

    for (int e = 0; e < n_env; ++e) {
      Slot& s = envs_[e];
      StepResult& res = results[e];
      buffer.store(e, t, std::span<const float>(input).subspan(e * obs_size, obs_size), samples[e].action,
                   samples[e].log_prob, samples[e].value, res.reward, res.done);
      s.episode_return += res.reward;
      std::optional<EpisodeRecord> finished;
      if (res.done) {
        finished = EpisodeRecord{e, s.episode_return, res.state.step, res.success};
        ++s.episodes;
        begin_episode(s);
      } else {
        s.state = res.state;
        s.obs = std::move(res.observation);
      }
      ++global_step;
      if (hook) hook(global_step, finished);
      if (global_step >= step_limit) return;
    }
  }

  auto [mean, value] = policy_outputs(false);
  for (int e = 0; e < n_env; ++e) buffer.set_bootstrap(e, value[static_cast<std::size_t>(e)]);
}

MinibatchLoss ppo_minibatch_loss(Model<float>& model, const RolloutBuffer& buffer, std::span<const std::size_t> slots,
                                 const TrainingConfig& config, bool with_grads) {
  const int b = static_cast<int>(slots.size());
  if (b == 0) fail(ErrorKind::Protocol, "empty minibatch");
  const int h = model.spec().height, w = model.spec().width;
  const std::size_t obs_size = static_cast<std::size_t>(h) * w;
  std::vector<float> x(obs_size * b);
  for (int i = 0; i < b; ++i) {
    auto o = buffer.observation(slots[i]);
    std::copy(o.begin(), o.end(), x.begin() + i * obs_size);
  }
  GradTape<float> tape;
  auto r = model.forward(tape, Tensor<float>({b, h, w, 1}, std::move(x)), with_grads, true);
  const auto& mean = tape.value(r.mean);
  const auto& val = tape.value(r.value);
  const auto log_std = model.log_std();

  Tensor<float> d_mean({b, 3});
  Tensor<float> d_value({b, 1});
  double d_log_std[3] = {0, 0, 0};
  const double inv_b = 1.0 / b;
  const double eps = config.clip_epsilon;
  double policy = 0, value_loss = 0, clipped = 0, ratio_sum = 0, adv_sum = 0;
  for (int i = 0; i < b; ++i) {
    const std::size_t s = slots[i];
    const auto m = mean.data().subspan(static_cast<std::size_t>(i) * 3, 3);
    const auto& a = buffer.action(s);
    const double lp = gaussian_log_prob<float>(m, log_std, a);
    const double ratio = std::exp(lp - buffer.log_prob(s));
    const double adv = buffer.advantage(s);
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    policy -= std::min(unclipped, clipped_term);
    if (std::abs(ratio - 1.0) > eps) clipped += 1;
    ratio_sum += ratio;
    adv_sum += adv;
    // d(-min(.))/d(logp): the clipped branch is constant in the parameters.
    const double g = unclipped <= clipped_term ? -ratio * adv * inv_b : 0.0;
    for (int d = 0; d < 3; ++d) {
      const double sd = std::exp(static_cast<double>(log_std[d]));
      const double z = (a[d] - static_cast<double>(m[d])) / sd;
      d_mean[static_cast<std::size_t>(i) * 3 + d] = static_cast<float>(g * z / sd);
      d_log_std[d] += g * (z * z - 1.0);
    }
    const double err = static_cast<double>(val[static_cast<std::size_t>(i)]) - buffer.ret(s);
    value_loss += err * err;
    d_value[static_cast<std::size_t>(i)] = static_cast<float>(config.value_loss_coef * 2.0 * err * inv_b);
  }

  MinibatchLoss out;
  out.policy_loss = policy * inv_b;
  out.value_loss = value_loss * inv_b;
  out.entropy = gaussian_entropy<float>(log_std);
  out.total = out.policy_loss + config.value_loss_coef * out.value_loss - config.entropy_coef * out.entropy;
  out.clip_fraction = clipped * inv_b;
  out.mean_ratio = ratio_sum * inv_b;
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite PPO loss on a minibatch of " << b << ": policy=" << out.policy_loss
        << " value=" << out.value_loss << " entropy=" << out.entropy << " mean_ratio=" << out.mean_ratio
        << " mean_advantage=" << adv_sum * inv_b;
    fail(ErrorKind::Numeric, msg.str());
  }
  if (!with_grads) return out;

  model.zero_grad();
  const typename GradTape<float>::Seed seeds[] = {{r.mean, &d_mean}, {r.value, &d_value}};
  tape.backward(std::span<const typename GradTape<float>::Seed>(seeds));
  auto& ls = model.parameter("log_std");
  for (int d = 0; d < 3; ++d) {
    const double raw = ls.value[static_cast<std::size_t>(d)];
    if (raw < Model<float>::kLogStdMin || raw > Model<float>::kLogStdMax) continue;
    ls.grad[static_cast<std::size_t>(d)] += static_cast<float>(d_log_std[d] - config.entropy_coef);
  }
  return out;
}

UpdateStats ppo_update(Model<float>& model, Adam& optimizer, RolloutBuffer& buffer, const TrainingConfig& config,
                       double lr, Rng& shuffle_rng) {
  if (!buffer.full()) {
    fail(ErrorKind::Protocol, "update requested on a buffer holding " + std::to_string(buffer.size()) + " of " +
                                  std::to_string(buffer.capacity()) + " transitions");
  }
  if (config.normalize_advantages) buffer.normalize_advantages();
  const std::size_t n = static_cast<std::size_t>(buffer.capacity());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(n);
  UpdateStats stats;
  for (int epoch = 0; epoch < config.num_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    for (std::size_t start = 0; start + bs <= n; start += bs) {
      auto loss = ppo_minibatch_loss(model, buffer, std::span<const std::size_t>(order).subspan(start, bs), config,
                                     true);
      stats.grad_norm += clip_grad_norm(model, config.max_grad_norm);
      optimizer.step(model, lr);
      stats.policy_loss += loss.policy_loss;
      stats.value_loss += loss.value_loss;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double k = stats.minibatches;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.grad_norm /= k;
  }
  return stats;
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(r.step),
                static_cast<long long>(r.episodes), r.mean_return, r.success_rate, r.update.policy_loss,
                r.update.value_loss, r.update.entropy, r.update.clip_fraction, r.lr);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::int64_t step) {
  char name[64];
  std::snprintf(name, sizeof name, "step_%010lld.ckpt", static_cast<long long>(step));
  return out_dir / "checkpoints" / name;
}

namespace {

Model<float> initial_model(const TrainOptions& o, std::int64_t& start_step) {
  const bool deep_profile = o.profile == TrainingProfile::Track2;
  if (o.profile == TrainingProfile::Track1Phase2) {
    if (!o.resume_from) fail(ErrorKind::Config, "track1_phase2 needs a phase-1 checkpoint to resume from");
    auto ck = load_checkpoint(*o.resume_from);
    const ModelSpec& s = ck.model.spec();
    if (s.encoder != EncoderKind::SimpleCnn || s.use_glu) {
      fail(ErrorKind::Architecture, "track1_phase2 resumes from a SimpleCNN checkpoint without GLU, got " + s.arch_id());
    }
    start_step = static_cast<std::int64_t>(ck.step);
    return graft_glu(ck.model, derive_seed(o.seed, kSeedInit, 2));
  }
  if ((o.spec.encoder == EncoderKind::DeepResNet) != deep_profile) {
    fail(ErrorKind::Config, std::string("profile ") + to_string(o.profile) + " does not train " + o.spec.arch_id());
  }
  if (o.resume_from) {
    auto ck = load_checkpoint(*o.resume_from, o.spec);
    start_step = static_cast<std::int64_t>(ck.step);
    return std::move(ck.model);
  }
  start_step = 0;
  return Model<float>(o.spec, o.seed);
}

}  // namespace

TrainResult train(const TrainOptions& o) {
  const TrainingConfig& cfg = o.config;
  cfg.validate();
  o.world.validate();
  std::int64_t start = 0;
  Model<float> model = initial_model(o, start);
  const ModelSpec& spec = model.spec();
  if (spec.height != o.world.render_height || spec.width != o.world.render_width) {
    fail(ErrorKind::Config, "model " + spec.arch_id() + " does not match the " + std::to_string(o.world.render_height) +
                                "x" + std::to_string(o.world.render_width) + " environment rendering");
  }

  const int n_env = cfg.num_envs;
  RolloutCollector collector(o.world, n_env, o.seed);
  RolloutBuffer buffer(n_env, cfg.buffer_size / n_env, spec.height * spec.width);
  Adam adam;
  Rng shuffle(derive_seed(o.seed, kSeedShuffle));

  const bool write = !o.out_dir.empty();
  std::ofstream metrics;
  if (write) {
    std::filesystem::create_directories(o.out_dir / "checkpoints");
    metrics.open(o.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics) fail(ErrorKind::Io, "cannot write " + (o.out_dir / "metrics.csv").string());
    metrics << kMetricsHeader << '\n';
  }

  TrainResult result{model, start, start, {}, {}};
  std::deque<EpisodeRecord> recent;
  std::int64_t episodes = 0;
  UpdateStats last;
  std::int64_t step = start;
  const std::int64_t end = start + cfg.total_steps;

  auto save = [&](const std::filesystem::path& path, std::int64_t at) {
    if (!write) return;
    save_checkpoint(model, static_cast<std::uint64_t>(at), shuffle.state(), path);
    result.checkpoints.push_back(path);
  };

  auto hook = [&](std::int64_t at, const std::optional<EpisodeRecord>& finished) {
    if (finished) {
      ++episodes;
      recent.push_back(*finished);
      if (recent.size() > 100) recent.pop_front();
    }
    if (at % cfg.checkpoint_interval == 0) save(checkpoint_path(o.out_dir, at), at);
    if (at % cfg.summary_frequency == 0) {
      MetricsRow row;
      row.step = at;
      row.episodes = episodes;
      for (const auto& ep : recent) {
        row.mean_return += ep.episode_return;
        row.success_rate += ep.success ? 1.0 : 0.0;
      }
      if (!recent.empty()) {
        row.mean_return /= static_cast<double>(recent.size());
        row.success_rate /= static_cast<double>(recent.size());
      }
      row.update = last;
      row.lr = lr_at(at - start, cfg);
      result.metrics.push_back(row);
      if (write) metrics << format_metrics_row(row) << '\n' << std::flush;
      if (o.progress) o.progress(row);
    }
  };

  while (step < end) {
    collector.collect(model, buffer, step, end, hook);
    if (!buffer.full()) break;
    buffer.compute_advantages(cfg.discount, cfg.gae_lambda, cfg.time_horizon);
    last = ppo_update(model, adam, buffer, cfg, lr_at(step - start, cfg), shuffle);
  }

  save(o.out_dir / "checkpoints" / "final.ckpt", step);
  result.final_step = step;
  result.model = std::move(model);
  return result;
}

}  // namespace vf
