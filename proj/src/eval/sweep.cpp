#include "vf/eval/sweep.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "vf/core/error.hpp"
#include "vf/nn/checkpoint.hpp"

namespace vf {

AlignmentReport align(const Model<float>& model, const AlignmentDataset& d, FeatureSite site,
                      const std::vector<double>& grid, int folds) {
  d.validate();
  const Matrix features = extract_features(model, d.stimuli, site);
  auto fit = ridge_fit_predict(features, d.responses, d.train_rows, d.test_rows, grid, folds);
  auto rdm = rdm_correlation(features, d.responses);
  AlignmentReport r;
  r.arch_id = model.spec().arch_id();
  r.site = to_string(site);
  r.rows = static_cast<int>(features.rows());
  r.feature_dim = static_cast<int>(features.cols());
  r.neurons = static_cast<int>(d.responses.cols());
  r.r2 = fit.test.mean;
  r.excluded_neurons = fit.test.excluded;
  r.strength = fit.readout.strength;
  r.rdm_correlation = rdm.correlation;
  r.rdm_excluded_pairs = rdm.pairs_excluded;
  return r;
}

nlohmann::json to_json(const AlignmentReport& r) {
  return {{"arch", r.arch_id},
          {"site", r.site},
          {"rows", r.rows},
          {"feature_dim", r.feature_dim},
          {"neurons", r.neurons},
          {"r2", r.r2},
          {"excluded_neurons", r.excluded_neurons},
          {"ridge_strength", r.strength},
          {"rdm_correlation", r.rdm_correlation},
          {"rdm_excluded_pairs", r.rdm_excluded_pairs}};
}

SweepReport checkpoint_sweep(const std::vector<std::filesystem::path>& checkpoints, const AlignmentDataset& dataset,
                             FeatureSite site, const WorldConfig& world, const std::vector<PerturbationSpec>& battery,
                             int episodes, std::uint64_t seed) {
  if (checkpoints.size() < 2) {
    fail(ErrorKind::Config, "a sweep needs at least 2 checkpoints, got " + std::to_string(checkpoints.size()));
  }
  SweepReport report;
  for (const auto& path : checkpoints) {
    auto ck = load_checkpoint(path);
    const auto a = align(ck.model, dataset, site);
    ModelPolicy policy(ck.model);
    const auto e = evaluate_battery(policy, world, battery, episodes, seed);
    report.rows.push_back({path, ck.step, a.r2, a.rdm_correlation, e.asr, e.msr, e.final_score, e.gap(), false});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.step < b.step; });
  std::set<std::uint64_t> steps;
  for (const auto& r : report.rows) {
    if (!steps.insert(r.step).second) ++report.duplicate_steps;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].r2 > report.rows[best].r2) best = i;
  }
  report.rows[best].best_r2 = true;
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::ostringstream out;
  out.precision(9);
  out << "checkpoint,step,r2,rdm_correlation,asr,msr,final_score,gap,best_r2\n";
  for (const auto& r : report.rows) {
    out << r.checkpoint.filename().string() << ',' << r.step << ',' << r.r2 << ',' << r.rdm << ',' << r.asr << ','
        << r.msr << ',' << r.final_score << ',' << r.gap << ',' << (r.best_r2 ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace vf
