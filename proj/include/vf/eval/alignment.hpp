#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "vf/env/world.hpp"
#include "vf/nn/model.hpp"

namespace vf {

using Matrix = Eigen::MatrixXd;

// Row i = the model's activation at `site` for stimulus i, normaliser frozen.
// Errors: Config when the site is post-GLU and the model has no gate;
// Dimension when a stimulus does not match the model input.
Matrix extract_features(const Model<float>& model, const std::vector<Observation>& stimuli, FeatureSite site,
                        int batch = 32);

struct RidgeReadout {
  Matrix weights;            // features x neurons
  Eigen::RowVectorXd bias;   // neurons
  double strength = 0;       // chosen from `grid`
  std::vector<double> grid;
  std::vector<double> cv_mse;  // per grid entry (empty for a direct fit)
};

// Closed-form ridge on centred data through a thin SVD of the features:
// W = V diag(s / (s^2 + strength)) U^T Yc, b = mean(Y) - mean(X) W.
RidgeReadout ridge_fit(const Matrix& features, const Matrix& responses, double strength);
Matrix ridge_predict(const RidgeReadout& readout, const Matrix& features);

struct R2Score {
  double mean = 0;                // uniform over included neurons
  std::vector<double> per_neuron; // NaN for excluded neurons
  int excluded = 0;               // neurons with SS_tot = 0
};

// 1 - SS_res / SS_tot per column.
R2Score r2_score(const Matrix& truth, const Matrix& predicted);

// Eight log-spaced strengths from 1e-6 to 1e3.
std::vector<double> default_ridge_grid();

struct RidgeEvaluation {
  RidgeReadout readout;
  R2Score test;
};

// k-fold CV over the training rows (contiguous folds in the given order)
// picks the strength with the lowest mean squared error; the final readout is
// refitted on every training row and scored on the test rows.
// Errors: Data for fewer than 2 training rows, fewer rows than folds, or an
// empty grid / test split.
RidgeEvaluation ridge_fit_predict(const Matrix& features, const Matrix& responses, const std::vector<int>& train_rows,
                                  const std::vector<int>& test_rows, const std::vector<double>& grid, int folds = 5);

struct RdmComparison {
  double correlation = 0;
  int pairs_used = 0;
  int pairs_excluded = 0;  // pairs involving a constant row in either matrix
};

// Representational dissimilarity: 1 - Pearson correlation between rows.
// Rows with zero variance make their pairs undefined (NaN).
Matrix rdm(const Matrix& rows);

// Spearman correlation (average ranks for ties) between the strict upper
// triangles of both RDMs. Errors: Data for unequal row counts or fewer than 3 rows.
RdmComparison rdm_correlation(const Matrix& a, const Matrix& b);

// Average ranks, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

// Disjoint, covering split: the first round(train_fraction * rows) entries of a
// seeded permutation form the training set.
void split_rows(int rows, double train_fraction, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test);

Matrix take_rows(const Matrix& m, const std::vector<int>& rows);

}  // namespace vf
