#include "vf/eval/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vf/core/error.hpp"
#include "vf/core/rng.hpp"

namespace vf {

Matrix extract_features(const Model<float>& model, const std::vector<Observation>& stimuli, FeatureSite site,
                        int batch) {
  if (site == FeatureSite::PostGlu && !model.spec().use_glu) {
    fail(ErrorKind::Config, "model " + model.spec().arch_id() + " has no GLU stage; use site post-encoder");
  }
  const int h = model.spec().height, w = model.spec().width;
  const std::size_t obs_size = static_cast<std::size_t>(h) * w;
  const int n = static_cast<int>(stimuli.size());
  Matrix out;
  for (int first = 0; first < n; first += batch) {
    const int m = std::min(batch, n - first);
    std::vector<float> x(obs_size * m);
    for (int i = 0; i < m; ++i) {
      const Observation& o = stimuli[first + i];
      if (o.height != h || o.width != w || o.pixels.size() != obs_size) {
        fail(ErrorKind::Dimension, "stimulus " + std::to_string(first + i) + " is " + std::to_string(o.height) + "x" +
                                       std::to_string(o.width) + ", model " + model.spec().arch_id() + " expects " +
                                       std::to_string(h) + "x" + std::to_string(w));
      }
      std::copy(o.pixels.begin(), o.pixels.end(), x.begin() + i * obs_size);
    }
    GradTape<float> tape;
    auto r = model.forward(tape, Tensor<float>({m, h, w, 1}, std::move(x)), false);
    const auto& f = tape.value(site == FeatureSite::PostGlu ? r.gated : r.encoded);
    const int d = f.dim(-1);
    if (out.size() == 0) out.resize(n, d);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < d; ++j) out(first + i, j) = f[static_cast<std::size_t>(i) * d + j];
    }
  }
  return out;
}

RidgeReadout ridge_fit(const Matrix& x, const Matrix& y, double strength) {
  if (x.rows() != y.rows()) {
    fail(ErrorKind::Data, "ridge: " + std::to_string(x.rows()) + " feature rows vs " + std::to_string(y.rows()) +
                              " response rows");
  }
  if (x.rows() < 2) fail(ErrorKind::Data, "ridge needs at least 2 rows");
  if (!(strength >= 0)) fail(ErrorKind::Config, "ridge strength must be non-negative");
  const Eigen::RowVectorXd mx = x.colwise().mean();
  const Eigen::RowVectorXd my = y.colwise().mean();
  const Matrix xc = x.rowwise() - mx;
  const Matrix yc = y.rowwise() - my;
  Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? s(0) * 1e-12 * static_cast<double>(std::max(x.rows(), x.cols())) : 0.0;
  Eigen::VectorXd shrink(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    shrink(i) = s(i) > cutoff ? s(i) / (s(i) * s(i) + strength) : 0.0;
  }
  RidgeReadout r;
  r.weights = svd.matrixV() * shrink.asDiagonal() * (svd.matrixU().transpose() * yc);
  r.bias = my - mx * r.weights;
  r.strength = strength;
  r.grid = {strength};
  return r;
}

Matrix ridge_predict(const RidgeReadout& r, const Matrix& x) {
  if (x.cols() != r.weights.rows()) {
    fail(ErrorKind::Dimension, "readout expects " + std::to_string(r.weights.rows()) + " features, got " +
                                   std::to_string(x.cols()));
  }
  return (x * r.weights).rowwise() + r.bias;
}

R2Score r2_score(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    fail(ErrorKind::Dimension, "r2_score: prediction shape differs from targets");
  }
  R2Score s;
  s.per_neuron.assign(static_cast<std::size_t>(truth.cols()), std::numeric_limits<double>::quiet_NaN());
  double sum = 0;
  int used = 0;
  for (Eigen::Index k = 0; k < truth.cols(); ++k) {
    const double mean = truth.col(k).mean();
    const double ss_tot = (truth.col(k).array() - mean).square().sum();
    if (ss_tot == 0.0) {
      ++s.excluded;
      continue;
    }
    const double ss_res = (truth.col(k) - pred.col(k)).squaredNorm();
    s.per_neuron[static_cast<std::size_t>(k)] = 1.0 - ss_res / ss_tot;
    sum += s.per_neuron[static_cast<std::size_t>(k)];
    ++used;
  }
  s.mean = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::vector<double> default_ridge_grid() {
  std::vector<double> g(8);
  for (int i = 0; i < 8; ++i) g[i] = std::pow(10.0, -6.0 + 9.0 * i / 7.0);
  return g;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m.rows()) fail(ErrorKind::Data, "row index " + std::to_string(rows[i]) + " out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

RidgeEvaluation ridge_fit_predict(const Matrix& x, const Matrix& y, const std::vector<int>& train,
                                  const std::vector<int>& test, const std::vector<double>& grid, int folds) {
  if (x.rows() != y.rows()) {
    fail(ErrorKind::Data, "row-count mismatch: " + std::to_string(x.rows()) + " feature rows vs " +
                              std::to_string(y.rows()) + " response rows");
  }
  if (grid.empty()) fail(ErrorKind::Config, "ridge strength grid is empty");
  if (train.size() < 2) fail(ErrorKind::Data, "ridge needs at least 2 training rows");
  if (test.empty()) fail(ErrorKind::Data, "test split is empty");
  if (folds < 2 || static_cast<int>(train.size()) < folds) {
    fail(ErrorKind::Data, std::to_string(train.size()) + " training rows cannot form " + std::to_string(folds) + " folds");
  }

  const Matrix xt = take_rows(x, train), yt = take_rows(y, train);
  const int n = static_cast<int>(train.size());
  std::vector<double> cv(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const int lo = static_cast<int>(static_cast<long long>(n) * f / folds);
    const int hi = static_cast<int>(static_cast<long long>(n) * (f + 1) / folds);
    std::vector<int> fit_rows, val_rows;
    for (int i = 0; i < n; ++i) (i >= lo && i < hi ? val_rows : fit_rows).push_back(i);
    if (fit_rows.size() < 2) continue;
    const Matrix xf = take_rows(xt, fit_rows), yf = take_rows(yt, fit_rows);
    const Matrix xv = take_rows(xt, val_rows), yv = take_rows(yt, val_rows);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto r = ridge_fit(xf, yf, grid[g]);
      cv[g] += (ridge_predict(r, xv) - yv).squaredNorm() / static_cast<double>(yv.size());
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv[g] < cv[best]) best = g;
  }
  RidgeEvaluation out;
  out.readout = ridge_fit(xt, yt, grid[best]);
  out.readout.grid = grid;
  for (double& c : cv) c /= folds;
  out.readout.cv_mse = cv;
  out.test = r2_score(take_rows(y, test), ridge_predict(out.readout, take_rows(x, test)));
  return out;
}

Matrix rdm(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  Matrix centred = rows.colwise() - rows.rowwise().mean();
  Eigen::VectorXd norms = centred.rowwise().norm();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (norms(i) == 0.0 || norms(j) == 0.0) {
        d(i, j) = std::numeric_limits<double>::quiet_NaN();
      } else {
        d(i, j) = 1.0 - centred.row(i).dot(centred.row(j)) / (norms(i) * norms(j));
      }
    }
  }
  return d;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

RdmComparison rdm_correlation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorKind::Data, "RDM comparison needs equal row counts, got " + std::to_string(a.rows()) + " and " +
                              std::to_string(b.rows()));
  }
  if (a.rows() < 3) fail(ErrorKind::Data, "RDM comparison needs at least 3 rows");
  const Matrix da = rdm(a), db = rdm(b);
  std::vector<double> va, vb;
  RdmComparison out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      if (std::isnan(da(i, j)) || std::isnan(db(i, j))) {
        ++out.pairs_excluded;
        continue;
      }
      va.push_back(da(i, j));
      vb.push_back(db(i, j));
    }
  }
  out.pairs_used = static_cast<int>(va.size());
  if (va.size() < 2) fail(ErrorKind::Data, "fewer than 2 defined dissimilarity pairs");
  out.correlation = pearson(average_ranks(va), average_ranks(vb));
  return out;
}

void split_rows(int rows, double train_fraction, std::uint64_t seed, std::vector<int>& train, std::vector<int>& test) {
  if (rows < 2) fail(ErrorKind::Data, "cannot split fewer than 2 rows");
  if (!(train_fraction > 0 && train_fraction < 1)) fail(ErrorKind::Config, "train fraction must lie in (0, 1)");
  std::vector<int> perm(static_cast<std::size_t>(rows));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, kSeedDataset, 1));
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  int n_train = static_cast<int>(std::lround(train_fraction * rows));
  n_train = std::clamp(n_train, 1, rows - 1);
  train.assign(perm.begin(), perm.begin() + n_train);
  test.assign(perm.begin() + n_train, perm.end());
}

}  // namespace vf
