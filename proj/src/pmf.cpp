#include <cmath>
#include <numeric>
#include <string>

#include "clinrec/baselines.hpp"
#include "clinrec/error.hpp"
#include "clinrec/rng.hpp"

namespace clinrec::baselines {

double pmf_objective(const Matrix& data, const FactorModel& model) {
  const std::size_t k = model.rank;
  double loss = 0.0;
  for (std::size_t u = 0; u < data.rows(); ++u) {
    const auto uf = model.user_factors.row(u);
    for (std::size_t i = 0; i < data.cols(); ++i) {
      const auto vf = model.item_factors.row(i);
      double pred = 0.0;
      for (std::size_t a = 0; a < k; ++a) pred += uf[a] * vf[a];
      const double e = data(u, i) - model.global_mean - pred;
      loss += e * e;
    }
  }
  double norms = 0.0;
  for (double v : model.user_factors.values()) norms += v * v;
  for (double v : model.item_factors.values()) norms += v * v;
  return loss + model.reg_lambda * norms;
}

PmfFit pmf_fit_matrix(const Matrix& data, const PmfConfig& config) {
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  const std::size_t k = config.rank;
  if (n == 0 || m == 0) throw UsageError("pmf_fit: empty matrix");
  if (k < 1) throw UsageError("pmf_fit: rank must be >= 1");
  if (!(config.reg_lambda >= 0.0)) throw UsageError("pmf_fit: reg_lambda must be >= 0");
  if (!(config.learning_rate > 0.0)) throw UsageError("pmf_fit: learning_rate must be > 0");
  if (config.epochs < 1) throw UsageError("pmf_fit: epochs must be >= 1");

  PmfFit fit;
  FactorModel& model = fit.model;
  model.rank = k;
  model.reg_lambda = config.reg_lambda;
  model.global_mean =
      std::accumulate(data.values().begin(), data.values().end(), 0.0) / static_cast<double>(data.size());
  model.user_factors = Matrix(n, k);
  model.item_factors = Matrix(m, k);
  Rng init(derive_seed(config.seed, "pmf/init"));
  for (double& v : model.user_factors.values()) v = init.normal(0.0, 0.1);
  for (double& v : model.item_factors.values()) v = init.normal(0.0, 0.1);

  Rng order_rng(derive_seed(config.seed, "pmf/order"));
  std::vector<std::size_t> cells(n * m);
  std::iota(cells.begin(), cells.end(), std::size_t{0});

  const double lr = config.learning_rate;
  const double user_reg = config.reg_lambda / static_cast<double>(m);
  const double item_reg = config.reg_lambda / static_cast<double>(n);
  std::vector<double> old_u(k);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(cells);
    for (std::size_t cell : cells) {
      const std::size_t u = cell / m;
      const std::size_t i = cell % m;
      auto uf = model.user_factors.row(u);
      auto vf = model.item_factors.row(i);
      double pred = 0.0;
      for (std::size_t a = 0; a < k; ++a) pred += uf[a] * vf[a];
      const double e = data(u, i) - model.global_mean - pred;
      std::ranges::copy(uf, old_u.begin());
      for (std::size_t a = 0; a < k; ++a) {
        uf[a] -= lr * (-2.0 * e * vf[a] + 2.0 * user_reg * uf[a]);
        vf[a] -= lr * (-2.0 * e * old_u[a] + 2.0 * item_reg * vf[a]);
      }
    }
    const double objective = pmf_objective(data, model);
    if (!std::isfinite(objective))
      throw TrainingError("pmf_fit: factors diverged at epoch " + std::to_string(epoch) +
                          "; try a smaller learning rate");
    fit.objective_history.push_back(objective);
  }
  return fit;
}

PmfFit pmf_fit(const Cohort& train, const PmfConfig& config) {
  if (train.patients.empty()) throw UsageError("pmf_fit: empty training cohort");
  return pmf_fit_matrix(interaction_matrix(train), config);
}

}  // namespace clinrec::baselines
