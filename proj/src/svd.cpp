#include <algorithm>
#include <cmath>
#include <string>

#include "clinrec/baselines.hpp"
#include "clinrec/error.hpp"
#include "clinrec/rng.hpp"

namespace clinrec::baselines {
namespace {

constexpr double kRelativeTolerance = 1e-10;
constexpr int kMaxIterations = 1000;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Removes the components of `w` along the first `count` columns of `basis`
/// (stored as rows). Run twice for numerical orthogonality.
void orthogonalize(std::vector<double>& w, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) {
      const double c = dot(w, b);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * b[i];
    }
}

std::vector<double> gram_times(const Matrix& gram, const std::vector<double>& v) {
  std::vector<double> out(gram.rows(), 0.0);
  for (std::size_t r = 0; r < gram.rows(); ++r) out[r] = dot(gram.row(r), v);
  return out;
}

}  // namespace

Matrix interaction_matrix(const Cohort& cohort) {
  Matrix m(cohort.patients.size(), kCfItems);
  for (std::size_t u = 0; u < cohort.patients.size(); ++u) {
    const auto& p = cohort.patients[u];
    for (std::size_t j = 0; j < kNumProcedures; ++j) {
      m(u, j) = p.pcp_procedure_bits[j];
      m(u, kNumProcedures + j) = p.specialty_procedure_bits[j];
    }
  }
  return m;
}

Matrix reconstruct(const FactorModel& model) {
  Matrix out;
  multiply_transposed(model.user_factors, model.item_factors, out);
  for (double& v : out.values()) v += model.global_mean;
  return out;
}

FactorModel svd_fit_matrix(const Matrix& data, std::size_t rank, bool center) {
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  if (rank < 1 || rank > std::min(n, m))
    throw UsageError("svd_fit: rank " + std::to_string(rank) + " outside [1, " +
                     std::to_string(std::min(n, m)) + "]");

  FactorModel model;
  model.rank = rank;
  if (center) {
    double s = 0.0;
    for (double v : data.values()) s += v;
    model.global_mean = s / static_cast<double>(data.size());
  }
  Matrix a = data;
  for (double& v : a.values()) v -= model.global_mean;

  Matrix gram;
  multiply_transposed_lhs(a, a, gram);
  const double gram_scale = std::max(frobenius_norm(gram), 1e-300);

  // Power iteration with deflation: each new vector is kept orthogonal to
  // the converged ones, which deflates their eigenvalues out of the Gram.
  std::vector<std::vector<double>> basis;
  Rng rng(0x5bd1e995ULL);
  for (std::size_t k = 0; k < rank; ++k) {
    std::vector<double> v(m);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    orthogonalize(v, basis);
    double len = norm(v);
    for (double& x : v) x /= len;

    double eigenvalue = 0.0;
    for (int it = 0; it < kMaxIterations; ++it) {
      std::vector<double> w = gram_times(gram, v);
      const double next = dot(v, w);
      orthogonalize(w, basis);
      len = norm(w);
      if (len <= 1e-13 * gram_scale) {  // remaining space is numerically null
        eigenvalue = 0.0;
        break;
      }
      for (double& x : w) x /= len;
      v = std::move(w);
      const bool converged =
          it > 0 && std::abs(next - eigenvalue) <= kRelativeTolerance * std::abs(next);
      eigenvalue = next;
      if (converged) break;
    }
    orthogonalize(v, basis);
    len = norm(v);
    for (double& x : v) x /= len;
    basis.push_back(std::move(v));
  }

  // Rayleigh-Ritz: exact SVD of A restricted to span(basis).
  Matrix basis_m(m, rank);
  for (std::size_t k = 0; k < rank; ++k)
    for (std::size_t i = 0; i < m; ++i) basis_m(i, k) = basis[k][i];
  Matrix projected;  // n x rank
  multiply(a, basis_m, projected);
  Matrix small;
  multiply_transposed_lhs(projected, projected, small);
  const SymmetricEigen eig = symmetric_eigen(small);

  Matrix right;  // m x rank
  multiply(basis_m, eig.vectors, right);
  Matrix left;   // n x rank
  multiply(projected, eig.vectors, left);

  model.singular_values.resize(rank);
  const double sigma_floor = 1e-12 * std::sqrt(std::max(eig.values.front(), 0.0));
  for (std::size_t k = 0; k < rank; ++k) {
    const double sigma = std::sqrt(std::max(eig.values[k], 0.0));
    model.singular_values[k] = sigma;
    for (std::size_t u = 0; u < n; ++u)
      left(u, k) = sigma > sigma_floor ? left(u, k) / sigma : 0.0;
  }
  model.user_factors = std::move(left);
  model.item_factors = Matrix(m, rank);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < rank; ++k)
      model.item_factors(i, k) = right(i, k) * model.singular_values[k];
  return model;
}

FactorModel svd_fit(const Cohort& train, std::size_t rank) {
  if (train.patients.empty()) throw UsageError("svd_fit: empty training cohort");
  return svd_fit_matrix(interaction_matrix(train), rank, true);
}

std::vector<double> fold_in_predict(const FactorModel& model,
                                    std::span<const std::uint8_t> pcp_bits) {
  if (pcp_bits.size() != kNumProcedures)
    throw ShapeError("fold-in: expected 60 PCP bits, got " + std::to_string(pcp_bits.size()));
  if (model.item_factors.rows() != kCfItems || model.item_factors.cols() != model.rank)
    throw UsageError("fold-in: model is not a fitted 120-item factor model");
  const std::size_t k = model.rank;

  std::vector<double> user(k, 0.0);
  Matrix normal(k, k);
  std::vector<double> rhs(k, 0.0);
  bool any = false;
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    if (!pcp_bits[j]) continue;
    any = true;
    const auto item = model.item_factors.row(j);
    const double residual = 1.0 - model.global_mean;
    for (std::size_t a = 0; a < k; ++a) {
      rhs[a] += item[a] * residual;
      for (std::size_t b = 0; b < k; ++b) normal(a, b) += item[a] * item[b];
    }
  }
  if (any) {
    for (std::size_t a = 0; a < k; ++a) normal(a, a) += model.reg_lambda;
    // Pseudo-inverse solve: minimum-norm when the system is singular.
    const SymmetricEigen eig = symmetric_eigen(normal);
    const double cutoff = 1e-10 * std::max(eig.values.front(), 1e-300);
    for (std::size_t e = 0; e < k; ++e) {
      if (eig.values[e] <= cutoff) continue;
      double proj = 0.0;
      for (std::size_t a = 0; a < k; ++a) proj += eig.vectors(a, e) * rhs[a];
      proj /= eig.values[e];
      for (std::size_t a = 0; a < k; ++a) user[a] += proj * eig.vectors(a, e);
    }
  }

  std::vector<double> scores(kNumProcedures);
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    const auto item = model.item_factors.row(kNumProcedures + j);
    double s = model.global_mean;
    for (std::size_t a = 0; a < k; ++a) s += user[a] * item[a];
    scores[j] = std::clamp(s, 0.0, 1.0);
  }
  return scores;
}

}  // namespace clinrec::baselines
