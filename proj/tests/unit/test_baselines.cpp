#include <Eigen/Dense>
#include <cmath>

#include "clinrec/baselines.hpp"
#include "clinrec/error.hpp"
#include "clinrec/eval.hpp"
#include "clinrec/rng.hpp"
#include "clinrec/synth.hpp"
#include "doctest.h"

using namespace clinrec;
using namespace clinrec::baselines;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

double residual(const Matrix& data, const FactorModel& model) {
  const Matrix rec = reconstruct(model);
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double d = data.values()[i] - rec.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Best rank-k residual from Eigen's SVD of the (optionally centered) matrix.
double eigen_residual(const Matrix& data, std::size_t k, bool center) {
  Eigen::MatrixXd a = to_eigen(data);
  if (center) a.array() -= a.mean();
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues();
  double r = 0.0;
  for (Eigen::Index i = static_cast<Eigen::Index>(k); i < s.size(); ++i) r += s[i] * s[i];
  return std::sqrt(r);
}

Matrix low_rank_plus_noise(std::size_t n, std::size_t k, double noise, std::uint64_t seed) {
  const Matrix u = random_matrix(n, k, seed);
  const Matrix v = random_matrix(n, k, seed + 1);
  Matrix out;
  multiply_transposed(u, v, out);
  Rng rng(seed + 2);
  for (double& x : out.values()) x += noise * rng.normal();
  return out;
}

Cohort cohort(std::size_t n, std::uint64_t seed, double signal = 1.0) {
  synth::GeneratorConfig c;
  c.num_patients = n;
  c.seed = seed;
  c.signal_strength = signal;
  return synth::generate(c);
}

double norm_sq(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("svd: full rank reconstructs exactly") {
  const Matrix a = random_matrix(30, 12, 1);
  CHECK(residual(a, svd_fit_matrix(a, 12)) < 1e-8);
  const Matrix tall = random_matrix(8, 20, 2);
  CHECK(residual(tall, svd_fit_matrix(tall, 8)) < 1e-8);
}

TEST_CASE("svd: rank-1 outer product is recovered by a rank-1 fit") {
  const Matrix u = random_matrix(15, 1, 3), v = random_matrix(9, 1, 4);
  Matrix a;
  multiply_transposed(u, v, a);
  CHECK(residual(a, svd_fit_matrix(a, 1, false)) < 1e-8);
}

TEST_CASE("svd: diag(1,2,3) rank 2 leaves residual 1") {
  Matrix a(3, 3);
  a(0, 0) = 1;
  a(1, 1) = 2;
  a(2, 2) = 3;
  const FactorModel m = svd_fit_matrix(a, 2, false);
  CHECK(std::abs(residual(a, m) - 1.0) < 1e-8);
  CHECK(std::abs(eigen_residual(a, 2, false) - 1.0) < 1e-12);
  CHECK(std::abs(m.singular_values[0] - 3.0) < 1e-8);
  CHECK(std::abs(m.singular_values[1] - 2.0) < 1e-8);
}

TEST_CASE("svd: singular values and residuals match a dense oracle") {
  const Matrix a = random_matrix(40, 16, 5);
  Eigen::MatrixXd centered = to_eigen(a);
  centered.array() -= centered.mean();
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  for (std::size_t k : {1u, 4u, 9u, 16u}) {
    const FactorModel m = svd_fit_matrix(a, k);
    for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(m.singular_values[i] - s[i]) < 1e-8 * s[0]);
    CHECK(std::abs(residual(a, m) - eigen_residual(a, k, true)) < 1e-8);
  }
}

TEST_CASE("svd: recovered singular vectors are orthonormal") {
  const Matrix a = interaction_matrix(cohort(200, 6));
  const FactorModel m = svd_fit_matrix(a, 20);
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t q = 0; q < 20; ++q) {
      double left = 0.0, right = 0.0;
      for (std::size_t u = 0; u < m.user_factors.rows(); ++u)
        left += m.user_factors(u, p) * m.user_factors(u, q);
      for (std::size_t i = 0; i < m.item_factors.rows(); ++i)
        right += m.item_factors(i, p) * m.item_factors(i, q);
      right /= m.singular_values[p] * m.singular_values[q];
      const double expected = p == q ? 1.0 : 0.0;
      CHECK(std::abs(left - expected) < 1e-8);
      CHECK(std::abs(right - expected) < 1e-8);
    }
}

TEST_CASE("svd: reconstruction error is non-increasing in rank") {
  const Matrix a = interaction_matrix(cohort(150, 7));
  double last = INFINITY;
  for (std::size_t k = 1; k <= 30; ++k) {
    const double r = residual(a, svd_fit_matrix(a, k));
    CHECK(r <= last + 1e-9);
    last = r;
  }
}

TEST_CASE("svd: rank bounds") {
  const Matrix a = random_matrix(5, 4, 1);
  CHECK_THROWS_AS(svd_fit_matrix(a, 0), UsageError);
  CHECK_THROWS_AS(svd_fit_matrix(a, 5), UsageError);
  CHECK_NOTHROW(svd_fit_matrix(a, 4));
}

TEST_CASE("fold-in: all-zero PCP bits give the clamped global mean") {
  const Cohort c = cohort(100, 8);
  const BitVector zero(kNumProcedures, 0);
  const FactorModel svd = svd_fit(c, 10);
  for (double s : svd_predict(svd, zero)) CHECK(s == std::clamp(svd.global_mean, 0.0, 1.0));
  PmfConfig pc;
  pc.epochs = 5;
  const FactorModel pmf = pmf_fit(c, pc).model;
  for (double s : pmf_predict(pmf, zero)) CHECK(s == std::clamp(pmf.global_mean, 0.0, 1.0));
  CHECK_THROWS_AS(svd_predict(svd, BitVector(59, 0)), ShapeError);
}

TEST_CASE("fold-in: replayed train users rank better than the global mean") {
  const Cohort c = cohort(400, 9);
  const FactorModel m = svd_fit(c, 20);
  Matrix scores(c.patients.size(), kNumProcedures);
  for (std::size_t u = 0; u < c.patients.size(); ++u) {
    const auto s = svd_predict(m, c.patients[u].pcp_procedure_bits);
    std::copy(s.begin(), s.end(), scores.row(u).begin());
  }
  const Matrix constant(c.patients.size(), kNumProcedures, m.global_mean);
  const double fold = eval::auroc(eval::PredictionSet::from_rows("svd", scores, c.patients));
  const double mean = eval::auroc(eval::PredictionSet::from_rows("mean", constant, c.patients));
  CHECK(mean == 0.5);
  CHECK(fold >= mean);
  const auto first = svd_predict(m, c.patients[0].pcp_procedure_bits);
  CHECK(first == svd_predict(m, c.patients[0].pcp_procedure_bits));
  for (double s : first) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("pmf: heavy regularization shrinks the factors") {
  const Matrix a = interaction_matrix(cohort(80, 10));
  PmfConfig free;
  free.reg_lambda = 0.0;
  free.epochs = 30;
  free.seed = 4;
  PmfConfig heavy = free;
  heavy.reg_lambda = 1e3;
  heavy.learning_rate = 1e-4;  // keeps the λ = 1e3 decay step stable
  const FactorModel f = pmf_fit_matrix(a, free).model;
  const FactorModel h = pmf_fit_matrix(a, heavy).model;
  CHECK(std::sqrt(norm_sq(h.user_factors)) < 0.1 * std::sqrt(norm_sq(f.user_factors)));
  CHECK(std::sqrt(norm_sq(h.item_factors)) < 0.1 * std::sqrt(norm_sq(f.item_factors)));
}

TEST_CASE("pmf: objective is non-increasing across epochs") {
  const Matrix a = interaction_matrix(cohort(300, 11));
  PmfConfig c;
  c.seed = 5;
  const PmfFit fit = pmf_fit_matrix(a, c);
  REQUIRE(fit.objective_history.size() == 200);
  for (std::size_t e = 1; e < fit.objective_history.size(); ++e)
    CHECK(fit.objective_history[e] <= fit.objective_history[e - 1] + 1e-6);
  CHECK(fit.objective_history.back() == doctest::Approx(pmf_objective(a, fit.model)));
}

TEST_CASE("pmf: same seed gives identical factors") {
  const Matrix a = interaction_matrix(cohort(50, 12));
  PmfConfig c;
  c.epochs = 10;
  c.seed = 9;
  CHECK(pmf_fit_matrix(a, c).model == pmf_fit_matrix(a, c).model);
  PmfConfig d = c;
  d.seed = 10;
  CHECK_FALSE(pmf_fit_matrix(a, d).model == pmf_fit_matrix(a, c).model);
}

TEST_CASE("pmf: unregularized fit approaches the SVD optimum") {
  const Matrix a = low_rank_plus_noise(20, 3, 0.1, 13);
  PmfConfig c;
  c.rank = 3;
  c.reg_lambda = 0.0;
  c.learning_rate = 0.01;
  c.epochs = 3000;
  c.seed = 2;
  const double pmf_err = residual(a, pmf_fit_matrix(a, c).model);
  const double svd_err = residual(a, svd_fit_matrix(a, 3));
  CHECK(pmf_err >= svd_err - 1e-9);
  CHECK(pmf_err <= 1.05 * svd_err);
}

TEST_CASE("pmf: divergence is a training error") {
  const Matrix a = interaction_matrix(cohort(30, 14));
  PmfConfig c;
  c.learning_rate = 50.0;
  c.epochs = 5;
  CHECK_THROWS_AS(pmf_fit_matrix(a, c), TrainingError);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(pmf_fit_matrix(a, c), UsageError);
}

TEST_CASE("collaborative filtering is at chance on a null cohort") {
  const Cohort c = cohort(1500, 15, 0.0);
  const CohortSplit s = split_cohort(c, 0.8, 1);
  PmfConfig pc;
  pc.epochs = 20;
  const FactorModel svd = svd_fit(s.train, 20);
  const FactorModel pmf = pmf_fit(s.train, pc).model;
  Matrix svd_scores(s.test.patients.size(), kNumProcedures), pmf_scores = svd_scores;
  for (std::size_t i = 0; i < s.test.patients.size(); ++i) {
    const auto a = svd_predict(svd, s.test.patients[i].pcp_procedure_bits);
    const auto b = pmf_predict(pmf, s.test.patients[i].pcp_procedure_bits);
    std::copy(a.begin(), a.end(), svd_scores.row(i).begin());
    std::copy(b.begin(), b.end(), pmf_scores.row(i).begin());
  }
  CHECK(std::abs(eval::auroc(eval::PredictionSet::from_rows("svd", svd_scores, s.test.patients)) - 0.5) < 0.03);
  CHECK(std::abs(eval::auroc(eval::PredictionSet::from_rows("pmf", pmf_scores, s.test.patients)) - 0.5) < 0.03);
}

TEST_CASE("factor model JSON round-trip") {
  const FactorModel m = svd_fit(cohort(40, 16), 5);
  CHECK(factor_model_from_json(nlohmann::json::parse(to_json(m).dump())) == m);
  PmfConfig c{7, 0.3, 0.02, 11, 99};
  CHECK(pmf_config_from_json(to_json(c)) == c);
}

namespace {

Vocabularies vocab() {
  synth::GeneratorConfig g;
  return synth::make_vocabularies(g);
}

}  // namespace

TEST_CASE("checklist_predict examples") {
  const Vocabularies v = vocab();
  const auto& d = v.diagnosis_ids;
  const auto& p = v.procedure_ids;
  const Checklist list = Checklist::from_mapping({{d[0], {p[1], p[2]}}, {d[3], {p[2], p[7]}}}, v);

  BitVector diag(kNumDiagnoses, 0);
  for (double s : checklist_predict(diag, list)) CHECK(s == 0.0);

  diag[0] = 1;
  auto s = checklist_predict(diag, list);
  CHECK(std::count(s.begin(), s.end(), 1.0) == 2);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 1.0);

  diag[3] = 1;
  s = checklist_predict(diag, list);
  CHECK(std::count(s.begin(), s.end(), 1.0) == 3);
  CHECK(s[7] == 1.0);
  for (double x : s) CHECK((x == 0.0 || x == 1.0));
}

TEST_CASE("checklist load validation") {
  const Vocabularies v = vocab();
  nlohmann::json doc = {{v.diagnosis_ids[0], {v.procedure_ids[0]}}};
  const Checklist ok = checklist_from_json(doc, v);
  CHECK(checklist_from_json(to_json(ok), v).mapping() == ok.mapping());
  CHECK_THROWS_AS(checklist_from_json({{v.diagnosis_ids[0], {"NOPE"}}}, v), LoadError);
  CHECK_THROWS_AS(checklist_from_json({{"not-a-diagnosis", {v.procedure_ids[0]}}}, v), LoadError);
  CHECK_THROWS_AS(checklist_from_json(nlohmann::json::array(), v), LoadError);
}
