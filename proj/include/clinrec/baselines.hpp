#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clinrec/data.hpp"
#include "clinrec/matrix.hpp"
#include "json.hpp"

namespace clinrec::baselines {

/// Number of collaborative-filtering items per user: the 60 PCP slots
/// followed by the 60 specialty slots.
inline constexpr std::size_t kCfItems = 2 * kNumProcedures;

/// Low-rank factorization of a (users x items) matrix around its global mean:
///   data(u, i) ~= global_mean + user_factors.row(u) . item_factors.row(i)
struct FactorModel {
  Matrix item_factors;  // items x rank
  Matrix user_factors;  // users x rank
  std::size_t rank = 0;
  double global_mean = 0.0;
  double reg_lambda = 0.0;               // ridge used when folding in new users
  std::vector<double> singular_values;   // SVD only, descending

  bool operator==(const FactorModel&) const = default;
};

/// n x 120 matrix [pcp bits | specialty bits].
Matrix interaction_matrix(const Cohort& cohort);

Matrix reconstruct(const FactorModel& model);

/// Truncated SVD by power iteration with deflation on the Gram matrix,
/// followed by a Rayleigh-Ritz pass that makes both singular bases
/// orthonormal to working precision. With center=false the global mean is 0.
FactorModel svd_fit_matrix(const Matrix& data, std::size_t rank, bool center = true);
FactorModel svd_fit(const Cohort& train, std::size_t rank);

/// Folds a new user in from the positive PCP entries (ridge least squares with
/// the model's lambda, minimum-norm when singular) and scores the specialty
/// slots as clamp(global_mean + user . item, 0, 1). No positive entries
/// yields the clamped global mean everywhere.
std::vector<double> fold_in_predict(const FactorModel& model, std::span<const std::uint8_t> pcp_bits);

inline std::vector<double> svd_predict(const FactorModel& model,
                                       std::span<const std::uint8_t> pcp_bits) {
  return fold_in_predict(model, pcp_bits);
}

struct PmfConfig {
  std::size_t rank = 20;
  double reg_lambda = 0.05;
  double learning_rate = 0.005;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  bool operator==(const PmfConfig&) const = default;
};

struct PmfFit {
  FactorModel model;
  std::vector<double> objective_history;  // full-batch objective after each epoch
};

/// sum (r - u.v)^2 + lambda (|U|^2 + |V|^2) over the mean-centered matrix.
double pmf_objective(const Matrix& data, const FactorModel& model);

/// Per-entry SGD over every cell of the matrix (all cells observed). Each
/// cell carries its share of the regularizer: lambda |u|^2 / items and
/// lambda |v|^2 / users.
PmfFit pmf_fit_matrix(const Matrix& data, const PmfConfig& config);
PmfFit pmf_fit(const Cohort& train, const PmfConfig& config);

inline std::vector<double> pmf_predict(const FactorModel& model,
                                       std::span<const std::uint8_t> pcp_bits) {
  return fold_in_predict(model, pcp_bits);
}

/// Diagnosis -> procedure list, validated against a vocabulary.
class Checklist {
 public:
  static Checklist from_mapping(std::map<std::string, std::vector<std::string>> mapping,
                                const Vocabularies& vocab);

  const std::map<std::string, std::vector<std::string>>& mapping() const { return mapping_; }
  const std::vector<std::size_t>& procedures_for(std::size_t diagnosis) const {
    return by_diagnosis_[diagnosis];
  }

 private:
  std::map<std::string, std::vector<std::string>> mapping_;
  std::vector<std::vector<std::size_t>> by_diagnosis_;
};

/// Checklist file: {"diagnosis_id": ["procedure_id", ...], ...}.
Checklist checklist_from_json(const nlohmann::json& doc, const Vocabularies& vocab);
nlohmann::json to_json(const Checklist& checklist);

/// 1.0 for every procedure listed under any active diagnosis, else 0.0.
std::vector<double> checklist_predict(std::span<const std::uint8_t> diagnosis_bits,
                                      const Checklist& checklist);

nlohmann::json to_json(const FactorModel& model);
FactorModel factor_model_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PmfConfig& config);
PmfConfig pmf_config_from_json(const nlohmann::json& doc);

}  // namespace clinrec::baselines
