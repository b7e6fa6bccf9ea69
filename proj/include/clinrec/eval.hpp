#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clinrec/data.hpp"
#include "clinrec/matrix.hpp"
#include "json.hpp"

namespace clinrec::eval {

/// Scores and true labels of one model over a test set, row-major
/// (patient-major) so cell (p, j) is at p * width + j.
struct PredictionSet {
  std::string label;
  std::size_t num_patients = 0;
  std::size_t width = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> truth;

  static PredictionSet from_rows(std::string label, const Matrix& scores,
                                 const std::vector<PatientRecord>& patients);
  /// Flat single-patient set, handy for small hand-built cases.
  static PredictionSet from_cells(std::string label, std::vector<double> scores,
                                  std::vector<std::uint8_t> truth);

  void validate() const;
  std::size_t cells() const { return scores.size(); }
};

struct PrPoint {
  double threshold = 0.0;
  std::optional<double> precision;  // empty when nothing is predicted positive
  double recall = 0.0;
};

/// Micro-pooled over all cells; a cell is predicted positive iff score >= threshold.
PrPoint precision_recall(const PredictionSet& preds, double threshold);

/// 0.00, 0.01, ..., 1.00
std::vector<double> threshold_grid();

/// Points with an undefined precision are dropped.
std::vector<PrPoint> pr_sweep(const PredictionSet& preds, const std::vector<double>& thresholds);

/// Mann-Whitney AUROC over pooled cells, ties credited one half.
double auroc(const PredictionSet& preds);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BootstrapOptions {
  std::size_t n_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// Percentile interval of the AUROC over patient-level resamples. Each
/// resample draws from its own sub-seed, so results do not depend on the
/// order resamples are evaluated in. Single-class resamples are redrawn, up
/// to 10 * n_resamples draws in total.
ConfidenceInterval bootstrap_auroc_ci(const PredictionSet& preds, const BootstrapOptions& options);

struct RecallPrecision {
  double recall = 0.0;
  double precision = 0.0;
};

/// Precision at each target recall, linearly interpolated along the exact
/// PR sweep (one point per distinct score).
std::vector<RecallPrecision> precision_at_recall(const PredictionSet& preds,
                                                 const std::vector<double>& recalls = {0.2, 0.4, 0.6, 0.8});

enum class Policy { threshold, top_k };

struct PolicyRow {
  Policy policy = Policy::threshold;
  double parameter = 0.0;  // threshold, or k
  std::optional<double> precision;
  double recall = 0.0;
  std::optional<double> f1;
};

/// Per-patient top-k keeps the k best scores, ties going to the lower index.
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k);

std::vector<PolicyRow> policy_compare(const PredictionSet& preds,
                                      const std::vector<double>& thresholds,
                                      const std::vector<std::size_t>& ks);

/// Highest F1 among the rows of one policy; empty when none is defined.
std::optional<double> best_f1(const std::vector<PolicyRow>& rows, Policy policy);

struct MetricsReport {
  std::string label;
  std::vector<PrPoint> pr_points;
  double auroc = 0.0;
  ConfidenceInterval auroc_ci;
  std::vector<RecallPrecision> precision_at_recall;
  std::vector<PolicyRow> policy_table;

  bool ci_contains_point() const { return auroc_ci.lo <= auroc && auroc <= auroc_ci.hi; }
};

struct EvalOptions {
  BootstrapOptions bootstrap;
  std::vector<double> thresholds = threshold_grid();
  std::vector<double> policy_thresholds = threshold_grid();
  std::vector<std::size_t> ks = default_ks();

  static std::vector<std::size_t> default_ks();
};

/// True when every score is exactly 0 or 1.
bool is_binary(const PredictionSet& preds);

/// Binary predictors get a single PR point at threshold 1.
MetricsReport evaluate(const PredictionSet& preds, const EvalOptions& options);

// File contract: fixed column order, six decimal places, "\n" line endings.
std::string pr_curve_csv(const std::vector<MetricsReport>& reports);           // model,threshold,precision,recall
std::string auroc_csv(const std::vector<MetricsReport>& reports);              // model,auroc,ci_lo,ci_hi
std::string policy_csv(const std::vector<MetricsReport>& reports);             // model,policy,parameter,precision,recall,f1
std::string precision_at_recall_csv(const std::vector<MetricsReport>& reports);  // model,recall,precision
nlohmann::json to_json(const MetricsReport& report);

inline constexpr double kExampleThreshold = 0.20;

/// Side-by-side view of one patient: inputs, true specialist orders, and
/// each model's recommendations at `threshold`.
nlohmann::json example_report(const PatientRecord& patient, const Vocabularies& vocab,
                              const std::vector<std::pair<std::string, std::vector<double>>>& model_scores,
                              double threshold = kExampleThreshold);
std::string render_example_text(const nlohmann::json& report);

}  // namespace clinrec::eval
