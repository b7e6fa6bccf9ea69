#include "clinrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "clinrec/error.hpp"
#include "clinrec/io.hpp"
#include "clinrec/rng.hpp"

namespace clinrec::eval {
namespace {

/// Cells sorted by ascending score, grouped into runs of equal score.
struct RankedCells {
  std::vector<std::size_t> order;
  std::vector<std::size_t> group_end;  // exclusive end offset of each tie group
};

RankedCells rank_cells(const PredictionSet& preds) {
  RankedCells r;
  r.order.resize(preds.cells());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return preds.scores[a] < preds.scores[b];
  });
  for (std::size_t i = 0; i < r.order.size(); ++i)
    if (i + 1 == r.order.size() || preds.scores[r.order[i + 1]] != preds.scores[r.order[i]])
      r.group_end.push_back(i + 1);
  return r;
}

/// AUROC with per-patient multiplicities; nullopt if one class is empty.
std::optional<double> weighted_auroc(const PredictionSet& preds, const RankedCells& ranked,
                                     const std::vector<double>& patient_weight) {
  double total_pos = 0.0;
  double total_neg = 0.0;
  double negatives_below = 0.0;
  double concordant = 0.0;
  std::size_t start = 0;
  for (std::size_t end : ranked.group_end) {
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t cell = ranked.order[i];
      const double w = patient_weight[cell / preds.width];
      (preds.truth[cell] ? pos : neg) += w;
    }
    concordant += pos * negatives_below + 0.5 * pos * neg;
    negatives_below += neg;
    total_pos += pos;
    total_neg += neg;
    start = end;
  }
  if (total_pos == 0.0 || total_neg == 0.0) return std::nullopt;
  return concordant / (total_pos * total_neg);
}

double quantile(std::vector<double> sorted_values, double q) {
  // Linear interpolation between order statistics.
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

std::optional<double> f1_of(const std::optional<double>& precision, double recall) {
  if (!precision || *precision + recall <= 0.0) return std::nullopt;
  return 2.0 * *precision * recall / (*precision + recall);
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

PolicyRow row_from(Policy policy, double parameter, const Counts& c) {
  PolicyRow row{policy, parameter, std::nullopt, 0.0, std::nullopt};
  if (c.tp + c.fp > 0)
    row.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  row.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  row.f1 = f1_of(row.precision, row.recall);
  return row;
}

std::string opt_fixed(const std::optional<double>& v) { return v ? format_fixed(*v) : ""; }

const char* policy_name(Policy p) { return p == Policy::threshold ? "threshold" : "top_k"; }

}  // namespace

PredictionSet PredictionSet::from_rows(std::string label, const Matrix& scores,
                                       const std::vector<PatientRecord>& patients) {
  if (scores.rows() != patients.size())
    throw ShapeError("PredictionSet: " + std::to_string(scores.rows()) + " score rows for " +
                     std::to_string(patients.size()) + " patients");
  PredictionSet s;
  s.label = std::move(label);
  s.num_patients = patients.size();
  s.width = scores.cols();
  s.scores.assign(scores.values().begin(), scores.values().end());
  s.truth.reserve(s.scores.size());
  for (const auto& p : patients) {
    if (p.specialty_procedure_bits.size() != s.width)
      throw ShapeError("PredictionSet: label width differs from score width");
    s.truth.insert(s.truth.end(), p.specialty_procedure_bits.begin(),
                   p.specialty_procedure_bits.end());
  }
  return s;
}

PredictionSet PredictionSet::from_cells(std::string label, std::vector<double> scores,
                                        std::vector<std::uint8_t> truth) {
  PredictionSet s;
  s.label = std::move(label);
  s.num_patients = 1;
  s.width = scores.size();
  s.scores = std::move(scores);
  s.truth = std::move(truth);
  s.validate();
  return s;
}

void PredictionSet::validate() const {
  if (scores.size() != truth.size() || scores.size() != num_patients * width)
    throw ShapeError("PredictionSet '" + label + "': scores, truth and shape disagree");
}

PrPoint precision_recall(const PredictionSet& preds, double threshold) {
  preds.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw UsageError("precision_recall: threshold must lie in [0, 1]");
  Counts c;
  for (std::size_t i = 0; i < preds.cells(); ++i) {
    const bool predicted = preds.scores[i] >= threshold;
    if (predicted && preds.truth[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (preds.truth[i]) ++c.fn;
  }
  if (c.tp + c.fn == 0) throw UsageError("precision_recall: no positive labels in '" + preds.label + "'");
  const PolicyRow row = row_from(Policy::threshold, threshold, c);
  return {threshold, row.precision, row.recall};
}

std::vector<double> threshold_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 100; ++i) out.push_back(static_cast<double>(i) / 100.0);
  return out;
}

std::vector<PrPoint> pr_sweep(const PredictionSet& preds, const std::vector<double>& thresholds) {
  std::vector<PrPoint> out;
  for (double t : thresholds) {
    PrPoint p = precision_recall(preds, t);
    if (p.precision) out.push_back(p);
  }
  return out;
}

double auroc(const PredictionSet& preds) {
  preds.validate();
  const auto value =
      weighted_auroc(preds, rank_cells(preds), std::vector<double>(preds.num_patients, 1.0));
  if (!value) throw UsageError("auroc: '" + preds.label + "' has a single-class pool");
  return *value;
}

ConfidenceInterval bootstrap_auroc_ci(const PredictionSet& preds, const BootstrapOptions& options) {
  preds.validate();
  if (preds.num_patients < 2) throw UsageError("bootstrap: need at least 2 test patients");
  if (options.n_resamples < 1) throw UsageError("bootstrap: n_resamples must be >= 1");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw UsageError("bootstrap: level must lie in (0, 1)");

  const RankedCells ranked = rank_cells(preds);
  const std::size_t n = preds.num_patients;
  const std::size_t max_draws = 10 * options.n_resamples;
  std::vector<double> values;
  values.reserve(options.n_resamples);
  std::vector<double> weight(n);
  std::size_t draws = 0;
  for (std::size_t r = 0; r < options.n_resamples; ++r) {
    // Redraws of resample r continue its own stream.
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
    while (true) {
      if (draws++ >= max_draws)
        throw EvaluationError("bootstrap: too many single-class resamples for '" + preds.label + "'");
      std::ranges::fill(weight, 0.0);
      for (std::size_t i = 0; i < n; ++i) weight[rng.below(n)] += 1.0;
      if (auto v = weighted_auroc(preds, ranked, weight)) {
        values.push_back(*v);
        break;
      }
    }
  }
  std::ranges::sort(values);
  const double tail = (1.0 - options.level) / 2.0;
  return {quantile(values, tail), quantile(values, 1.0 - tail)};
}

std::vector<RecallPrecision> precision_at_recall(const PredictionSet& preds,
                                                 const std::vector<double>& recalls) {
  preds.validate();
  std::vector<std::size_t> order(preds.cells());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds.scores[a] > preds.scores[b];
  });
  const auto positives = static_cast<double>(std::count(preds.truth.begin(), preds.truth.end(), 1));
  if (positives == 0.0) throw UsageError("precision_at_recall: no positive labels");

  // One point per distinct threshold, in order of increasing recall.
  std::vector<RecallPrecision> curve;
  double tp = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    tp += preds.truth[order[i]];
    const bool group_end = i + 1 == order.size() ||
                           preds.scores[order[i + 1]] != preds.scores[order[i]];
    if (group_end) curve.push_back({tp / positives, tp / static_cast<double>(i + 1)});
  }

  std::vector<RecallPrecision> out;
  for (double target : recalls) {
    auto it = std::ranges::find_if(curve, [&](const RecallPrecision& p) { return p.recall >= target; });
    if (it == curve.end()) it = std::prev(curve.end());
    double precision = it->precision;
    if (it != curve.begin() && it->recall > target) {
      const auto& prev = *std::prev(it);
      const double t = (target - prev.recall) / (it->recall - prev.recall);
      precision = prev.precision + t * (it->precision - prev.precision);
    }
    out.push_back({target, precision});
  }
  return out;
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

std::vector<PolicyRow> policy_compare(const PredictionSet& preds,
                                      const std::vector<double>& thresholds,
                                      const std::vector<std::size_t>& ks) {
  preds.validate();
  for (std::size_t k : ks)
    if (k < 1 || k > preds.width)
      throw UsageError("policy_compare: k must lie in [1, " + std::to_string(preds.width) + "]");

  std::vector<PolicyRow> rows;
  for (double t : thresholds) {
    const PrPoint p = precision_recall(preds, t);
    rows.push_back({Policy::threshold, t, p.precision, p.recall, f1_of(p.precision, p.recall)});
  }

  // Rank each patient's procedures once; top-k is then a prefix.
  std::vector<std::vector<std::size_t>> ranking(preds.num_patients);
  for (std::size_t p = 0; p < preds.num_patients; ++p)
    ranking[p] = top_k_indices(
        std::vector<double>(preds.scores.begin() + static_cast<std::ptrdiff_t>(p * preds.width),
                            preds.scores.begin() + static_cast<std::ptrdiff_t>((p + 1) * preds.width)),
        preds.width);
  const auto positives =
      static_cast<std::size_t>(std::count(preds.truth.begin(), preds.truth.end(), 1));
  if (positives == 0) throw UsageError("policy_compare: no positive labels");
  for (std::size_t k : ks) {
    Counts c;
    for (std::size_t p = 0; p < preds.num_patients; ++p)
      for (std::size_t r = 0; r < k; ++r) {
        if (preds.truth[p * preds.width + ranking[p][r]]) ++c.tp;
        else ++c.fp;
      }
    c.fn = positives - c.tp;
    rows.push_back(row_from(Policy::top_k, static_cast<double>(k), c));
  }
  return rows;
}

std::optional<double> best_f1(const std::vector<PolicyRow>& rows, Policy policy) {
  std::optional<double> best;
  for (const auto& r : rows)
    if (r.policy == policy && r.f1 && (!best || *r.f1 > *best)) best = r.f1;
  return best;
}

std::vector<std::size_t> EvalOptions::default_ks() {
  std::vector<std::size_t> ks(kNumProcedures);
  std::iota(ks.begin(), ks.end(), std::size_t{1});
  return ks;
}

bool is_binary(const PredictionSet& preds) {
  return std::ranges::all_of(preds.scores, [](double s) { return s == 0.0 || s == 1.0; });
}

MetricsReport evaluate(const PredictionSet& preds, const EvalOptions& options) {
  MetricsReport r;
  r.label = preds.label;
  if (is_binary(preds)) {
    // A 0/1 predictor has one operating point; sweeping would only add the
    // trivial predict-everything point at threshold 0.
    r.pr_points = pr_sweep(preds, {1.0});
  } else {
    r.pr_points = pr_sweep(preds, options.thresholds);
  }
  r.auroc = auroc(preds);
  r.auroc_ci = bootstrap_auroc_ci(preds, options.bootstrap);
  r.precision_at_recall = precision_at_recall(preds);
  r.policy_table = policy_compare(preds, options.policy_thresholds, options.ks);
  return r;
}

std::string pr_curve_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "model,threshold,precision,recall\n";
  for (const auto& r : reports)
    for (const auto& p : r.pr_points)
      out += r.label + "," + format_fixed(p.threshold) + "," + format_fixed(*p.precision) + "," +
             format_fixed(p.recall) + "\n";
  return out;
}

std::string auroc_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "model,auroc,ci_lo,ci_hi\n";
  for (const auto& r : reports)
    out += r.label + "," + format_fixed(r.auroc) + "," + format_fixed(r.auroc_ci.lo) + "," +
           format_fixed(r.auroc_ci.hi) + "\n";
  return out;
}

std::string policy_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "model,policy,parameter,precision,recall,f1\n";
  for (const auto& r : reports)
    for (const auto& row : r.policy_table) {
      const std::string param = row.policy == Policy::threshold
                                    ? format_fixed(row.parameter)
                                    : std::to_string(static_cast<std::size_t>(row.parameter));
      out += r.label + "," + policy_name(row.policy) + "," + param + "," +
             opt_fixed(row.precision) + "," + format_fixed(row.recall) + "," + opt_fixed(row.f1) + "\n";
    }
  return out;
}

std::string precision_at_recall_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "model,recall,precision\n";
  for (const auto& r : reports)
    for (const auto& p : r.precision_at_recall)
      out += r.label + "," + format_fixed(p.recall) + "," + format_fixed(p.precision) + "\n";
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json pr = json::array();
  for (const auto& p : r.pr_points)
    pr.push_back({{"threshold", p.threshold}, {"precision", opt(p.precision)}, {"recall", p.recall}});
  json par = json::array();
  for (const auto& p : r.precision_at_recall)
    par.push_back({{"recall", p.recall}, {"precision", p.precision}});
  json policy = json::array();
  for (const auto& row : r.policy_table)
    policy.push_back({{"policy", policy_name(row.policy)},
                      {"parameter", row.parameter},
                      {"precision", opt(row.precision)},
                      {"recall", row.recall},
                      {"f1", opt(row.f1)}});
  return {{"model", r.label},
          {"auroc", r.auroc},
          {"auroc_ci", {r.auroc_ci.lo, r.auroc_ci.hi}},
          {"ci_contains_point", r.ci_contains_point()},
          {"pr_points", std::move(pr)},
          {"precision_at_recall", std::move(par)},
          {"policy_table", std::move(policy)}};
}

nlohmann::json example_report(const PatientRecord& patient, const Vocabularies& vocab,
                              const std::vector<std::pair<std::string, std::vector<double>>>& model_scores,
                              double threshold) {
  using nlohmann::json;
  json diagnoses = json::array();
  for (std::size_t d = 0; d < patient.diagnosis_bits.size(); ++d)
    if (patient.diagnosis_bits[d]) diagnoses.push_back(vocab.diagnosis_ids.at(d));
  json abnormal = json::array();
  std::size_t observed = 0;
  for (std::size_t lab = 0; lab < kNumLabs; ++lab) {
    observed += patient.lab_features[3 * lab];
    if (patient.lab_features[3 * lab + 1]) abnormal.push_back({{"lab", vocab.lab_ids.at(lab)}, {"flag", "low"}});
    if (patient.lab_features[3 * lab + 2]) abnormal.push_back({{"lab", vocab.lab_ids.at(lab)}, {"flag", "high"}});
  }
  json pcp = json::array();
  json truth = json::array();
  for (std::size_t j = 0; j < kNumProcedures; ++j) {
    if (patient.pcp_procedure_bits[j]) pcp.push_back(vocab.procedure_ids.at(j));
    if (patient.specialty_procedure_bits[j]) truth.push_back(vocab.procedure_ids.at(j));
  }

  json models = json::array();
  for (const auto& [label, scores] : model_scores) {
    if (scores.size() != kNumProcedures)
      throw ShapeError("example_report: '" + label + "' has " + std::to_string(scores.size()) + " scores");
    json recs = json::array();
    for (std::size_t j : top_k_indices(scores, scores.size())) {
      if (scores[j] < threshold) break;
      recs.push_back({{"procedure", vocab.procedure_ids.at(j)},
                      {"score", scores[j]},
                      {"ordered", patient.specialty_procedure_bits[j] == 1}});
    }
    models.push_back({{"model", label}, {"recommended", std::move(recs)}});
  }
  return {{"patient_id", patient.patient_id},
          {"specialist_id", patient.specialist_id},
          {"threshold", threshold},
          {"inputs",
           {{"diagnoses", std::move(diagnoses)},
            {"labs_observed", observed},
            {"abnormal_labs", std::move(abnormal)},
            {"pcp_orders", std::move(pcp)}}},
          {"true_orders", std::move(truth)},
          {"predictions", std::move(models)}};
}

std::string render_example_text(const nlohmann::json& report) {
  std::ostringstream out;
  out << "Patient " << report["patient_id"].get<std::string>() << " -> specialist "
      << report["specialist_id"].get<std::string>() << "\n";
  const auto& in = report["inputs"];
  out << "  Diagnoses:";
  for (const auto& d : in["diagnoses"]) out << " " << d.get<std::string>();
  out << "\n  Labs observed: " << in["labs_observed"].get<std::size_t>() << ", abnormal:";
  for (const auto& l : in["abnormal_labs"])
    out << " " << l["lab"].get<std::string>() << "(" << l["flag"].get<std::string>() << ")";
  out << "\n  PCP orders:";
  for (const auto& p : in["pcp_orders"]) out << " " << p.get<std::string>();
  out << "\n\nTrue specialist orders:";
  for (const auto& p : report["true_orders"]) out << " " << p.get<std::string>();
  out << "\n";
  for (const auto& m : report["predictions"]) {
    out << "\n" << m["model"].get<std::string>() << " (score >= "
        << format_fixed(report["threshold"].get<double>(), 2) << "):\n";
    for (const auto& r : m["recommended"])
      out << "  " << (r["ordered"].get<bool>() ? "*" : " ") << " " << r["procedure"].get<std::string>()
          << "  " << format_fixed(r["score"].get<double>(), 3) << "\n";
  }
  return out.str();
}

}  // namespace clinrec::eval
