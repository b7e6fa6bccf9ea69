#include "clinrec/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "clinrec/data_json.hpp"
#include "clinrec/error.hpp"
#include "clinrec/rng.hpp"

namespace clinrec {
namespace {

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second)
      throw UsageError(std::string("vocabulary: duplicate ") + what + " id '" + id + "'");
}

std::optional<std::size_t> find_index(const std::vector<std::string>& ids,
                                      std::string_view id) {
  auto it = std::ranges::find(ids, id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

void check_bits(const BitVector& bits, std::size_t width, const std::string& what) {
  if (bits.size() != width)
    throw UsageError(what + ": expected width " + std::to_string(width) + ", got " +
                     std::to_string(bits.size()));
  for (auto b : bits)
    if (b > 1) throw UsageError(what + ": entries must be 0 or 1");
}

void append(std::vector<double>& out, const BitVector& bits) {
  for (auto b : bits) out.push_back(static_cast<double>(b));
}

}  // namespace

void Vocabularies::validate() const {
  if (lab_ids.size() != kNumLabs) throw UsageError("vocabulary: expected 100 labs");
  if (procedure_ids.size() != kNumProcedures)
    throw UsageError("vocabulary: expected 60 procedures");
  if (diagnosis_ids.size() != kNumDiagnoses)
    throw UsageError("vocabulary: expected 10 diagnoses");
  if (lab_normal_ranges.size() != lab_ids.size())
    throw UsageError("vocabulary: one normal range per lab required");
  check_unique(lab_ids, "lab");
  check_unique(procedure_ids, "procedure");
  check_unique(diagnosis_ids, "diagnosis");
  for (std::size_t i = 0; i < lab_normal_ranges.size(); ++i) {
    const auto& r = lab_normal_ranges[i];
    if (!(r.low < r.high))
      throw UsageError("vocabulary: lab '" + lab_ids[i] + "' normal range needs low < high");
  }
}

std::uint64_t Vocabularies::hash() const { return fnv1a64(vocab_to_json(*this).dump()); }

std::optional<std::size_t> Vocabularies::lab_index(std::string_view id) const {
  return find_index(lab_ids, id);
}
std::optional<std::size_t> Vocabularies::procedure_index(std::string_view id) const {
  return find_index(procedure_ids, id);
}
std::optional<std::size_t> Vocabularies::diagnosis_index(std::string_view id) const {
  return find_index(diagnosis_ids, id);
}

LabTriple encode_lab(const RawLabResult& result, NormalRange range) {
  if (!(range.low < range.high)) throw UsageError("encode_lab: range needs low < high");
  if (!result.observed()) return {0, 0, 0};
  const double v = *result.value;
  if (v < range.low) return {1, 1, 0};
  if (v > range.high) return {1, 0, 1};
  return {1, 0, 0};
}

BitVector encode_labs(const std::vector<RawLabResult>& results, const Vocabularies& vocab) {
  BitVector out(kLabFeatureWidth, 0);
  for (const auto& r : results) {
    const auto idx = vocab.lab_index(r.lab_id);
    if (!idx) throw UsageError("encode_labs: lab '" + r.lab_id + "' not in vocabulary");
    const LabTriple t = encode_lab(r, vocab.lab_normal_ranges[*idx]);
    out[3 * *idx] = t.present;
    out[3 * *idx + 1] = t.low;
    out[3 * *idx + 2] = t.high;
  }
  return out;
}

BitVector encode_specialist(std::string_view specialist_id, std::size_t num_buckets) {
  if (num_buckets < 1) throw UsageError("encode_specialist: num_buckets must be >= 1");
  BitVector out(num_buckets, 0);
  out[splitmix64(fnv1a64(specialist_id)) % num_buckets] = 1;
  return out;
}

void PatientRecord::validate() const {
  const std::string who = "patient '" + patient_id + "'";
  check_bits(lab_features, kLabFeatureWidth, who + " lab_features");
  check_bits(diagnosis_bits, kNumDiagnoses, who + " diagnosis_bits");
  check_bits(pcp_procedure_bits, kNumProcedures, who + " pcp_procedure_bits");
  check_bits(specialty_procedure_bits, kNumProcedures, who + " specialty_procedure_bits");
  for (std::size_t lab = 0; lab < kNumLabs; ++lab) {
    const auto present = lab_features[3 * lab];
    const auto low = lab_features[3 * lab + 1];
    const auto high = lab_features[3 * lab + 2];
    if ((low || high) && !present)
      throw UsageError(who + ": lab " + std::to_string(lab) + " flagged abnormal but absent");
    if (low && high)
      throw UsageError(who + ": lab " + std::to_string(lab) + " flagged both low and high");
  }
}

std::vector<double> diagnostic_input(const PatientRecord& p) {
  std::vector<double> out;
  out.reserve(kDiagnosticInputWidth);
  append(out, p.lab_features);
  append(out, p.diagnosis_bits);
  if (out.size() != kDiagnosticInputWidth) throw ShapeError("diagnostic input width != 310");
  return out;
}

std::vector<double> aggregate_input(const PatientRecord& p) {
  std::vector<double> out = diagnostic_input(p);
  out.reserve(kAggregateInputWidth);
  append(out, p.pcp_procedure_bits);
  append(out, encode_specialist(p.specialist_id));
  if (out.size() != kAggregateInputWidth) throw ShapeError("aggregate input width != 380");
  return out;
}

void Cohort::validate() const {
  vocab.validate();
  for (const auto& p : patients) p.validate();
}

CohortSplit split_cohort(const Cohort& cohort, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError("split_cohort: train_fraction must lie in (0, 1)");
  const std::size_t n = cohort.patients.size();
  if (n < 2) throw UsageError("split_cohort: need at least 2 patients");
  // The epsilon keeps exact products such as 0.8 * 10 from rounding up.
  const auto n_train =
      static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  if (n_train == 0 || n_train >= n)
    throw UsageError("split_cohort: split of " + std::to_string(n) + " patients at " +
                     std::to_string(train_fraction) + " leaves one side empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  CohortSplit out{{cohort.vocab, {}}, {cohort.vocab, {}}};
  out.train.patients.reserve(n_train);
  out.test.patients.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? out.train : out.test).patients.push_back(cohort.patients[order[i]]);
  return out;
}

}  // namespace clinrec
