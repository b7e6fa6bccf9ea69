#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clinrec {

inline constexpr std::size_t kNumLabs = 100;
inline constexpr std::size_t kNumProcedures = 60;
inline constexpr std::size_t kNumDiagnoses = 10;
inline constexpr std::size_t kSpecialistBuckets = 10;

inline constexpr std::size_t kLabFeatureWidth = 3 * kNumLabs;                     // 300
inline constexpr std::size_t kDiagnosticInputWidth = kLabFeatureWidth + kNumDiagnoses;  // 310
inline constexpr std::size_t kAutoencoderInputWidth = kNumProcedures;             // 60
inline constexpr std::size_t kEnsembleInputWidth =
    2 * kNumProcedures + kSpecialistBuckets;                                       // 130
inline constexpr std::size_t kAggregateInputWidth =
    kDiagnosticInputWidth + kNumProcedures + kSpecialistBuckets;                   // 380

/// Vector of 0/1 flags.
using BitVector = std::vector<std::uint8_t>;

struct NormalRange {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const NormalRange&) const = default;
};

struct Vocabularies {
  std::vector<std::string> lab_ids;          // 100
  std::vector<std::string> procedure_ids;    // 60
  std::vector<std::string> diagnosis_ids;    // 10
  std::vector<NormalRange> lab_normal_ranges;  // parallel to lab_ids

  /// Throws UsageError on wrong sizes, duplicates or an empty normal range.
  void validate() const;

  /// Stable 64-bit fingerprint of the canonical JSON form.
  std::uint64_t hash() const;

  std::optional<std::size_t> lab_index(std::string_view id) const;
  std::optional<std::size_t> procedure_index(std::string_view id) const;
  std::optional<std::size_t> diagnosis_index(std::string_view id) const;

  bool operator==(const Vocabularies&) const = default;
};

struct RawLabResult {
  std::string lab_id;
  std::optional<double> value;  // engaged iff the lab was observed

  bool observed() const { return value.has_value(); }
};

struct LabTriple {
  std::uint8_t present = 0;
  std::uint8_t low = 0;
  std::uint8_t high = 0;
  bool operator==(const LabTriple&) const = default;
};

/// Missing -> (0,0,0); below range -> (1,1,0); above -> (1,0,1); else (1,0,0).
/// The normal range is closed: values equal to a bound are normal.
LabTriple encode_lab(const RawLabResult& result, NormalRange range);

/// 300-wide lab feature vector in vocabulary order. Labs absent from
/// `results` are unobserved; an id outside the vocabulary is a UsageError.
BitVector encode_labs(const std::vector<RawLabResult>& results, const Vocabularies& vocab);

/// One-hot bucket of a stable hash of the identifier.
BitVector encode_specialist(std::string_view specialist_id,
                            std::size_t num_buckets = kSpecialistBuckets);

struct PatientRecord {
  std::string patient_id;
  BitVector lab_features;              // 300: (present, low, high) per lab
  BitVector diagnosis_bits;            // 10
  BitVector pcp_procedure_bits;        // 60
  std::string specialist_id;
  BitVector specialty_procedure_bits;  // 60, prediction labels

  /// Checks widths, 0/1 entries and lab triple validity.
  void validate() const;

  bool operator==(const PatientRecord&) const = default;
};

/// lab_features ++ diagnosis_bits (310).
std::vector<double> diagnostic_input(const PatientRecord& p);
/// lab_features ++ diagnosis_bits ++ pcp bits ++ specialist one-hot (380).
std::vector<double> aggregate_input(const PatientRecord& p);

struct Cohort {
  Vocabularies vocab;
  std::vector<PatientRecord> patients;

  void validate() const;
};

struct CohortSplit {
  Cohort train;
  Cohort test;
};

/// Seeded shuffle then prefix split; train gets ceil(fraction * n) patients.
CohortSplit split_cohort(const Cohort& cohort, double train_fraction, std::uint64_t seed);

}  // namespace clinrec
