#pragma once

#include <filesystem>

#include "clinrec/data.hpp"
#include "json.hpp"

namespace clinrec {

inline constexpr int kCohortFormatVersion = 1;

// A cohort on disk is a directory with two files: vocab.json (the
// versioned vocabulary header) and cohort.jsonl (one patient per line).
inline constexpr const char* kVocabFileName = "vocab.json";
inline constexpr const char* kCohortFileName = "cohort.jsonl";

nlohmann::json vocab_to_json(const Vocabularies& vocab);
Vocabularies vocab_from_json(const nlohmann::json& doc);

nlohmann::json patient_to_json(const PatientRecord& patient);
/// With require_labels=false a missing "specialty_procedure_bits" field reads
/// as all zeros (records awaiting a recommendation have no labels yet).
PatientRecord patient_from_json(const nlohmann::json& doc, bool require_labels = true);

/// One compact JSON document per line, "\n"-terminated.
std::string patients_to_jsonl(const std::vector<PatientRecord>& patients);
std::vector<PatientRecord> patients_from_jsonl(const std::string& text, bool require_labels = true);

void save_cohort(const Cohort& cohort, const std::filesystem::path& dir);

/// Loads and validates a cohort directory; LoadError names the offending field.
Cohort load_cohort(const std::filesystem::path& dir);

}  // namespace clinrec
