#include "clinrec/data_json.hpp"

#include <sstream>

#include "clinrec/error.hpp"
#include "clinrec/io.hpp"

namespace clinrec {
namespace {

using nlohmann::json;

const json& field(const json& doc, const char* name, const char* context) {
  if (!doc.is_object()) throw LoadError(std::string(context) + ": expected a JSON object");
  auto it = doc.find(name);
  if (it == doc.end())
    throw LoadError(std::string(context) + ": missing field '" + name + "'");
  return *it;
}

template <class T>
T get(const json& doc, const char* name, const char* context) {
  try {
    return field(doc, name, context).get<T>();
  } catch (const json::exception&) {
    throw LoadError(std::string(context) + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace

json vocab_to_json(const Vocabularies& v) {
  json ranges = json::array();
  for (const auto& r : v.lab_normal_ranges) ranges.push_back({r.low, r.high});
  return {{"format_version", kCohortFormatVersion},
          {"lab_ids", v.lab_ids},
          {"procedure_ids", v.procedure_ids},
          {"diagnosis_ids", v.diagnosis_ids},
          {"lab_normal_ranges", std::move(ranges)}};
}

Vocabularies vocab_from_json(const json& doc) {
  constexpr const char* ctx = "vocab";
  const int version = get<int>(doc, "format_version", ctx);
  if (version != kCohortFormatVersion)
    throw LoadError("vocab: field 'format_version' is " + std::to_string(version) +
                    ", expected " + std::to_string(kCohortFormatVersion));
  Vocabularies v;
  v.lab_ids = get<std::vector<std::string>>(doc, "lab_ids", ctx);
  v.procedure_ids = get<std::vector<std::string>>(doc, "procedure_ids", ctx);
  v.diagnosis_ids = get<std::vector<std::string>>(doc, "diagnosis_ids", ctx);
  for (const auto& r : get<std::vector<std::vector<double>>>(doc, "lab_normal_ranges", ctx)) {
    if (r.size() != 2) throw LoadError("vocab: field 'lab_normal_ranges' entries must be [low, high]");
    v.lab_normal_ranges.push_back({r[0], r[1]});
  }
  try {
    v.validate();
  } catch (const UsageError& e) {
    throw LoadError(e.what());
  }
  return v;
}

json patient_to_json(const PatientRecord& p) {
  return {{"patient_id", p.patient_id},
          {"lab_features", p.lab_features},
          {"diagnosis_bits", p.diagnosis_bits},
          {"pcp_procedure_bits", p.pcp_procedure_bits},
          {"specialist_id", p.specialist_id},
          {"specialty_procedure_bits", p.specialty_procedure_bits}};
}

PatientRecord patient_from_json(const json& doc, bool require_labels) {
  constexpr const char* ctx = "patient";
  PatientRecord p;
  p.patient_id = get<std::string>(doc, "patient_id", ctx);
  p.lab_features = get<BitVector>(doc, "lab_features", ctx);
  p.diagnosis_bits = get<BitVector>(doc, "diagnosis_bits", ctx);
  p.pcp_procedure_bits = get<BitVector>(doc, "pcp_procedure_bits", ctx);
  p.specialist_id = get<std::string>(doc, "specialist_id", ctx);
  if (require_labels || doc.contains("specialty_procedure_bits"))
    p.specialty_procedure_bits = get<BitVector>(doc, "specialty_procedure_bits", ctx);
  else
    p.specialty_procedure_bits.assign(kNumProcedures, 0);
  try {
    p.validate();
  } catch (const UsageError& e) {
    throw LoadError(e.what());
  }
  return p;
}

std::string patients_to_jsonl(const std::vector<PatientRecord>& patients) {
  std::string out;
  for (const auto& p : patients) {
    out += patient_to_json(p).dump();
    out += '\n';
  }
  return out;
}

std::vector<PatientRecord> patients_from_jsonl(const std::string& text, bool require_labels) {
  std::vector<PatientRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      out.push_back(patient_from_json(doc, require_labels));
    } catch (const LoadError& e) {
      throw LoadError("cohort line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
  write_file_atomic(dir / kVocabFileName, vocab_to_json(cohort.vocab).dump(2) + "\n");
  write_file_atomic(dir / kCohortFileName, patients_to_jsonl(cohort.patients));
}

Cohort load_cohort(const std::filesystem::path& dir) {
  Cohort c;
  try {
    c.vocab = vocab_from_json(json::parse(read_file(dir / kVocabFileName)));
  } catch (const json::exception& e) {
    throw LoadError("vocab: " + std::string(e.what()));
  }
  c.patients = patients_from_jsonl(read_file(dir / kCohortFileName));
  return c;
}

}  // namespace clinrec
