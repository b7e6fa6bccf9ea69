#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "clinrec/cli.hpp"
#include "clinrec/data_json.hpp"
#include "clinrec/error.hpp"
#include "clinrec/eval.hpp"
#include "clinrec/io.hpp"
#include "clinrec/models.hpp"
#include "clinrec/nn_json.hpp"

namespace clinrec::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, ModelKind>& model_names() {
  static const std::map<std::string, ModelKind> names{
      {"dm", ModelKind::dm},   {"ae", ModelKind::ae},   {"ensemble", ModelKind::ensemble},
      {"ann", ModelKind::ann}, {"svd", ModelKind::svd}, {"pmf", ModelKind::pmf}};
  return names;
}

std::vector<ModelKind> parse_models(const std::string& list) {
  std::vector<ModelKind> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto it = model_names().find(item);
    if (it == model_names().end())
      throw UsageError("unknown model '" + item + "' (expected dm, ae, ensemble, ann, svd, pmf)");
    if (std::ranges::find(out, it->second) == out.end()) out.push_back(it->second);
  }
  if (out.empty()) throw UsageError("--models selects no model");
  return out;
}

bool selected(const std::vector<ModelKind>& models, ModelKind kind) {
  return std::ranges::find(models, kind) != models.end();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
}

void require_exists(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw IoError(std::string(what) + " '" + path.string() + "' does not exist");
}

json parse_json_file(const fs::path& path, const char* what) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw LoadError(std::string(what) + " '" + path.string() + "': " + e.what());
  }
}

std::uint64_t split_seed_for(std::uint64_t root) { return derive_seed(root, "split"); }

std::string loss_rows(const std::string& model, const std::vector<double>& history) {
  std::string out;
  for (std::size_t e = 0; e < history.size(); ++e)
    out += model + "," + std::to_string(e + 1) + "," + format_fixed(history[e], 9) + "\n";
  return out;
}

}  // namespace

GenSummary cmd_gen(const GenOptions& options, std::ostream& log) {
  const synth::GeneratorConfig config = synth::resolved(options.generator);
  const Cohort cohort = synth::generate(config);
  ensure_dir(options.out_dir);
  save_cohort(cohort, options.out_dir);
  write_file_atomic(options.out_dir / kGeneratorFileName, synth::to_json(config).dump(1) + "\n");

  std::map<std::string, std::vector<std::string>> mapping;
  const auto top = synth::top_procedures_per_diagnosis(config, options.checklist_size);
  for (std::size_t d = 0; d < top.size(); ++d)
    for (std::size_t j : top[d]) mapping[cohort.vocab.diagnosis_ids[d]].push_back(cohort.vocab.procedure_ids[j]);
  write_file_atomic(options.out_dir / kChecklistFileName, json(mapping).dump(2) + "\n");

  GenSummary s;
  s.patients = cohort.patients.size();
  s.null_signal = config.signal_strength == 0.0;
  double labels = 0.0;
  double pcp = 0.0;
  for (const auto& p : cohort.patients) {
    labels += static_cast<double>(std::ranges::count(p.specialty_procedure_bits, 1));
    pcp += static_cast<double>(std::ranges::count(p.pcp_procedure_bits, 1));
  }
  s.positive_label_rate = labels / static_cast<double>(s.patients * kNumProcedures);
  s.mean_pcp_orders = pcp / static_cast<double>(s.patients);

  log << "generated " << s.patients << " patients (seed " << config.seed << ", signal "
      << format_fixed(config.signal_strength, 2) << ")";
  if (s.null_signal) log << " -- null-signal cohort: labels are independent of every feature";
  log << "\n  positive label rate " << format_fixed(s.positive_label_rate, 4)
      << ", mean PCP orders per patient " << format_fixed(s.mean_pcp_orders, 2) << "\n"
      << "  wrote " << (options.out_dir / kCohortFileName).string() << "\n";
  return s;
}

std::uint64_t cmd_train(const TrainOptions& options, std::ostream& log) {
  require_exists(options.cohort_dir, "cohort directory");
  const Cohort cohort = load_cohort(options.cohort_dir);
  const auto& models = options.models;
  if (selected(models, ModelKind::ensemble) &&
      !(selected(models, ModelKind::dm) && selected(models, ModelKind::ae)))
    throw UsageError("--models: ensemble needs dm and ae");

  models::ModelBundle bundle;
  bundle.vocab_hash = cohort.vocab.hash();
  bundle.train_fraction = options.train_fraction;
  bundle.split_seed = split_seed_for(options.seed);
  bundle.train_config = options.train;
  bundle.train_config.seed = derive_seed(options.seed, "train");
  bundle.two_fold_stacking = options.two_fold_stacking;
  bundle.train_config.validate();

  const CohortSplit split = split_cohort(cohort, options.train_fraction, bundle.split_seed);
  const Cohort& train = split.train;
  log << "training on " << train.patients.size() << " of " << cohort.patients.size() << " patients\n";

  std::string losses = "model,epoch,loss\n";
  if (selected(models, ModelKind::dm) || selected(models, ModelKind::ae)) {
    auto base = models::train_base_models(train, bundle.train_config);
    if (selected(models, ModelKind::dm)) {
      losses += loss_rows("dm", base.dm.loss_history);
      bundle.dm = std::move(base.dm.model);
    }
    if (selected(models, ModelKind::ae)) {
      losses += loss_rows("ae", base.ae.loss_history);
      bundle.ae = std::move(base.ae.model);
    }
    log << "  trained diagnostic model and autoencoder\n";
  }
  if (selected(models, ModelKind::ensemble)) {
    auto ens = models::train_ensemble(train, *bundle.dm, *bundle.ae, bundle.train_config,
                                      options.two_fold_stacking);
    losses += loss_rows("ensemble", ens.loss_history);
    bundle.ensemble = std::move(ens.model);
    log << "  trained ensemble\n";
  }
  if (selected(models, ModelKind::ann)) {
    auto ann = models::train_aggregate_ann(train, bundle.train_config);
    losses += loss_rows("ann", ann.loss_history);
    bundle.ann = std::move(ann.model);
    log << "  trained aggregate ANN\n";
  }
  if (selected(models, ModelKind::svd)) {
    bundle.svd = baselines::svd_fit(train, options.svd_rank);
    log << "  fitted SVD (rank " << options.svd_rank << ")\n";
  }
  if (selected(models, ModelKind::pmf)) {
    baselines::PmfConfig pmf = options.pmf;
    pmf.seed = derive_seed(options.seed, "pmf");
    auto fit = baselines::pmf_fit(train, pmf);
    losses += loss_rows("pmf", fit.objective_history);
    bundle.pmf = std::move(fit.model);
    bundle.pmf_config = pmf;
    log << "  fitted PMF (rank " << pmf.rank << ")\n";
  }

  ensure_dir(options.out_dir);
  const std::string text = models::to_json(bundle).dump() + "\n";
  write_file_atomic(options.out_dir / kBundleFileName, text);
  write_file_atomic(options.out_dir / kLossHistoryFileName, losses);
  const std::uint64_t fingerprint = fnv1a64(text);
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fingerprint));
  log << "  wrote " << (options.out_dir / kBundleFileName).string() << " (fnv1a64 " << hex << ")\n";
  return fingerprint;
}

void cmd_eval(const EvalOptions& options, std::ostream& log) {
  require_exists(options.cohort_dir, "cohort directory");
  const Cohort cohort = load_cohort(options.cohort_dir);

  std::optional<models::ModelBundle> bundle;
  if (options.bundle) {
    require_exists(*options.bundle, "bundle");
    bundle = models::bundle_from_json(parse_json_file(*options.bundle, "bundle"));
    try {
      bundle->require_vocab(cohort.vocab);
    } catch (const UsageError& e) {
      throw UsageError(std::string("refusing to evaluate: ") + e.what() +
                       "; retrain on this cohort or point --cohort at the training cohort");
    }
  }

  std::optional<baselines::Checklist> checklist;
  fs::path checklist_path = options.checklist.value_or(options.cohort_dir / kChecklistFileName);
  if (options.checklist) require_exists(checklist_path, "checklist");
  if (fs::exists(checklist_path))
    checklist = baselines::checklist_from_json(parse_json_file(checklist_path, "checklist"), cohort.vocab);
  if (!bundle && !checklist) throw UsageError("eval needs a --bundle, a --checklist, or both");

  const CohortSplit split =
      bundle ? split_cohort(cohort, bundle->train_fraction, bundle->split_seed)
             : split_cohort(cohort, options.train_fraction, split_seed_for(options.seed));
  const auto& test = split.test.patients;

  std::vector<eval::PredictionSet> sets;
  std::optional<Matrix> ensemble_scores;
  auto rows_from = [&](auto&& per_patient) {
    Matrix m(test.size(), kNumProcedures);
    for (std::size_t i = 0; i < test.size(); ++i) std::ranges::copy(per_patient(test[i]), m.row(i).begin());
    return m;
  };
  if (bundle) {
    if (bundle->has_pipeline()) {
      ensemble_scores = models::predict(*bundle->dm, *bundle->ae, *bundle->ensemble, test);
      sets.push_back(eval::PredictionSet::from_rows("ensemble", *ensemble_scores, test));
    }
    if (bundle->dm)
      sets.push_back(eval::PredictionSet::from_rows(
          "dm", nn::predict(bundle->dm->net, models::diagnostic_inputs(test)), test));
    if (bundle->ae)
      sets.push_back(eval::PredictionSet::from_rows(
          "ae", nn::predict(bundle->ae->net, models::pcp_inputs(test)), test));
    if (bundle->ann)
      sets.push_back(eval::PredictionSet::from_rows(
          "ann", nn::predict(bundle->ann->net, models::aggregate_inputs(test)), test));
    if (bundle->svd)
      sets.push_back(eval::PredictionSet::from_rows(
          "svd", rows_from([&](const PatientRecord& p) {
            return baselines::svd_predict(*bundle->svd, p.pcp_procedure_bits);
          }), test));
    if (bundle->pmf)
      sets.push_back(eval::PredictionSet::from_rows(
          "pmf", rows_from([&](const PatientRecord& p) {
            return baselines::pmf_predict(*bundle->pmf, p.pcp_procedure_bits);
          }), test));
  }
  if (checklist)
    sets.push_back(eval::PredictionSet::from_rows(
        "checklist", rows_from([&](const PatientRecord& p) {
          return baselines::checklist_predict(p.diagnosis_bits, *checklist);
        }), test));

  eval::EvalOptions eval_options;
  eval_options.bootstrap.n_resamples = options.n_resamples;
  eval_options.bootstrap.seed = derive_seed(options.seed, "bootstrap");

  std::vector<eval::MetricsReport> reports;
  json all = json::array();
  for (const auto& set : sets) {
    reports.push_back(eval::evaluate(set, eval_options));
    all.push_back(eval::to_json(reports.back()));
    log << "  " << set.label << ": AUROC " << format_fixed(reports.back().auroc, 4) << " ["
        << format_fixed(reports.back().auroc_ci.lo, 4) << ", "
        << format_fixed(reports.back().auroc_ci.hi, 4) << "]\n";
    if (!reports.back().ci_contains_point())
      log << "  warning: bootstrap interval for " << set.label << " excludes the point estimate\n";
  }

  std::vector<std::pair<std::string, std::vector<double>>> example_scores;
  const PatientRecord& example = test.front();
  if (checklist) example_scores.emplace_back("checklist", baselines::checklist_predict(example.diagnosis_bits, *checklist));
  if (ensemble_scores)
    example_scores.emplace_back("ensemble", std::vector<double>(ensemble_scores->row(0).begin(),
                                                                ensemble_scores->row(0).end()));
  const json example_json =
      eval::example_report(example, cohort.vocab, example_scores, options.example_threshold);

  ensure_dir(options.out_dir);
  write_file_atomic(options.out_dir / "pr_curve.csv", eval::pr_curve_csv(reports));
  write_file_atomic(options.out_dir / "auroc.csv", eval::auroc_csv(reports));
  write_file_atomic(options.out_dir / "policy.csv", eval::policy_csv(reports));
  write_file_atomic(options.out_dir / "precision_at_recall.csv", eval::precision_at_recall_csv(reports));
  write_file_atomic(options.out_dir / "metrics.json",
                    json{{"test_patients", test.size()}, {"reports", all}}.dump(1) + "\n");
  write_file_atomic(options.out_dir / "example_report.json", example_json.dump(2) + "\n");
  write_file_atomic(options.out_dir / "example_report.txt", eval::render_example_text(example_json));
  log << "  wrote metrics for " << reports.size() << " models to " << options.out_dir.string() << "\n";
}

std::string cmd_recommend(const RecommendOptions& options) {
  if (options.threshold.has_value() == options.top_k.has_value())
    throw UsageError("recommend needs exactly one of --threshold or --top-k");
  if (options.top_k && (*options.top_k < 1 || *options.top_k > kNumProcedures))
    throw UsageError("--top-k must lie in [1, 60]");
  if (options.threshold && !(*options.threshold >= 0.0 && *options.threshold <= 1.0))
    throw UsageError("--threshold must lie in [0, 1]");
  require_exists(options.bundle, "bundle");
  require_exists(options.patients_file, "patients file");

  const auto bundle = models::bundle_from_json(parse_json_file(options.bundle, "bundle"));
  const auto vocab = vocab_from_json(parse_json_file(options.cohort_dir / kVocabFileName, "vocab"));
  const auto patients = patients_from_jsonl(read_file(options.patients_file), false);

  json policy = options.threshold ? json{{"type", "threshold"}, {"threshold", *options.threshold}}
                                  : json{{"type", "top_k"}, {"k", *options.top_k}};
  std::string out;
  for (const auto& p : patients) {
    const auto scores = models::predict(bundle, vocab, p);
    json recs = json::array();
    const auto ranked = eval::top_k_indices(scores, options.top_k.value_or(scores.size()));
    for (std::size_t j : ranked) {
      if (options.threshold && scores[j] < *options.threshold) break;
      recs.push_back({{"procedure", vocab.procedure_ids[j]}, {"score", scores[j]}});
    }
    out += json{{"patient_id", p.patient_id},
                {"specialist_id", p.specialist_id},
                {"policy", policy},
                {"recommendations", std::move(recs)}}
               .dump() +
           "\n";
  }
  if (options.out) write_file_atomic(*options.out, out);
  return out;
}

namespace {

std::string version_string() {
  return std::string("clinrec ") + kVersion + " (cohort format " + std::to_string(kCohortFormatVersion) +
         ", model format " + std::to_string(nn::kModelFormatVersion) + ", bundle schema " +
         std::to_string(models::kBundleFormatVersion) + ")";
}

/// Turns a JSON config object into command-line tokens, placed before the
/// real arguments so explicit flags win (every option keeps its last value).
std::vector<std::string> config_tokens(const json& doc, const fs::path& path) {
  if (!doc.is_object()) throw LoadError("config '" + path.string() + "': expected a JSON object");
  std::vector<std::string> tokens;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key().starts_with("_")) continue;
    const std::string flag = "--" + it.key();
    const json& v = *it;
    if (v.is_boolean()) {
      if (v.get<bool>()) tokens.push_back(flag);
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      tokens.insert(tokens.end(), {flag, joined});
    } else {
      tokens.insert(tokens.end(), {flag, v.is_string() ? v.get<std::string>() : v.dump()});
    }
  }
  return tokens;
}

std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    else if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (!config) return args;
  const auto tokens = config_tokens(parse_json_file(*config, "config"), *config);
  std::vector<std::string> merged{args.front()};
  merged.insert(merged.end(), tokens.begin(), tokens.end());
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Specialist procedure recommender: synthetic cohorts, neural ensemble, baselines, evaluation"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  std::string config_unused;

  // gen
  GenOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic cohort");
  gen_cmd->add_option("--config", config_unused, "JSON config file (flags override it)");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.generator.seed, "Root seed")->required();
  gen_cmd->add_option("--patients", gen.generator.num_patients, "Number of patients")->capture_default_str();
  gen_cmd->add_option("--signal", gen.generator.signal_strength, "Signal strength in [0,1]")->capture_default_str();
  gen_cmd->add_option("--specialists", gen.generator.num_specialists, "Number of specialists")->capture_default_str();
  gen_cmd->add_option("--label-bias", gen.generator.label_bias, "Base logit of every order")->capture_default_str();
  gen_cmd->add_option("--pcp-echo", gen.generator.pcp_echo_prob, "PCP echo probability")->capture_default_str();
  gen_cmd->add_option("--pcp-noise", gen.generator.pcp_base_noise_prob, "PCP base noise probability")->capture_default_str();
  std::string generator_file;
  gen_cmd->add_option("--generator", generator_file, "Generator config JSON (see default-config)");
  gen_cmd->add_option("--checklist-size", gen.checklist_size, "Procedures per diagnosis in checklist.json")->capture_default_str();

  // default-config
  std::string default_out;
  auto* default_cmd = app.add_subcommand("default-config", "Print a commented default generator config");
  default_cmd->add_option("--out", default_out, "Write to this file instead of stdout");

  // train
  TrainOptions train;
  std::string train_cohort, train_out, model_list = "dm,ae,ensemble,ann,svd,pmf";
  auto* train_cmd = app.add_subcommand("train", "Train the ensemble and baselines");
  train_cmd->add_option("--config", config_unused, "JSON config file (flags override it)");
  train_cmd->add_option("--cohort", train_cohort, "Cohort directory")->required();
  train_cmd->add_option("--out", train_out, "Output directory for bundle.json")->required();
  train_cmd->add_option("--seed", train.seed, "Root seed")->required();
  train_cmd->add_option("--lr", train.train.learning_rate, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", train.train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train.train.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--dropout", train.train.dropout_p, "Dropout probability")->capture_default_str();
  train_cmd->add_option("--train-fraction", train.train_fraction, "Share of patients used for training")->capture_default_str();
  train_cmd->add_option("--models", model_list, "Comma-separated subset of dm,ae,ensemble,ann,svd,pmf")->capture_default_str();
  train_cmd->add_option("--svd-rank", train.svd_rank, "SVD rank")->capture_default_str();
  train_cmd->add_option("--pmf-rank", train.pmf.rank, "PMF rank")->capture_default_str();
  train_cmd->add_option("--pmf-lambda", train.pmf.reg_lambda, "PMF L2 weight")->capture_default_str();
  train_cmd->add_option("--pmf-lr", train.pmf.learning_rate, "PMF learning rate")->capture_default_str();
  train_cmd->add_option("--pmf-epochs", train.pmf.epochs, "PMF epochs")->capture_default_str();
  train_cmd->add_flag("--two-fold-stacking", train.two_fold_stacking,
                      "Build ensemble inputs from out-of-fold base models");

  // eval
  EvalOptions ev;
  std::string eval_cohort, eval_out, eval_bundle, eval_checklist;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate every available model on the test split");
  eval_cmd->add_option("--config", config_unused, "JSON config file (flags override it)");
  eval_cmd->add_option("--cohort", eval_cohort, "Cohort directory")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory for metrics")->required();
  eval_cmd->add_option("--seed", ev.seed, "Root seed")->required();
  eval_cmd->add_option("--bundle", eval_bundle, "bundle.json from train");
  eval_cmd->add_option("--checklist", eval_checklist, "Checklist JSON (default <cohort>/checklist.json)");
  eval_cmd->add_option("--train-fraction", ev.train_fraction, "Split used when no bundle is given")->capture_default_str();
  eval_cmd->add_option("--resamples", ev.n_resamples, "Bootstrap resamples")->capture_default_str();
  eval_cmd->add_option("--example-threshold", ev.example_threshold, "Threshold in example_report")->capture_default_str();

  // recommend
  RecommendOptions rec;
  std::string rec_bundle, rec_cohort, rec_patients, rec_out;
  double threshold = eval::kExampleThreshold;
  std::size_t top_k = 0;
  auto* rec_cmd = app.add_subcommand("recommend", "Recommend procedures for new patients");
  rec_cmd->add_option("--config", config_unused, "JSON config file (flags override it)");
  rec_cmd->add_option("--bundle", rec_bundle, "bundle.json from train")->required();
  rec_cmd->add_option("--cohort", rec_cohort, "Cohort directory holding vocab.json")->required();
  rec_cmd->add_option("--patients", rec_patients, "JSON-lines patient records")->required();
  auto* thr_opt = rec_cmd->add_option("--threshold", threshold, "Recommend scores >= threshold (default 0.20)")
                      ->expected(0, 1)
                      ->default_str("0.20");
  auto* k_opt = rec_cmd->add_option("--top-k", top_k, "Recommend the k best-scored procedures");
  rec_cmd->add_option("--out", rec_out, "Write JSON lines here instead of stdout");

  try {
    std::vector<std::string> reversed = merge_config(args);
    std::reverse(reversed.begin(), reversed.end());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      if (!generator_file.empty()) {
        auto file_config = synth::generator_config_from_json(parse_json_file(generator_file, "generator config"));
        // Flags given explicitly still override the file.
        if (gen_cmd->count("--patients")) file_config.num_patients = gen.generator.num_patients;
        if (gen_cmd->count("--signal")) file_config.signal_strength = gen.generator.signal_strength;
        if (gen_cmd->count("--specialists")) file_config.num_specialists = gen.generator.num_specialists;
        if (gen_cmd->count("--label-bias")) file_config.label_bias = gen.generator.label_bias;
        if (gen_cmd->count("--pcp-echo")) file_config.pcp_echo_prob = gen.generator.pcp_echo_prob;
        if (gen_cmd->count("--pcp-noise")) file_config.pcp_base_noise_prob = gen.generator.pcp_base_noise_prob;
        file_config.seed = gen.generator.seed;
        gen.generator = std::move(file_config);
      }
      gen.out_dir = gen_out;
      cmd_gen(gen, out);
    } else if (default_cmd->parsed()) {
      const std::string text = synth::commented_default_config().dump(2) + "\n";
      if (default_out.empty()) out << text;
      else write_file_atomic(default_out, text);
    } else if (train_cmd->parsed()) {
      train.cohort_dir = train_cohort;
      train.out_dir = train_out;
      train.models = parse_models(model_list);
      cmd_train(train, out);
    } else if (eval_cmd->parsed()) {
      ev.cohort_dir = eval_cohort;
      ev.out_dir = eval_out;
      if (!eval_bundle.empty()) ev.bundle = eval_bundle;
      if (!eval_checklist.empty()) ev.checklist = eval_checklist;
      cmd_eval(ev, out);
    } else if (rec_cmd->parsed()) {
      rec.bundle = rec_bundle;
      rec.cohort_dir = rec_cohort;
      rec.patients_file = rec_patients;
      if (thr_opt->count()) rec.threshold = threshold;
      if (k_opt->count()) rec.top_k = top_k;
      if (!rec_out.empty()) rec.out = rec_out;
      const std::string text = cmd_recommend(rec);
      if (!rec.out) out << text;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace clinrec::cli
