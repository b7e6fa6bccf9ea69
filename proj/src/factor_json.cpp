#include "clinrec/baselines.hpp"
#include "clinrec/error.hpp"

namespace clinrec::baselines {

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from(const nlohmann::json& doc) {
  Matrix m(doc.at("rows").get<std::size_t>(), doc.at("cols").get<std::size_t>());
  const auto v = doc.at("values").get<std::vector<double>>();
  if (v.size() != m.size()) throw LoadError("factor model: matrix value count mismatch");
  std::ranges::copy(v, m.values().begin());
  return m;
}

}  // namespace

nlohmann::json to_json(const FactorModel& model) {
  return {{"rank", model.rank},
          {"global_mean", model.global_mean},
          {"reg_lambda", model.reg_lambda},
          {"singular_values", model.singular_values},
          {"item_factors", matrix_json(model.item_factors)},
          {"user_factors", matrix_json(model.user_factors)}};
}

FactorModel factor_model_from_json(const nlohmann::json& doc) {
  try {
    FactorModel m;
    m.rank = doc.at("rank").get<std::size_t>();
    m.global_mean = doc.at("global_mean").get<double>();
    m.reg_lambda = doc.at("reg_lambda").get<double>();
    m.singular_values = doc.at("singular_values").get<std::vector<double>>();
    m.item_factors = matrix_from(doc.at("item_factors"));
    m.user_factors = matrix_from(doc.at("user_factors"));
    if (m.item_factors.cols() != m.rank || m.user_factors.cols() != m.rank)
      throw LoadError("factor model: factor width disagrees with 'rank'");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("factor model: ") + e.what());
  }
}

nlohmann::json to_json(const PmfConfig& c) {
  return {{"rank", c.rank},
          {"reg_lambda", c.reg_lambda},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"seed", c.seed}};
}

PmfConfig pmf_config_from_json(const nlohmann::json& doc) {
  try {
    PmfConfig c;
    c.rank = doc.at("rank").get<std::size_t>();
    c.reg_lambda = doc.at("reg_lambda").get<double>();
    c.learning_rate = doc.at("learning_rate").get<double>();
    c.epochs = doc.at("epochs").get<std::size_t>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("pmf config: ") + e.what());
  }
}

}  // namespace clinrec::baselines
