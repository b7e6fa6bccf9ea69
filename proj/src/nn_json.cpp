#include "clinrec/nn_json.hpp"

#include <string>

#include "clinrec/error.hpp"

namespace clinrec::nn {
namespace {

const nlohmann::json& field(const nlohmann::json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw LoadError(std::string("model document: missing field '") + name + "'");
  return *it;
}

}  // namespace

nlohmann::json to_json(const MlpModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    layers.push_back({{"in_dim", layer.in_dim()},
                      {"out_dim", layer.out_dim()},
                      {"weights", std::vector<double>(layer.weights().values().begin(),
                                                      layer.weights().values().end())},
                      {"biases", layer.biases()}});
  }
  return {{"format_version", kModelFormatVersion},
          {"layer_dims", model.layer_dims()},
          {"hidden_activation", "relu"},
          {"output_activation", "sigmoid"},
          {"dropout_p", model.dropout_p()},
          {"layers", std::move(layers)}};
}

MlpModel model_from_json(const nlohmann::json& doc) {
  try {
    const int version = field(doc, "format_version").get<int>();
    if (version != kModelFormatVersion)
      throw LoadError("model document: unsupported format_version " + std::to_string(version));
    if (field(doc, "hidden_activation") != "relu")
      throw LoadError("model document: field 'hidden_activation' must be \"relu\"");
    if (field(doc, "output_activation") != "sigmoid")
      throw LoadError("model document: field 'output_activation' must be \"sigmoid\"");
    const auto dims = field(doc, "layer_dims").get<std::vector<std::size_t>>();
    const auto& layer_docs = field(doc, "layers");
    if (dims.size() != layer_docs.size() + 1)
      throw LoadError("model document: 'layer_dims' disagrees with 'layers'");

    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i < layer_docs.size(); ++i) {
      const auto& ld = layer_docs[i];
      const auto in = field(ld, "in_dim").get<std::size_t>();
      const auto out = field(ld, "out_dim").get<std::size_t>();
      if (in != dims[i] || out != dims[i + 1])
        throw LoadError("model document: layer " + std::to_string(i) +
                        " dims disagree with 'layer_dims'");
      const auto w = field(ld, "weights").get<std::vector<double>>();
      const auto b = field(ld, "biases").get<std::vector<double>>();
      if (w.size() != in * out || b.size() != out)
        throw LoadError("model document: layer " + std::to_string(i) +
                        " 'weights'/'biases' have the wrong length");
      DenseLayer layer(in, out);
      std::ranges::copy(w, layer.weight_values().begin());
      std::ranges::copy(b, layer.bias_values().begin());
      layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers), field(doc, "dropout_p").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("model document: ") + e.what());
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"dropout_p", c.dropout_p},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  try {
    TrainConfig c;
    c.learning_rate = field(doc, "learning_rate").get<double>();
    c.epochs = field(doc, "epochs").get<std::size_t>();
    c.batch_size = field(doc, "batch_size").get<std::size_t>();
    c.dropout_p = field(doc, "dropout_p").get<double>();
    c.seed = field(doc, "seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("train config: ") + e.what());
  }
}

}  // namespace clinrec::nn
