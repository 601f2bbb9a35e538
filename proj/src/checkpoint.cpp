#include "varscore/checkpoint.hpp"

#include <cstring>

#include <json.hpp>

#include "varscore/errors.hpp"
#include "varscore/ioutil.hpp"

namespace varscore {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

nlohmann::json spec_to_json(const FeatureSpec& s) {
  return {{"node_scalar_dim", s.node_scalar_dim}, {"node_vector_dim", s.node_vector_dim},
          {"edge_scalar_dim", s.edge_scalar_dim}, {"edge_vector_dim", s.edge_vector_dim},
          {"hidden_out_dim", s.hidden_out_dim},   {"num_layers", s.num_layers},
          {"cutoff", s.cutoff}};
}

FeatureSpec spec_from_json(const nlohmann::json& j) {
  FeatureSpec s;
  s.node_scalar_dim = j.at("node_scalar_dim").get<int>();
  s.node_vector_dim = j.at("node_vector_dim").get<int>();
  s.edge_scalar_dim = j.at("edge_scalar_dim").get<int>();
  s.edge_vector_dim = j.at("edge_vector_dim").get<int>();
  s.hidden_out_dim = j.at("hidden_out_dim").get<int>();
  s.num_layers = j.at("num_layers").get<int>();
  s.cutoff = j.at("cutoff").get<double>();
  return s;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"scheduler_patience", c.scheduler_patience},
          {"decay_rate", c.decay_rate},
          {"dropout", c.dropout},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"plain_sgd", c.plain_sgd}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.scheduler_patience = j.at("scheduler_patience").get<int>();
  c.decay_rate = j.at("decay_rate").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.plain_sgd = j.value("plain_sgd", false);
  return c;
}

template <typename T>
void append_raw(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path, const ScorerParams& params,
                     const TrainConfig& config) {
  nlohmann::json header;
  header["spec"] = spec_to_json(params.spec());
  header["train_config"] = config_to_json(config);
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& t : params.tensors()) {
    tensors.push_back(
        {{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"offset", t.offset}});
  }
  const std::string header_text = header.dump();

  std::string blob;
  blob.reserve(16 + header_text.size() + static_cast<std::size_t>(params.size()) * 8);
  blob.append(kMagic, 4);
  append_raw(blob, kFormatVersion);
  append_raw(blob, static_cast<std::uint64_t>(header_text.size()));
  blob += header_text;
  blob.append(reinterpret_cast<const char*>(params.flat().data()),
              static_cast<std::size_t>(params.size()) * sizeof(double));
  write_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 4) != 0) {
    throw ParseError("'" + path + "' is not a checkpoint file");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, blob.data() + 4, 4);
  if (version != kFormatVersion) {
    throw ParseError("unsupported checkpoint format version " + std::to_string(version));
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + 8, 8);
  if (16 + header_len > blob.size()) throw ParseError("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what());
  }

  Checkpoint ckpt{ScorerParams(spec_from_json(header.at("spec"))),
                  config_from_json(header.at("train_config"))};

  // Tensor table must agree with the registry derived from the dimensions.
  const auto& table = header.at("tensors");
  const auto& infos = ckpt.params.tensors();
  if (table.size() != infos.size()) throw ParseError("checkpoint tensor table mismatch");
  for (std::size_t i = 0; i < infos.size(); ++i) {
    const auto& row = table[i];
    if (row.at("name").get<std::string>() != infos[i].name ||
        row.at("rows").get<int>() != infos[i].rows ||
        row.at("cols").get<int>() != infos[i].cols ||
        row.at("offset").get<std::int64_t>() != infos[i].offset) {
      throw ParseError("checkpoint tensor '" + infos[i].name + "' does not match its spec shape");
    }
  }

  const std::size_t payload = blob.size() - 16 - header_len;
  const auto expected = static_cast<std::size_t>(ckpt.params.size()) * sizeof(double);
  if (payload != expected) {
    throw ParseError("checkpoint payload is " + std::to_string(payload) + " bytes, expected " +
                     std::to_string(expected));
  }
  std::memcpy(ckpt.params.flat().data(), blob.data() + 16 + header_len, payload);
  return ckpt;
}

}  // namespace varscore
