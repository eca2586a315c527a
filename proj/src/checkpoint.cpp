#include "mew/checkpoint.hpp"

#include "mew/binary_io.hpp"
#include "mew/error.hpp"
#include "mew/rng.hpp"

namespace mew {

nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const TaskSpec& t : c.tasks) tasks.push_back({{"name", t.name}, {"kind", task_kind_name(t.kind)}});
  return {{"feature_dim", c.feature_dim},
          {"hidden_dim", c.hidden_dim},
          {"hops", c.hops},
          {"shared_weights", c.shared_weights},
          {"dropout", c.dropout},
          {"fusion", fusion_name(c.fusion)},
          {"activation", activation_name(c.activation)},
          {"pooling", pooling_name(c.pooling)},
          {"tasks", tasks}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.hops = j.at("hops").get<int>();
    c.shared_weights = j.at("shared_weights").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.pooling = parse_pooling(j.at("pooling").get<std::string>());
    for (const auto& t : j.at("tasks")) {
      c.tasks.push_back({t.at("name").get<std::string>(), parse_task_kind(t.at("kind").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("model config: ") + e.what());
  }
  return c;
}

std::string encode_checkpoint(const ModelParams& params, const nlohmann::json& extra) {
  if (!extra.is_object()) throw Error(Errc::InvalidConfig, "checkpoint metadata must be an object");
  nlohmann::json meta = extra;
  meta["model"] = model_config_to_json(params.config());
  nlohmann::json blocks = nlohmann::json::array();
  for (const NamedBlock& b : params.layout().blocks) {
    blocks.push_back({{"name", b.name}, {"offset", b.slot.offset}, {"rows", b.slot.rows}, {"cols", b.slot.cols}});
  }
  meta["blocks"] = blocks;
  const std::string text = meta.dump();

  std::string out;
  out.append("MEWC", 4);
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  binio::put_u64(out, params.size());
  for (double v : params.values()) binio::put_f32(out, static_cast<float>(v));
  binio::put_u64(out, fnv1a(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  binio::Reader r(bytes);
  if (r.take(4) != "MEWC") throw Error(Errc::BadMagic, "not a MEWC checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                           std::to_string(kCheckpointVersion));
  }
  const std::uint32_t meta_len = r.u32();
  const std::string_view text = r.take(meta_len);
  const std::uint64_t count = r.u64();
  if (r.remaining() < count * 4 + 8) throw Error(Errc::TruncatedFile, "checkpoint parameters truncated");
  const std::size_t param_start = r.position();
  r.take(count * 4);
  const std::size_t hash_at = r.position();
  const std::uint64_t stored = r.u64();
  if (fnv1a(bytes.substr(0, hash_at)) != stored) throw Error(Errc::HashMismatch, "checkpoint content hash mismatch");

  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("checkpoint metadata: ") + e.what());
  }
  ck.params = ModelParams(model_config_from_json(ck.metadata.at("model")));
  if (ck.params.size() != count) {
    throw Error(Errc::DimMismatch, "checkpoint holds " + std::to_string(count) + " parameters, model needs " +
                                       std::to_string(ck.params.size()));
  }
  binio::Reader pr(bytes.substr(param_start, count * 4));
  for (double& v : ck.params.values()) v = static_cast<double>(pr.f32());
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params, const nlohmann::json& extra) {
  binio::write_file(path.string(), encode_checkpoint(params, extra));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path.string()));
}

}  // namespace mew
