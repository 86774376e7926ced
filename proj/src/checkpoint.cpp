#include "bbs/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace bbs::ckpt {

namespace {

constexpr char kMagic[8] = {'B', 'B', 'S', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kSchema = 1;

json meta_to_json(const CheckpointMeta& m) {
  json j;
  j["variant"] = m.variant;
  j["config_hash"] = m.config_hash;
  j["epoch"] = m.epoch;
  j["iter"] = m.iter;
  j["loss_alpha"] = m.loss_alpha;
  j["side"] = m.side;
  j["extra"] = m.extra;
  return j;
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  m.schema = static_cast<int>(kSchema);
  m.variant = j.value("variant", "");
  m.config_hash = j.value("config_hash", "");
  m.epoch = j.value("epoch", int64_t{0});
  m.iter = j.value("iter", int64_t{0});
  m.loss_alpha = j.value("loss_alpha", 0.5);
  m.side = j.value("side", int64_t{0});
  if (j.contains("extra")) m.extra = j.at("extra").get<std::map<std::string, std::string>>();
  return m;
}

json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  uint32_t schema = 0;
  uint64_t hlen = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&schema), sizeof schema);
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("checkpoint schema error: " + path + " is not a checkpoint file");
  if (schema != kSchema)
    throw CheckpointError("checkpoint schema error: " + path + " has schema " + std::to_string(schema) +
                          ", this build reads " + std::to_string(kSchema));
  if (hlen > (1u << 26))
    throw CheckpointError("checkpoint schema error: implausible header size in " + path);
  std::string text(hlen, '\0');
  in.read(text.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw CheckpointError("checkpoint schema error: truncated header in " + path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint schema error: bad header in " + path + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  json j;
  j["meta"] = meta_to_json(c.meta);
  j["tensors"] = json::array();
  for (const auto& [name, t] : c.tensors) j["tensors"].push_back({{"name", name}, {"shape", t.shape}});
  std::string header = j.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  uint32_t schema = kSchema;
  uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&schema), sizeof schema);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : c.tensors)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!out) throw CheckpointError("short write saving checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  json j = read_header(in, path);

  Checkpoint c;
  c.meta = meta_from_json(j.at("meta"));
  for (const auto& te : j.at("tensors")) {
    std::string name = te.at("name").get<std::string>();
    std::vector<int64_t> shape = te.at("shape").get<std::vector<int64_t>>();
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw CheckpointError("checkpoint schema error: truncated tensor '" + name + "' in " + path);
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  return c;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return meta_from_json(read_header(in, path).at("meta"));
}

Checkpoint snapshot(const nn::ParamStore& ps, CheckpointMeta meta) {
  Checkpoint c;
  c.meta = std::move(meta);
  for (const auto& [name, v] : ps.items()) c.tensors.emplace_back(name, v->value);
  return c;
}

void fill_param_store(const Checkpoint& c, nn::ParamStore& ps) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : c.tensors) by_name[name] = &t;
  for (const auto& [name, v] : ps.items()) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CheckpointError("checkpoint is missing parameter '" + name + "'");
    if (it->second->shape != v->value.shape)
      throw CheckpointError("checkpoint parameter '" + name + "' has shape " + shape_str(it->second->shape) +
                            ", model wants " + shape_str(v->value.shape));
    v->value = *it->second;
  }
}

}  // namespace bbs::ckpt
