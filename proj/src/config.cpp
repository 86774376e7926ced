#include "bbs/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

extern char** environ;

namespace bbs::cfg {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
  std::array<double, 3> out{};
  std::stringstream ss(v);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) break;
    out[i++] = std::stod(trim(part));
  }
  if (i != 3) throw std::invalid_argument("config: " + key + " wants three comma-separated numbers, got '" + v + "'");
  return out;
}

std::array<int64_t, 5> parse_five(const std::string& key, const std::string& v) {
  std::array<int64_t, 5> out{};
  std::stringstream ss(v);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 5) break;
    out[i++] = std::stoll(trim(part));
  }
  if (i != 5) throw std::invalid_argument("config: " + key + " wants five comma-separated integers, got '" + v + "'");
  return out;
}

}  // namespace

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " wants an integer, got '" + it->second + "'");
  }
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " wants an unsigned integer, got '" + it->second + "'");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " wants a number, got '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: " + key + " wants a boolean, got '" + it->second + "'");
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "model.variant",      "model.backbone",       "model.side",
      "model.dem_ratio",    "model.dem_spatial_kernel", "model.loss_alpha",
      "model.zero_depth",   "model.init_seed",      "model.toy_channels",
      "model.rgb_mean",     "model.rgb_std",        "backbone.weights",
      "train.lr",           "train.lr_decay_every", "train.lr_decay_factor",
      "train.epochs",       "train.max_iters",      "train.batch",
      "train.clip",         "train.beta1",          "train.beta2",
      "train.adam_eps",     "train.weight_decay",   "train.seed",
      "train.workers",      "train.augment",        "train.rotate_deg",
      "train.crop_frac",    "train.log_every",      "train.ckpt_every_epochs",
      "data.root",          "data.name",            "data.invert_depth",
      "synth.style",        "synth.n",              "synth.side",
      "synth.seed",         "synth.informative_depth",
      "eval.normalize_pred",
  };
  return keys;
}

Config parse_config_text(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '=': '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has an empty key");
    c.values[key] = val;
  }
  return c;
}

Config load_config_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot read '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

void validate_keys(const Config& c) {
  const auto& known = known_keys();
  for (const auto& [key, val] : c.values)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string env_name_for(const std::string& key) {
  std::string out = "BBS_";
  for (char ch : key) {
    if (ch == '.')
      out.push_back('_');
    else
      out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return out;
}

void apply_env_overrides(Config& c, std::vector<std::string>* warnings) {
  std::map<std::string, std::string> env_to_key;
  for (const std::string& key : known_keys()) env_to_key[env_name_for(key)] = key;

  for (char** e = environ; e && *e; ++e) {
    std::string entry(*e);
    if (entry.rfind("BBS_", 0) != 0) continue;
    size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(0, eq);
    auto it = env_to_key.find(name);
    if (it == env_to_key.end()) {
      if (warnings) warnings->push_back("environment variable " + name + " matches no config key");
      continue;
    }
    c.values[it->second] = entry.substr(eq + 1);
  }
}

std::string config_hash(const Config& c) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [key, val] : c.values) {  // std::map iterates in sorted key order
    std::string line = key + "=" + val + "\n";
    for (unsigned char ch : line) h = (h ^ ch) * 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

net::ModelConfig model_config_from(const Config& c) {
  net::ModelConfig m;
  m.variant = net::variant_from_string(c.get_str("model.variant", "BBS_RL"));
  m.backbone.kind = c.get_str("model.backbone", "toy");
  if (m.backbone.kind != "toy" && m.backbone.kind != "full")
    throw std::invalid_argument("config: model.backbone wants toy|full, got '" + m.backbone.kind + "'");
  m.side = c.get_int("model.side", 352);
  m.dem_ratio = static_cast<int>(c.get_int("model.dem_ratio", 16));
  m.dem_spatial_kernel = static_cast<int>(c.get_int("model.dem_spatial_kernel", 7));
  m.loss_alpha = c.get_double("model.loss_alpha", 0.5);
  m.zero_depth = c.get_bool("model.zero_depth", false);
  m.init_seed = c.get_u64("model.init_seed", 1);
  if (c.has("model.toy_channels"))
    m.backbone.toy_channels = parse_five("model.toy_channels", c.values.at("model.toy_channels"));
  if (c.has("model.rgb_mean")) m.norm.mean = parse_triple("model.rgb_mean", c.values.at("model.rgb_mean"));
  if (c.has("model.rgb_std")) m.norm.stdev = parse_triple("model.rgb_std", c.values.at("model.rgb_std"));
  return m;
}

train::TrainConfig train_config_from(const Config& c) {
  train::TrainConfig t;
  t.lr = c.get_double("train.lr", t.lr);
  t.lr_decay_every = static_cast<int>(c.get_int("train.lr_decay_every", t.lr_decay_every));
  t.lr_decay_factor = c.get_double("train.lr_decay_factor", t.lr_decay_factor);
  t.epochs = static_cast<int>(c.get_int("train.epochs", t.epochs));
  t.max_iters = c.get_int("train.max_iters", t.max_iters);
  t.batch = static_cast<int>(c.get_int("train.batch", t.batch));
  double clip = c.get_double("train.clip", 0.5);
  if (clip < 0) throw std::invalid_argument("config: train.clip wants a non-negative bound");
  t.clip_lo = -clip;
  t.clip_hi = clip;
  t.beta1 = c.get_double("train.beta1", t.beta1);
  t.beta2 = c.get_double("train.beta2", t.beta2);
  t.adam_eps = c.get_double("train.adam_eps", t.adam_eps);
  t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
  t.seed = c.get_u64("train.seed", t.seed);
  t.workers = static_cast<int>(c.get_int("train.workers", t.workers));
  t.augment = c.get_bool("train.augment", t.augment);
  t.rotate_deg = c.get_double("train.rotate_deg", t.rotate_deg);
  t.crop_frac = c.get_double("train.crop_frac", t.crop_frac);
  t.log_every = static_cast<int>(c.get_int("train.log_every", t.log_every));
  t.ckpt_every_epochs = static_cast<int>(c.get_int("train.ckpt_every_epochs", t.ckpt_every_epochs));
  t.side = c.get_int("model.side", t.side);
  t.loss_alpha = c.get_double("model.loss_alpha", t.loss_alpha);
  t.config_hash = config_hash(c);
  return t;
}

}  // namespace bbs::cfg
