#pragma once

#include <map>
#include <string>
#include <vector>

#include "bbs/model.hpp"
#include "bbs/trainer.hpp"

namespace bbs::cfg {

// Flat sectioned key-value config ("train.lr = 1e-4", '#' comments). Values
// stay strings until a typed getter pulls them; unknown keys are rejected by
// validate_keys so typos fail loudly.
struct Config {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

const std::vector<std::string>& known_keys();

Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);  // empty path -> empty config

// Throws std::invalid_argument naming the first unknown key.
void validate_keys(const Config& c);

// Environment overrides: each known key maps to BBS_ + upper-cased key with
// dots as underscores (train.lr -> BBS_TRAIN_LR). Set variables override the
// file; BBS_-prefixed variables matching no known key are reported.
std::string env_name_for(const std::string& key);
void apply_env_overrides(Config& c, std::vector<std::string>* warnings = nullptr);

// FNV-1a 64 over the sorted "key=value" lines, lower-case hex.
std::string config_hash(const Config& c);

net::ModelConfig model_config_from(const Config& c);
train::TrainConfig train_config_from(const Config& c);

}  // namespace bbs::cfg
