#include "lrurec/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lrurec/data.hpp"

namespace lrurec {

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      // data
      "input", "out", "delimiter", "user_col", "item_col", "time_col",
      "min_count", "max_len", "split_dir",
      // model
      "h", "blocks", "dropout", "use_layer_norm", "use_residual", "use_pffn",
      "r_min", "r_max",
      // training
      "lr", "batch_size", "max_epochs", "validate_every", "patience",
      "weight_decay", "negative_samples", "last_position_only",
      "weight_decay_grid", "dropout_grid", "eval_sample_users",
      // evaluation
      "checkpoint", "phase", "eval_sampled", "exclude_seen",
      // bench
      "l_grid", "history_grid", "steps", "reps", "bench_n",
      // run
      "seed", "workers",
  };
  return keys;
}

RunConfig::RunConfig() = default;

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end())
    throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip comments and surrounding blanks
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    set(trim(key), trim(value));
  }
}

bool RunConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string RunConfig::get_str(const std::string& key,
                               const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

long RunConfig::get_int(const std::string& key, long def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  char* end = nullptr;
  long v = std::strtol(it->second.c_str(), &end, 10);
  if (it->second.empty() || *end != '\0')
    throw ConfigError("config key '" + key + "': expected integer, got '" +
                      it->second + "'");
  return v;
}

double RunConfig::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (it->second.empty() || *end != '\0')
    throw ConfigError("config key '" + key + "': expected number, got '" +
                      it->second + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& s = it->second;
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + s +
                    "'");
}

std::vector<double> RunConfig::get_doubles(
    const std::string& key, const std::vector<double>& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0')
      throw ConfigError("config key '" + key + "': expected number list");
    out.push_back(v);
  }
  if (out.empty())
    throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::string t = canonical_text();
  return fnv1a64(t.data(), t.size(), 0);
}

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace lrurec
