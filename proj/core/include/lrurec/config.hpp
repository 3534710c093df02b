#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrurec {

// Raised for malformed or unknown configuration; the CLI maps it to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value run configuration. Unknown keys are rejected; values from
// flags override values from the file.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& def) const;
  long get_int(const std::string& key, long def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& def) const;

  // Canonical sorted text and its hash, written into output headers.
  std::string canonical_text() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lrurec
