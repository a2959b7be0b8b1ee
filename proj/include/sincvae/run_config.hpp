#pragma once

#include "sincvae/detector.hpp"
#include "sincvae/ingest.hpp"
#include "sincvae/vae.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sincvae {

// Flat key = value configuration. Every key has a registered default; unknown
// keys are rejected.
class RunConfig {
 public:
  RunConfig();

  struct Key {
    std::string name;
    std::string default_value;
    std::string help;
  };
  static const std::vector<Key>& keys();

  // `key = value` per line, '#' starts a comment.
  void load(std::istream& in, const std::string& source);
  void load_file(const std::filesystem::path& path);
  // "key=value"
  void apply(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::uint64_t seed() const;
  std::filesystem::path out_dir() const;
  // Empty value -> `fallback` under the output directory.
  std::filesystem::path path_or(const std::string& key, const std::string& fallback) const;

  // Sorted `key = value` lines.
  void write(std::ostream& out) const;

  VaeArchitecture architecture() const;  // data shape fields left at defaults
  TrainConfig train_config() const;
  ThresholdPolicy threshold_policy() const;
  PhaseHorizons horizons() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sincvae
