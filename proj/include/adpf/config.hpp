#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "adpf/data.hpp"
#include "adpf/training.hpp"

namespace adpf {

/// Flat `key = value` document. Keys may be dotted (`crop.patch_size`);
/// `#` starts a comment anywhere on a line.
class KeyValues {
 public:
  /// Throws ConfigError naming the offending line on malformed input or a
  /// repeated key.
  static KeyValues parse(const std::string& text);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  int line_of(const std::string& key) const;

 private:
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

/// Unknown keys and unparsable values raise ConfigError; missing keys keep
/// their defaults.
TrainConfig train_config_from(const KeyValues& kv);
TrainConfig parse_train_config(const std::string& text);
/// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string serialize(const TrainConfig& cfg);

SynthSpec synth_spec_from(const KeyValues& kv);
SynthSpec parse_synth_spec(const std::string& text);
std::string serialize(const SynthSpec& spec);

/// FNV-1a 64 over the canonical serialization, as 16 hex digits.
std::string config_hash(const std::string& canonical_text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace adpf
