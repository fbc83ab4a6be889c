#include "adpf/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "adpf/errors.hpp"

namespace adpf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const KeyValues& kv, const std::string& key) {
  return "line " + std::to_string(kv.line_of(key)) + ": ";
}

template <class T>
T parse_number(const KeyValues& kv, const std::string& key) {
  const std::string& text = kv.entries().at(key);
  T out{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(where(kv, key) + "bad value '" + text + "' for " + key);
  }
  return out;
}

bool parse_bool(const KeyValues& kv, const std::string& key) {
  const std::string& text = kv.entries().at(key);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(where(kv, key) + "expected true or false for " + key + ", got '" + text + "'");
}

std::vector<std::size_t> parse_list(const KeyValues& kv, const std::string& key) {
  const std::string& text = kv.entries().at(key);
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t v = 0;
    const char* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (item.empty() || ec != std::errc{} || ptr != end) {
      throw ConfigError(where(kv, key) + "bad list '" + text + "' for " + key);
    }
    out.push_back(v);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// One binding per key: how to read it into the struct and how to print it.
template <class S>
struct Field {
  const char* key;
  std::function<void(S&, const KeyValues&, const std::string&)> read;
  std::function<std::string(const S&)> write;
};

#define ADPF_NUM(S, key, member, T)                                                           \
  Field<S> {                                                                                  \
    key, [](S& s, const KeyValues& kv, const std::string& k) { s.member = parse_number<T>(kv, k); }, \
        [](const S& s) { return fmt(static_cast<T>(s.member)); }                             \
  }

const std::vector<Field<TrainConfig>>& train_fields() {
  using C = TrainConfig;
  static const std::vector<Field<C>> fields = {
      ADPF_NUM(C, "batch_size", batch_size, std::size_t),
      ADPF_NUM(C, "epochs_stage1", epochs_stage1, std::size_t),
      ADPF_NUM(C, "epochs_stage2", epochs_stage2, std::size_t),
      ADPF_NUM(C, "lr_initial", lr_initial, double),
      ADPF_NUM(C, "lr_decay_factor", lr_decay_factor, double),
      ADPF_NUM(C, "lr_decay_every", lr_decay_every, std::size_t),
      ADPF_NUM(C, "momentum", momentum, double),
      ADPF_NUM(C, "lambda", lambda, double),
      ADPF_NUM(C, "sigma", sigma, double),
      ADPF_NUM(C, "mae_weight", mae_weight, double),
      ADPF_NUM(C, "kl_weight", kl_weight, double),
      ADPF_NUM(C, "age_min", age_min, int),
      ADPF_NUM(C, "age_max", age_max, int),
      ADPF_NUM(C, "heads", heads, std::size_t),
      ADPF_NUM(C, "in_channels", in_channels, std::size_t),
      ADPF_NUM(C, "input_size", input_size, std::size_t),
      {"backbone", [](C& s, const KeyValues& kv, const std::string& k) { s.backbone = parse_list(kv, k); },
       [](const C& s) { return fmt(s.backbone); }},
      ADPF_NUM(C, "head_ratio", head_ratio, std::size_t),
      {"positive_values", [](C& s, const KeyValues& kv, const std::string& k) { s.positive_values = parse_bool(kv, k); },
       [](const C& s) { return fmt(s.positive_values); }},
      ADPF_NUM(C, "fusion_main_channels", fusion_main_channels, std::size_t),
      ADPF_NUM(C, "fusion_stem_channels", fusion_stem_channels, std::size_t),
      ADPF_NUM(C, "train_frac", train_frac, double),
      {"augment", [](C& s, const KeyValues& kv, const std::string& k) { s.augment = parse_bool(kv, k); },
       [](const C& s) { return fmt(s.augment); }},
      ADPF_NUM(C, "augment_pad", augment_pad, std::size_t),
      {"seed", [](C& s, const KeyValues& kv, const std::string& k) { s.seed = parse_number<std::uint64_t>(kv, k); },
       [](const C& s) { return fmt(s.seed, 0); }},
      ADPF_NUM(C, "crop.threshold_frac", crop.threshold_frac, double),
      ADPF_NUM(C, "crop.min_box", crop.min_box, std::size_t),
      ADPF_NUM(C, "crop.patch_size", crop.patch_size, std::size_t),
  };
  return fields;
}

const std::vector<Field<SynthSpec>>& synth_fields() {
  using S = SynthSpec;
  static const std::vector<Field<S>> fields = {
      ADPF_NUM(S, "image_size", image_size, std::size_t),
      ADPF_NUM(S, "channels", channels, std::size_t),
      ADPF_NUM(S, "age_min", age_min, int),
      ADPF_NUM(S, "age_max", age_max, int),
      ADPF_NUM(S, "evidence_box", evidence_box, std::size_t),
      ADPF_NUM(S, "noise_level", noise_level, double),
      {"placement",
       [](S& s, const KeyValues& kv, const std::string& k) {
         const auto& v = kv.entries().at(k);
         if (v == "fixed") {
           s.placement = Placement::fixed;
         } else if (v == "jittered") {
           s.placement = Placement::jittered;
         } else {
           throw ConfigError(where(kv, k) + "placement must be fixed or jittered, got '" + v + "'");
         }
       },
       [](const S& s) { return std::string(s.placement == Placement::fixed ? "fixed" : "jittered"); }},
      ADPF_NUM(S, "jitter_margin", jitter_margin, std::size_t),
      {"seed", [](S& s, const KeyValues& kv, const std::string& k) { s.seed = parse_number<std::uint64_t>(kv, k); },
       [](const S& s) { return fmt(s.seed, 0); }},
  };
  return fields;
}

#undef ADPF_NUM

template <class S>
S read_fields(const KeyValues& kv, const std::vector<Field<S>>& fields) {
  S out;
  for (const auto& [key, value] : kv.entries()) {
    bool known = false;
    for (const auto& f : fields) {
      if (key == f.key) {
        f.read(out, kv, key);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(where(kv, key) + "unknown key '" + key + "'");
  }
  return out;
}

template <class S>
std::string write_fields(const S& s, const std::vector<Field<S>>& fields) {
  std::string out;
  for (const auto& f : fields) out += std::string(f.key) + " = " + f.write(s) + "\n";
  return out;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
    if (value.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value for " + key);
    if (kv.has(key)) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    kv.entries_[key] = value;
    kv.lines_[key] = line;
  }
  return kv;
}

int KeyValues::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig cfg = read_fields(kv, train_fields());
  cfg.validate();
  return cfg;
}

TrainConfig parse_train_config(const std::string& text) {
  return train_config_from(KeyValues::parse(text));
}

std::string serialize(const TrainConfig& cfg) { return write_fields(cfg, train_fields()); }

SynthSpec synth_spec_from(const KeyValues& kv) {
  SynthSpec spec = read_fields(kv, synth_fields());
  spec.validate();
  return spec;
}

SynthSpec parse_synth_spec(const std::string& text) { return synth_spec_from(KeyValues::parse(text)); }

std::string serialize(const SynthSpec& spec) { return write_fields(spec, synth_fields()); }

std::string config_hash(const std::string& canonical_text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace adpf
