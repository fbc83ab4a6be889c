#include "adpf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>

#include "adpf/config.hpp"
#include "adpf/errors.hpp"
#include "adpf/training.hpp"

namespace fs = std::filesystem;

namespace adpf {

namespace {

constexpr std::uint64_t kAttentionInitSalt = 0xA11;
constexpr std::uint64_t kFusionInitSalt = 0xF05;

const char* kAttentionCkpt = "attention.ckpt";
const char* kFusionCkpt = "fusion.ckpt";
const char* kConfigFile = "config.txt";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("ADPF_SEED");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("ADPF_SEED is not an integer: '") + env + "'");
  return static_cast<std::uint64_t>(v);
}

TrainConfig load_train_config(const fs::path& path) {
  TrainConfig cfg;
  try {
    cfg = parse_train_config(read_text_file(path.string()));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (auto s = seed_override()) cfg.seed = *s;
  return cfg;
}

std::vector<double> parse_margins(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || v < 0.0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad CS margin '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no CS margins given");
  return out;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

AttentionNet make_attention(const TrainConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kAttentionInitSalt);
  return AttentionNet(cfg.attention_config(), rng);
}

FusionNet make_fusion(const TrainConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kFusionInitSalt);
  return FusionNet(cfg.fusion_config(), rng);
}

void restore(const fs::path& path, std::vector<NamedTensor> params) {
  if (!fs::exists(path)) throw MissingCheckpoint("no checkpoint at " + path.string());
  restore_parameters(load_checkpoint(path), params);
}

// --- gen -------------------------------------------------------------------

int cmd_gen(const fs::path& spec_path, const fs::path& out_dir, std::size_t count,
            std::ostream& out) {
  SynthSpec spec;
  try {
    spec = parse_synth_spec(read_text_file(spec_path.string()));
  } catch (const ConfigError& e) {
    throw ConfigError(spec_path.string() + ": " + e.what());
  }
  if (auto s = seed_override()) spec.seed = *s;
  if (count == 0) throw SpecInvalid("--count must be at least 1");
  write_dataset(out_dir, generate_synth(spec, count));
  out << "wrote " << count << " samples to " << out_dir.string() << "\n";
  return kExitOk;
}

// --- train -----------------------------------------------------------------

int cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out_dir,
              const std::string& stage, std::ostream& out) {
  const std::string started = utc_now();
  const TrainConfig cfg = load_train_config(config_path);
  const bool run1 = stage == "1" || stage == "both";
  const bool run2 = stage == "2" || stage == "both";

  const fs::path attention_path = out_dir / kAttentionCkpt;
  const fs::path fusion_path = out_dir / kFusionCkpt;
  if (!run1 && !fs::exists(attention_path)) {
    throw MissingCheckpoint("stage 2 needs a stage-1 checkpoint at " + attention_path.string());
  }

  const auto all = load_dataset(data_dir);
  const auto train = partition(all, cfg.train_frac, cfg.seed).first;
  fs::create_directories(out_dir);
  const std::string canonical = serialize(cfg);
  const std::string hash = config_hash(canonical);
  write_text_file((out_dir / kConfigFile).string(), canonical);

  auto progress = [&out](const char* tag) {
    return [&out, tag](const EpochRecord& r) {
      out << tag << " epoch " << r.epoch << " lr " << r.lr << " loss_ae " << r.loss_ae
          << " loss_div " << r.loss_diversity << " loss_total " << r.loss_total << "\n";
      out.flush();
    };
  };

  nlohmann::json manifest;
  manifest["command"] = "train";
  manifest["stage"] = stage;
  manifest["config_hash"] = hash;
  manifest["config"] = canonical;
  manifest["seed"] = cfg.seed;
  manifest["data"] = data_dir.string();
  manifest["train_samples"] = train.size();
  manifest["started_at"] = started;

  if (run1) {
    AttentionNet anet = make_attention(cfg);
    const LossTrace trace = train_stage1(anet, train, cfg, progress("stage1"));
    save_checkpoint(attention_path, anet.parameters());
    write_text_file((out_dir / "loss_stage1.csv").string(), loss_trace_csv(trace));
    manifest["checkpoints"]["attention"] = attention_path.string();
    manifest["results"].push_back({{"config_hash", hash},
                                   {"metric", "final_loss_stage1"},
                                   {"value", trace.empty() ? 0.0 : trace.back().loss_total}});
  }
  if (run2) {
    // Always re-read the frozen network from disk so the file is the contract.
    AttentionNet anet = make_attention(cfg);
    restore(attention_path, anet.parameters());
    anet.set_trainable(false);
    FusionNet fnet = make_fusion(cfg);
    const LossTrace trace = train_stage2(anet, fnet, train, cfg, progress("stage2"));
    save_checkpoint(fusion_path, fnet.parameters());
    write_text_file((out_dir / "loss_stage2.csv").string(), loss_trace_csv(trace));
    manifest["checkpoints"]["attention"] = attention_path.string();
    manifest["checkpoints"]["fusion"] = fusion_path.string();
    manifest["results"].push_back({{"config_hash", hash},
                                   {"metric", "final_loss_stage2"},
                                   {"value", trace.empty() ? 0.0 : trace.back().loss_total}});
  }
  manifest["finished_at"] = utc_now();
  write_text_file((out_dir / "run_manifest.json").string(), manifest.dump(2) + "\n");
  out << "checkpoints in " << out_dir.string() << " (config " << hash << ")\n";
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

int cmd_eval(const fs::path& ckpt_dir, const fs::path& data_dir, const std::string& margins_text,
             const std::string& split, fs::path out_dir, std::ostream& out) {
  const std::string started = utc_now();
  const auto margins = parse_margins(margins_text);
  const TrainConfig cfg = load_train_config(ckpt_dir / kConfigFile);
  const std::string hash = config_hash(serialize(cfg));

  AttentionNet anet = make_attention(cfg);
  restore(ckpt_dir / kAttentionCkpt, anet.parameters());
  FusionNet fnet = make_fusion(cfg);
  restore(ckpt_dir / kFusionCkpt, fnet.parameters());

  const auto all = load_dataset(data_dir);
  std::vector<Sample> samples;
  if (split == "all") {
    samples = all;
  } else {
    auto parts = partition(all, cfg.train_frac, cfg.seed);
    samples = split == "train" ? parts.first : parts.second;
  }
  if (samples.empty()) throw EmptyInput("no samples in the '" + split + "' split");

  std::vector<double> preds, gts;
  for (const auto& s : samples) {
    preds.push_back(predict(anet, fnet, s.image, cfg));
    gts.push_back(s.label);
  }
  const double mae = metric_mae(preds, gts);

  if (out_dir.empty()) out_dir = ckpt_dir;
  fs::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["command"] = "eval";
  manifest["config_hash"] = hash;
  manifest["seed"] = cfg.seed;
  manifest["checkpoints"] = {{"attention", (ckpt_dir / kAttentionCkpt).string()},
                             {"fusion", (ckpt_dir / kFusionCkpt).string()}};
  manifest["split"] = split;
  manifest["samples"] = samples.size();
  manifest["started_at"] = started;
  manifest["results"].push_back({{"config_hash", hash}, {"metric", "mae"}, {"value", mae}});

  std::string csv = "v,cs_percent\n";
  out << "samples " << samples.size() << "\nMAE " << fmt_number(mae) << "\n";
  for (double v : margins) {
    const double cs = metric_cs(preds, gts, v);
    csv += fmt_number(v) + "," + fmt_number(cs) + "\n";
    out << "CS(" << fmt_number(v) << ") " << fmt_number(cs) << "%\n";
    manifest["results"].push_back(
        {{"config_hash", hash}, {"metric", "cs_percent"}, {"v", v}, {"value", cs}});
  }
  write_text_file((out_dir / "cs.csv").string(), csv);
  manifest["finished_at"] = utc_now();
  write_text_file((out_dir / "eval_manifest.json").string(), manifest.dump(2) + "\n");
  return kExitOk;
}

// --- export ----------------------------------------------------------------

Tensor min_max(const Tensor& map) {
  const auto v = map.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  }
  return Tensor(map.shape(), std::move(out));
}

int cmd_export(const fs::path& ckpt_dir, const fs::path& image_path, const fs::path& out_dir,
               std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = load_train_config(ckpt_dir / kConfigFile);
  AttentionNet anet = make_attention(cfg);
  restore(ckpt_dir / kAttentionCkpt, anet.parameters());
  const Tensor image = load_image_pgm(image_path);
  if (image.dim(1) != cfg.input_size || image.dim(2) != cfg.input_size) {
    throw ShapeMismatch("image " + shape_str(image.shape()) + " does not match input_size " +
                        std::to_string(cfg.input_size));
  }

  NoGradGuard no_grad;
  const auto atts = anet.forward(image).atts;
  fs::create_directories(out_dir);
  const std::size_t H = image.dim(1), W = image.dim(2);
  std::size_t degenerate = 0;
  for (std::size_t r = 0; r < atts.size(); ++r) {
    const std::string rank = std::to_string(r + 1);
    const Tensor up = bilinear_resize(atts.ranked(r), H, W);
    save_image_pgm(out_dir / ("map_rank" + rank + ".pgm"), min_max(up));
    try {
      const Box box = largest_component_box(binarize_map(up, cfg.crop), cfg.crop);
      const Tensor patch = bilinear_resize(crop(image, box), cfg.crop.patch_size, cfg.crop.patch_size);
      save_image_pgm(out_dir / ("patch_rank" + rank + ".pgm"), patch);
      out << "rank " << rank << " head " << atts.order[r] << " scale " << atts.scales[atts.order[r]]
          << " box " << box.top << "," << box.left << " " << box.height << "x" << box.width << "\n";
    } catch (const DegenerateMap& e) {
      ++degenerate;
      err << "rank " << rank << " head " << atts.order[r] << ": " << e.what() << "\n";
    }
  }
  return degenerate ? kExitNumerical : kExitOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalFailure*>(&e) || dynamic_cast<const DegenerateMap*>(&e)) {
    return kExitNumerical;
  }
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
    return kExitData;
  }
  return kExitData;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-driven patch fusion for age estimation"};
  app.require_subcommand(1);

  std::string spec, gen_out;
  std::size_t count = 0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--spec", spec, "Synthetic spec file")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", count, "Number of samples")->required();

  std::string config, data, train_out, stage = "both";
  auto* train = app.add_subcommand("train", "Train the AttentionNet and/or FusionNet");
  train->add_option("--config", config, "Training config file")->required();
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_option("--stage", stage, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));

  std::string ckpts, eval_data, margins, split = "test", eval_out;
  auto* eval = app.add_subcommand("eval", "Score checkpoints on a dataset");
  eval->add_option("--checkpoints", ckpts, "Checkpoint directory")->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--cs-margins", margins, "Comma-separated CS margins in years")->required();
  eval->add_option("--split", split, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
  eval->add_option("--out", eval_out, "Report directory (default: the checkpoint directory)");

  std::string exp_ckpts, image, exp_out;
  auto* exp = app.add_subcommand("export", "Write ranked attention maps and patches");
  exp->add_option("--checkpoints", exp_ckpts, "Checkpoint directory")->required();
  exp->add_option("--image", image, "Input PGM image")->required();
  exp->add_option("--out", exp_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(spec, gen_out, count, out);
    if (*train) return cmd_train(config, data, train_out, stage, out);
    if (*eval) return cmd_eval(ckpts, eval_data, margins, split, eval_out, out);
    if (*exp) return cmd_export(exp_ckpts, image, exp_out, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace adpf
