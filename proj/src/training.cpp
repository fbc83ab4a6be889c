#include "adpf/training.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "adpf/errors.hpp"
#include "adpf/ops.hpp"

namespace adpf {

namespace {

constexpr std::uint64_t kStage1Salt = 0x5717;
constexpr std::uint64_t kStage2Salt = 0x5727;

struct EpochAccumulator {
  double ae = 0.0, div = 0.0, total = 0.0;
  std::size_t count = 0;

  void add(double ae_v, double div_v, double total_v, std::size_t n) {
    ae += ae_v * static_cast<double>(n);
    div += div_v * static_cast<double>(n);
    total += total_v * static_cast<double>(n);
    count += n;
  }
  EpochRecord finish(std::size_t epoch, double lr) const {
    const double n = static_cast<double>(count);
    return EpochRecord{epoch, ae / n, div / n, total / n, lr};
  }
};

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
  }
  return out;
}

void check_finite(double value, std::size_t stage, std::size_t epoch,
                  const std::vector<Sample>& data, const std::vector<std::size_t>& batch,
                  const char* what = "loss") {
  if (std::isfinite(value)) return;
  std::string ids;
  for (auto i : batch) ids += (ids.empty() ? "" : ",") + data[i].id;
  throw NumericalFailure(std::string("non-finite ") + what + " in stage " + std::to_string(stage) + " epoch " +
                         std::to_string(epoch) + ", batch [" + ids + "]");
}

void check_labels(const std::vector<Sample>& data, const AgeLabelSpace& space) {
  if (data.empty()) throw EmptyInput("training set is empty");
  for (const auto& s : data) {
    if (s.label < space.min_label() || s.label > space.max_label()) {
      throw OutOfRange("sample " + s.id + " has label " + std::to_string(s.label) +
                       " outside the configured age range");
    }
  }
}

Sample training_view(const Sample& s, const TrainConfig& cfg, Rng& rng) {
  return cfg.augment ? augment(s, cfg.augment_pad, rng) : s;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(lr_initial >= 0.0, "lr_initial must be nonnegative");
  require(lr_decay_factor > 0.0 && lr_decay_factor < 1.0, "lr_decay_factor must lie in (0, 1)");
  require(lr_decay_every > 0, "lr_decay_every must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(lambda >= 0.0, "lambda must be nonnegative");
  require(sigma > 0.0, "sigma must be positive");
  require(mae_weight >= 0.0 && kl_weight >= 0.0, "loss weights must be nonnegative");
  require(age_max > age_min, "age_max must exceed age_min");
  require(heads > 0, "heads must be positive");
  require(in_channels > 0 && input_size > 0, "input shape must be positive");
  require(!backbone.empty(), "backbone needs at least one block");
  require(head_ratio > 0, "head_ratio must be positive");
  require(fusion_main_channels > 0 && fusion_stem_channels > 0, "fusion widths must be positive");
  require(train_frac > 0.0 && train_frac < 1.0, "train_frac must lie in (0, 1)");
  try {
    crop.validate();
  } catch (const SpecInvalid& e) {
    throw ConfigError(e.what());
  }
}

AgeLabelSpace TrainConfig::label_space() const {
  return AgeLabelSpace::integer_range(age_min, age_max, sigma);
}

AttentionNetConfig TrainConfig::attention_config() const {
  AttentionNetConfig c;
  c.in_channels = in_channels;
  c.input_size = input_size;
  c.backbone = backbone;
  c.heads = heads;
  c.ratio = head_ratio;
  c.positive_values = positive_values;
  c.classes = static_cast<std::size_t>(age_max - age_min + 1);
  return c;
}

FusionNetConfig TrainConfig::fusion_config() const {
  FusionNetConfig c;
  c.in_channels = in_channels;
  c.input_size = input_size;
  c.patches = heads;
  c.main_channels = fusion_main_channels;
  c.stem_channels = fusion_stem_channels;
  c.patch_size = crop.patch_size;
  c.classes = static_cast<std::size_t>(age_max - age_min + 1);
  return c;
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  const auto drops = static_cast<double>(epoch / cfg.lr_decay_every);
  return cfg.lr_initial * std::pow(cfg.lr_decay_factor, drops);
}

Sgd::Sgd(std::vector<NamedTensor> params, double momentum)
    : params_(std::move(params)), momentum_(momentum) {
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].tensor;
    auto g = t.grad();
    if (g.empty()) continue;
    auto v = t.mutable_values();
    auto& vel = velocity_[i];
    for (std::size_t j = 0; j < v.size(); ++j) {
      vel[j] = momentum_ * vel[j] + g[j];
      v[j] -= lr * vel[j];
    }
  }
  zero_grad();
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::string loss_trace_csv(const LossTrace& trace) {
  std::string out = "epoch,loss_ae,loss_diversity,loss_total,lr\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss_ae,
                  r.loss_diversity, r.loss_total, r.lr);
    out += buf;
  }
  return out;
}

Tensor output_distribution(const Tensor& logits) {
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw NumericalFailure("non-finite logit");
  }
  return normalize_output(softmax(reshape(logits, {logits.numel()}), 0));
}

LossTrace train_stage1(AttentionNet& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                       const EpochHook& hook) {
  cfg.validate();
  const AgeLabelSpace space = cfg.label_space();
  check_labels(data, space);
  net.set_trainable(true);
  Sgd opt(net.parameters(), cfg.momentum);
  opt.zero_grad();
  Rng rng = Rng(cfg.seed).fork(kStage1Salt);
  const LossWeights weights{cfg.lambda};

  LossTrace trace;
  for (std::size_t epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    EpochAccumulator acc;
    for (const auto& batch : epoch_batches(data.size(), cfg.batch_size, rng)) {
      std::vector<Tensor> preds, learned, divs;
      std::vector<double> gts;
      for (auto i : batch) {
        const Sample view = training_view(data[i], cfg, rng);
        auto out = net.forward(view.image);
        check_finite(sum(out.logits).item(), 1, epoch, data, batch, "logits");
        Tensor probs = output_distribution(out.logits);
        preds.push_back(expected_age(probs, space));
        learned.push_back(std::move(probs));
        gts.push_back(view.label);
        if (out.atts.size() >= 2) divs.push_back(diversity_loss(out.atts.hybrid));
      }
      const auto terms =
          age_estimation_terms(preds, gts, learned, space, cfg.mae_weight, cfg.kl_weight);
      const Tensor div = divs.empty() ? Tensor::scalar(0.0) : mean(concat0(divs));
      const Tensor total = attentionnet_loss(terms.total, div, weights);
      check_finite(total.item(), 1, epoch, data, batch);
      backward(total);
      opt.step(lr);
      acc.add(terms.total.item(), div.item(), total.item(), batch.size());
    }
    trace.push_back(acc.finish(epoch, lr));
    if (hook) hook(trace.back());
  }
  return trace;
}

LossTrace train_stage2(const AttentionNet& anet, FusionNet& fnet, const std::vector<Sample>& data,
                       const TrainConfig& cfg, const EpochHook& hook) {
  cfg.validate();
  const AgeLabelSpace space = cfg.label_space();
  check_labels(data, space);
  if (fnet.config().patches != anet.config().heads) {
    throw PatchCountMismatch("FusionNet expects " + std::to_string(fnet.config().patches) +
                             " patches, AttentionNet has " + std::to_string(anet.config().heads) +
                             " heads");
  }
  fnet.set_trainable(true);
  Sgd opt(fnet.parameters(), cfg.momentum);
  opt.zero_grad();
  Rng rng = Rng(cfg.seed).fork(kStage2Salt);

  LossTrace trace;
  for (std::size_t epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    EpochAccumulator acc;
    for (const auto& batch : epoch_batches(data.size(), cfg.batch_size, rng)) {
      std::vector<Tensor> preds, learned;
      std::vector<double> gts;
      for (auto i : batch) {
        const Sample view = training_view(data[i], cfg, rng);
        PatchSet patches;
        {
          NoGradGuard frozen;
          const auto atts = anet.forward(view.image).atts;
          try {
            patches = extract_patches(view.image, atts, cfg.crop);
          } catch (const DegenerateMap& e) {
            throw DegenerateMap("stage 2 epoch " + std::to_string(epoch) + " sample " + view.id +
                                ": " + e.what());
          }
        }
        const Tensor logits = fnet.forward(view.image, patches).logits;
        check_finite(sum(logits).item(), 2, epoch, data, batch, "logits");
        Tensor probs = output_distribution(logits);
        preds.push_back(expected_age(probs, space));
        learned.push_back(std::move(probs));
        gts.push_back(view.label);
      }
      const auto terms =
          age_estimation_terms(preds, gts, learned, space, cfg.mae_weight, cfg.kl_weight);
      check_finite(terms.total.item(), 2, epoch, data, batch);
      backward(terms.total);
      opt.step(lr);
      acc.add(terms.total.item(), 0.0, terms.total.item(), batch.size());
    }
    trace.push_back(acc.finish(epoch, lr));
    if (hook) hook(trace.back());
  }
  return trace;
}

double predict_attention(const AttentionNet& anet, const Tensor& image, const AgeLabelSpace& space) {
  NoGradGuard no_grad;
  return expected_age(output_distribution(anet.forward(image).logits), space).item();
}

double predict(const AttentionNet& anet, const FusionNet& fnet, const Tensor& image,
               const TrainConfig& cfg) {
  NoGradGuard no_grad;
  const auto atts = anet.forward(image).atts;
  const PatchSet patches = extract_patches(image, atts, cfg.crop);
  const Tensor probs = output_distribution(fnet.forward(image, patches).logits);
  return expected_age(probs, cfg.label_space()).item();
}

double metric_mae(const std::vector<double>& preds, const std::vector<double>& gts) {
  if (preds.empty()) throw EmptyInput("no predictions to score");
  if (preds.size() != gts.size()) throw ShapeMismatch("prediction and label counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::fabs(preds[i] - gts[i]);
  return s / static_cast<double>(preds.size());
}

double metric_cs(const std::vector<double>& preds, const std::vector<double>& gts, double v) {
  if (preds.empty()) throw EmptyInput("no predictions to score");
  if (preds.size() != gts.size()) throw ShapeMismatch("prediction and label counts differ");
  if (v < 0.0) throw SpecInvalid("CS margin must be nonnegative");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += std::fabs(preds[i] - gts[i]) <= v ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

double mean_normalized_overlap(const AttentionNet& net, const std::vector<Sample>& data) {
  if (data.empty()) throw EmptyInput("no samples to measure overlap on");
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : data) {
    const auto atts = net.forward(s.image).atts;
    if (atts.size() < 2) return 0.0;
    double self = 0.0;
    for (const auto& m : atts.hybrid) {
      for (double v : m.values()) self += v * v;
    }
    const double cross = diversity_loss(atts.hybrid).item();
    total += self > 0.0 ? cross / self : 0.0;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace adpf
