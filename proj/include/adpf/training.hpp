#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adpf/data.hpp"
#include "adpf/losses.hpp"
#include "adpf/models.hpp"
#include "adpf/patches.hpp"

namespace adpf {

struct TrainConfig {
  // Optimisation schedule.
  std::size_t batch_size = 32;
  std::size_t epochs_stage1 = 200;
  std::size_t epochs_stage2 = 200;
  double lr_initial = 0.1;
  double lr_decay_factor = 0.1;
  std::size_t lr_decay_every = 50;
  double momentum = 0.0;
  // Objective.
  double lambda = 0.01;
  double sigma = 2.0;
  double mae_weight = 1.0;
  double kl_weight = 1.0;
  int age_min = 16;
  int age_max = 77;
  // Architecture.
  std::size_t heads = 5;
  std::size_t in_channels = 1;
  std::size_t input_size = 32;
  std::vector<std::size_t> backbone = {16, 40};
  std::size_t head_ratio = 4;
  bool positive_values = true;
  std::size_t fusion_main_channels = 8;
  std::size_t fusion_stem_channels = 4;
  // Data handling.
  double train_frac = 0.8;
  bool augment = true;
  std::size_t augment_pad = 8;
  std::uint64_t seed = 1;
  CropConfig crop;

  /// Throws ConfigError when a value is out of range.
  void validate() const;
  AgeLabelSpace label_space() const;
  AttentionNetConfig attention_config() const;
  FusionNetConfig fusion_config() const;
};

/// lr_initial * lr_decay_factor ^ floor(epoch / lr_decay_every), epoch 0-based.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

/// Plain SGD with optional momentum; the step clears gradients afterwards.
class Sgd {
 public:
  Sgd(std::vector<NamedTensor> params, double momentum);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_ae = 0.0;
  double loss_diversity = 0.0;
  double loss_total = 0.0;
  double lr = 0.0;
};

using LossTrace = std::vector<EpochRecord>;

/// `epoch,loss_ae,loss_diversity,loss_total,lr` with a header row;
/// floating-point fields use 17 significant digits.
std::string loss_trace_csv(const LossTrace& trace);

/// Probability vector from logits: softmax, then clamp-and-renormalize.
/// Throws NumericalFailure on a non-finite logit.
Tensor output_distribution(const Tensor& logits);

/// Optional per-epoch callback, e.g. for progress output.
using EpochHook = std::function<void(const EpochRecord&)>;

/// Minimises L_AE + lambda * L_diversity over `data` for epochs_stage1 epochs.
/// Throws NumericalFailure on a non-finite loss.
LossTrace train_stage1(AttentionNet& net, const std::vector<Sample>& data, const TrainConfig& cfg,
                       const EpochHook& hook = {});

/// Trains the FusionNet on L_AE with patches recomputed per sample from the
/// frozen AttentionNet, whose parameters are left untouched.
LossTrace train_stage2(const AttentionNet& anet, FusionNet& fnet, const std::vector<Sample>& data,
                       const TrainConfig& cfg, const EpochHook& hook = {});

/// Age estimate of the AttentionNet alone.
double predict_attention(const AttentionNet& anet, const Tensor& image, const AgeLabelSpace& space);

/// attention forward -> patches -> fusion forward -> distribution -> expectation.
double predict(const AttentionNet& anet, const FusionNet& fnet, const Tensor& image,
               const TrainConfig& cfg);

/// Mean absolute error. Throws EmptyInput / ShapeMismatch.
double metric_mae(const std::vector<double>& preds, const std::vector<double>& gts);
/// Percentage of |pred - gt| <= v.
double metric_cs(const std::vector<double>& preds, const std::vector<double>& gts, double v);

/// Stage-1 normalised overlap: sum_{i != j} <HA_i, HA_j> / sum_i <HA_i, HA_i>,
/// averaged over samples.
double mean_normalized_overlap(const AttentionNet& net, const std::vector<Sample>& data);

}  // namespace adpf
