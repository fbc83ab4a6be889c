#pragma once

#include <vector>

#include "adpf/tensor.hpp"

namespace adpf {

/// Ordered integer age classes with the width of the Gaussian soft label.
struct AgeLabelSpace {
  std::vector<double> labels;  // strictly increasing, at least two
  double sigma = 2.0;

  /// One class per integer age in [min_age, max_age].
  static AgeLabelSpace integer_range(int min_age, int max_age, double sigma);
  std::size_t classes() const { return labels.size(); }
  double min_label() const { return labels.front(); }
  double max_label() const { return labels.back(); }
  /// Throws SpecInvalid when the invariants do not hold.
  void validate() const;
};

struct LossWeights {
  double lambda = 0.01;
};

/// Sum over ordered pairs n1 != n2 of the entrywise product sum of maps
/// n1 and n2. Each unordered pair therefore contributes twice.
Tensor diversity_loss(const std::vector<Tensor>& maps);

/// max(0, o_p) / sum_p max(0, o_p). Throws AllNonPositive when nothing
/// survives the clamp.
Tensor normalize_output(const Tensor& o);

/// sum_p probs[p] * labels[p]. Throws NotADistribution unless probs is
/// nonnegative and sums to 1 within 1e-6.
Tensor expected_age(const Tensor& probs, const AgeLabelSpace& space);

/// Mean absolute difference; subgradient 0 at equality.
Tensor mae_loss(const Tensor& preds, const Tensor& gts);

/// Normalized exp(-(g_p - gt)^2 / (2 sigma^2)). Throws OutOfRange when gt
/// is outside the label range.
Tensor label_distribution(double gt, const AgeLabelSpace& space);

/// sum_p P log(P / max(P', 1e-12)) with 0 log 0 = 0. Gradient flows into
/// P_learned only.
Tensor kl_loss(const Tensor& target, const Tensor& learned);

struct AgeLossTerms {
  Tensor mae;
  Tensor kl;
  Tensor total;
};

/// mae_weight * MAE + kl_weight * mean_b KL(label_distribution(gt_b) || learned_b).
AgeLossTerms age_estimation_terms(const std::vector<Tensor>& preds, const std::vector<double>& gts,
                                  const std::vector<Tensor>& learned, const AgeLabelSpace& space,
                                  double mae_weight = 1.0, double kl_weight = 1.0);
Tensor age_estimation_loss(const std::vector<Tensor>& preds, const std::vector<double>& gts,
                           const std::vector<Tensor>& learned, const AgeLabelSpace& space);

/// ae + lambda * div.
Tensor attentionnet_loss(const Tensor& ae, const Tensor& div, const LossWeights& weights);

}  // namespace adpf
