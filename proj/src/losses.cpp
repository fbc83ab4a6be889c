#include "adpf/losses.hpp"

#include <cmath>
#include <string>

#include "adpf/errors.hpp"
#include "adpf/ops.hpp"

namespace adpf {

namespace {

constexpr double kDistributionTol = 1e-6;
constexpr double kLearnedFloor = 1e-12;

void require_distribution(const Tensor& p, const char* what) {
  double total = 0.0;
  for (double v : p.values()) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw NotADistribution(std::string(what) + " has entry " + std::to_string(v));
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > kDistributionTol) {
    throw NotADistribution(std::string(what) + " sums to " + std::to_string(total));
  }
}

}  // namespace

AgeLabelSpace AgeLabelSpace::integer_range(int min_age, int max_age, double sigma) {
  AgeLabelSpace space;
  for (int a = min_age; a <= max_age; ++a) space.labels.push_back(a);
  space.sigma = sigma;
  space.validate();
  return space;
}

void AgeLabelSpace::validate() const {
  if (labels.size() < 2) throw SpecInvalid("age label space needs at least two classes");
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (!(labels[i] > labels[i - 1])) throw SpecInvalid("age labels must be strictly increasing");
  }
  if (!(sigma > 0.0)) throw SpecInvalid("soft-label sigma must be positive");
}

Tensor diversity_loss(const std::vector<Tensor>& maps) {
  if (maps.size() < 2) {
    throw TooFewMaps("diversity needs at least two maps, got " + std::to_string(maps.size()));
  }
  for (const auto& m : maps) {
    if (m.shape() != maps.front().shape()) {
      throw ShapeMismatch("diversity maps " + shape_str(maps.front().shape()) + " vs " +
                          shape_str(m.shape()));
    }
  }
  // sum_{i != j} <A_i, A_j> = |sum_i A_i|^2 - sum_i |A_i|^2
  Tensor total = maps.front();
  Tensor self_products = sum(maps.front() * maps.front());
  for (std::size_t i = 1; i < maps.size(); ++i) {
    total = total + maps[i];
    self_products = self_products + sum(maps[i] * maps[i]);
  }
  return sum(total * total) - self_products;
}

Tensor normalize_output(const Tensor& o) {
  bool any_positive = false;
  for (double v : o.values()) any_positive = any_positive || v > 0.0;
  if (!any_positive) throw AllNonPositive("every output entry is <= 0");
  const Tensor clamped = relu(o);
  return clamped / sum(clamped);
}

Tensor expected_age(const Tensor& probs, const AgeLabelSpace& space) {
  if (probs.numel() != space.classes()) {
    throw ShapeMismatch("expected_age: " + std::to_string(probs.numel()) + " probabilities for " +
                        std::to_string(space.classes()) + " classes");
  }
  require_distribution(probs, "expected_age input");
  return weighted_sum(probs, space.labels);
}

Tensor mae_loss(const Tensor& preds, const Tensor& gts) {
  if (preds.numel() != gts.numel() || preds.numel() == 0) {
    throw ShapeMismatch("mae_loss of " + shape_str(preds.shape()) + " and " + shape_str(gts.shape()));
  }
  return mean(abs(reshape(preds, {preds.numel()}) - reshape(gts, {gts.numel()})));
}

Tensor label_distribution(double gt, const AgeLabelSpace& space) {
  if (gt < space.min_label() || gt > space.max_label()) {
    throw OutOfRange("age " + std::to_string(gt) + " outside [" + std::to_string(space.min_label()) +
                     ", " + std::to_string(space.max_label()) + "]");
  }
  std::vector<double> p(space.classes());
  double z = 0.0;
  const double denom = 2.0 * space.sigma * space.sigma;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = space.labels[i] - gt;
    p[i] = std::exp(-d * d / denom);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return Tensor::vector(std::move(p));
}

Tensor kl_loss(const Tensor& target, const Tensor& learned) {
  if (target.numel() != learned.numel()) {
    throw ShapeMismatch("kl_loss of " + shape_str(target.shape()) + " and " +
                        shape_str(learned.shape()));
  }
  require_distribution(target, "KL target");
  require_distribution(learned, "KL learned distribution");
  double entropy_term = 0.0;
  for (double p : target.values()) {
    if (p > 0.0) entropy_term += p * std::log(p);
  }
  const Tensor log_learned = log(floor_at(reshape(learned, {learned.numel()}), kLearnedFloor));
  return Tensor::scalar(entropy_term) - weighted_sum(log_learned, target.values());
}

AgeLossTerms age_estimation_terms(const std::vector<Tensor>& preds, const std::vector<double>& gts,
                                  const std::vector<Tensor>& learned, const AgeLabelSpace& space,
                                  double mae_weight, double kl_weight) {
  if (preds.empty() || preds.size() != gts.size() || preds.size() != learned.size()) {
    throw ShapeMismatch("age loss batch: " + std::to_string(preds.size()) + " predictions, " +
                        std::to_string(gts.size()) + " labels, " + std::to_string(learned.size()) +
                        " distributions");
  }
  AgeLossTerms terms;
  terms.mae = mae_loss(concat0(preds), Tensor::vector(gts));
  std::vector<Tensor> kls;
  kls.reserve(gts.size());
  for (std::size_t b = 0; b < gts.size(); ++b) {
    kls.push_back(kl_loss(label_distribution(gts[b], space), learned[b]));
  }
  terms.kl = mean(concat0(kls));
  terms.total = scale(terms.mae, mae_weight) + scale(terms.kl, kl_weight);
  return terms;
}

Tensor age_estimation_loss(const std::vector<Tensor>& preds, const std::vector<double>& gts,
                           const std::vector<Tensor>& learned, const AgeLabelSpace& space) {
  return age_estimation_terms(preds, gts, learned, space).total;
}

Tensor attentionnet_loss(const Tensor& ae, const Tensor& div, const LossWeights& weights) {
  if (weights.lambda < 0.0) throw SpecInvalid("lambda must be nonnegative");
  return ae + scale(div, weights.lambda);
}

}  // namespace adpf
