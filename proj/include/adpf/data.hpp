#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "adpf/patches.hpp"
#include "adpf/random.hpp"
#include "adpf/tensor.hpp"

namespace adpf {

struct Sample {
  Tensor image;  // [C x H x W], values in [0, 1]
  int label = 0;
  std::string id;
};

enum class Placement { fixed, jittered };

/// Synthetic localized-evidence task: a square whose brightness encodes the
/// age, on a noisy background.
struct SynthSpec {
  std::size_t image_size = 32;
  std::size_t channels = 1;
  int age_min = 16;
  int age_max = 77;
  std::size_t evidence_box = 8;
  double noise_level = 0.1;
  Placement placement = Placement::jittered;
  // Max displacement of the square from its centred position, per axis.
  std::size_t jitter_margin = 12;
  std::uint64_t seed = 1;

  /// Throws SpecInvalid when the invariants do not hold.
  void validate() const;
  /// Square location for a given displacement from centre.
  Box evidence_at(std::ptrdiff_t dy, std::ptrdiff_t dx) const;
  /// Evidence intensity for a label: (label - age_min) / (age_max - age_min).
  double intensity(int label) const;
};

struct SynthSample {
  Sample sample;
  Box evidence;
};

std::vector<SynthSample> generate_synth_with_boxes(const SynthSpec& spec, std::size_t n);
std::vector<Sample> generate_synth(const SynthSpec& spec, std::size_t n);

/// Disjoint deterministic split; round(train_frac * n) samples go to train.
std::pair<std::vector<Sample>, std::vector<Sample>> partition(const std::vector<Sample>& samples,
                                                              double train_frac, std::uint64_t seed);

Tensor flip_horizontal(const Tensor& image);
/// Zero-pad by `pad`, crop the original size at offset (oy, ox) of the
/// padded image, then optionally mirror.
Tensor pad_crop_flip(const Tensor& image, std::size_t pad, std::size_t oy, std::size_t ox, bool flip);
/// Random offsets in [0, 2*pad] and a fair-coin flip, drawn in that order.
Sample augment(const Sample& s, std::size_t pad, Rng& rng);

/// Binary PGM (P5, maxval 255) as [1 x H x W] scaled to [0, 1].
Tensor load_image_pgm(const std::filesystem::path& path);
Tensor decode_pgm(const std::string& bytes);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void save_image_pgm(const std::filesystem::path& path, const Tensor& image);
std::string encode_pgm(const Tensor& image);

/// Writes <dir>/manifest.csv (`id,path,label`) and one PGM per sample.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

}  // namespace adpf
