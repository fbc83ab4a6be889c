#include "adpf/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adpf/errors.hpp"

namespace adpf {

void SynthSpec::validate() const {
  if (image_size == 0 || channels == 0) throw SpecInvalid("image_size and channels must be positive");
  if (age_max <= age_min) throw SpecInvalid("age_max must exceed age_min");
  if (evidence_box == 0 || evidence_box > image_size) {
    throw SpecInvalid("evidence box " + std::to_string(evidence_box) + " does not fit a " +
                      std::to_string(image_size) + " pixel image");
  }
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw SpecInvalid("noise_level must lie in [0, 1]");
}

Box SynthSpec::evidence_at(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
  const auto free = static_cast<std::ptrdiff_t>(image_size - evidence_box);
  const std::ptrdiff_t centre = free / 2;
  auto place = [&](std::ptrdiff_t d) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(centre + d, 0, free));
  };
  return Box{place(dy), place(dx), evidence_box, evidence_box};
}

double SynthSpec::intensity(int label) const {
  return static_cast<double>(label - age_min) / static_cast<double>(age_max - age_min);
}

std::vector<SynthSample> generate_synth_with_boxes(const SynthSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw SpecInvalid("sample count must be >= 1");
  Rng rng(spec.seed);
  const std::size_t S = spec.image_size, C = spec.channels;
  const auto margin = static_cast<std::int64_t>(spec.jitter_margin);
  std::vector<SynthSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SynthSample s;
    s.sample.label = static_cast<int>(rng.uniform_int(spec.age_min, spec.age_max));
    std::ptrdiff_t dy = 0, dx = 0;
    if (spec.placement == Placement::jittered) {
      dy = rng.uniform_int(-margin, margin);
      dx = rng.uniform_int(-margin, margin);
    }
    s.evidence = spec.evidence_at(dy, dx);
    const double t = spec.intensity(s.sample.label);
    std::vector<double> pixels(C * S * S);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < S; ++y) {
        for (std::size_t x = 0; x < S; ++x) {
          const double u = rng.uniform();
          double v = spec.noise_level * u;
          if (s.evidence.contains(y, x)) {
            v = std::clamp(t + spec.noise_level * (u - 0.5), 0.0, 1.0);
          }
          pixels[(c * S + y) * S + x] = v;
        }
      }
    }
    s.sample.image = Tensor({C, S, S}, std::move(pixels));
    char id[32];
    std::snprintf(id, sizeof id, "synth_%06zu", i);
    s.sample.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> generate_synth(const SynthSpec& spec, std::size_t n) {
  std::vector<Sample> out;
  for (auto& s : generate_synth_with_boxes(spec, n)) out.push_back(std::move(s.sample));
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> partition(const std::vector<Sample>& samples,
                                                              double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw SpecInvalid("train_frac must lie in (0, 1)");
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(samples.size())));
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (auto i : train_idx) out.first.push_back(samples[i]);
  for (auto i : test_idx) out.second.push_back(samples[i]);
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  if (image.rank() != 3) throw ShapeMismatch("flip expects C x H x W");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  auto v = image.values();
  std::vector<double> out(v.size());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) out[(c * H + y) * W + x] = v[(c * H + y) * W + (W - 1 - x)];
  return Tensor(image.shape(), std::move(out));
}

Tensor pad_crop_flip(const Tensor& image, std::size_t pad, std::size_t oy, std::size_t ox, bool flip) {
  if (image.rank() != 3) throw ShapeMismatch("augment expects C x H x W");
  if (oy > 2 * pad || ox > 2 * pad) throw ShapeMismatch("crop offset outside the padded image");
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  auto v = image.values();
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      // Row y of the crop is row (y + oy - pad) of the source.
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + oy) - static_cast<std::ptrdiff_t>(pad);
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
      for (std::size_t x = 0; x < W; ++x) {
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + ox) - static_cast<std::ptrdiff_t>(pad);
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(W)) continue;
        out[(c * H + y) * W + x] = v[(c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx)];
      }
    }
  }
  Tensor cropped(image.shape(), std::move(out));
  return flip ? flip_horizontal(cropped) : cropped;
}

Sample augment(const Sample& s, std::size_t pad, Rng& rng) {
  const auto span = static_cast<std::int64_t>(2 * pad);
  const auto oy = static_cast<std::size_t>(rng.uniform_int(0, span));
  const auto ox = static_cast<std::size_t>(rng.uniform_int(0, span));
  const bool flip = rng.bernoulli(0.5);
  return Sample{pad_crop_flip(s.image, pad, oy, ox, flip), s.label, s.id};
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

Tensor decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw FormatError("PGM header truncated or malformed");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw FormatError("PGM header value too large");
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5)");
  pos = 2;
  const std::size_t width = read_uint();
  const std::size_t height = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval != 255) throw FormatError("only maxval 255 is supported, got " + std::to_string(maxval));
  if (width == 0 || height == 0) throw FormatError("PGM with empty extent");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("PGM header not terminated");
  }
  ++pos;
  if (bytes.size() - pos < width * height) throw FormatError("PGM payload truncated");
  std::vector<double> values(width * height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / 255.0;
  }
  return Tensor({1, height, width}, std::move(values));
}

Tensor load_image_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) {
    throw ShapeMismatch("PGM holds one channel, got " + shape_str(image.shape()));
  }
  std::string out = "P5\n" + std::to_string(image.dim(2)) + " " + std::to_string(image.dim(1)) + "\n255\n";
  for (double v : image.values()) {
    const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  return out;
}

void save_image_pgm(const std::filesystem::path& path, const Tensor& image) {
  write_file(path, encode_pgm(image));
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
  std::string manifest = "id,path,label\n";
  for (const auto& s : samples) {
    const std::string rel = "images/" + s.id + ".pgm";
    save_image_pgm(dir / rel, s.image);
    manifest += s.id + "," + rel + "," + std::to_string(s.label) + "\n";
  }
  write_file(dir / "manifest.csv", manifest);
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "manifest.csv"));
  std::string line;
  std::size_t lineno = 0;
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "id,path,label") continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw FormatError("manifest.csv line " + std::to_string(lineno) + ": expected id,path,label");
    }
    Sample s;
    s.id = line.substr(0, c1);
    const std::string rel = line.substr(c1 + 1, c2 - c1 - 1);
    try {
      s.label = std::stoi(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw FormatError("manifest.csv line " + std::to_string(lineno) + ": bad label");
    }
    s.image = load_image_pgm(dir / rel);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace adpf
