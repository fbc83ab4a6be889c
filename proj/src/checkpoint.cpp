#include "adpf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "adpf/errors.hpp"

namespace adpf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void put_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  double f64() {
    double v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<NamedTensor>& params) {
  std::string out(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u64(out, params.size());
  for (const auto& p : params) {
    put_u64(out, p.name.size());
    out += p.name;
    put_u64(out, p.tensor.rank());
    for (auto e : p.tensor.shape()) put_u64(out, e);
    for (double v : p.tensor.values()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(4), kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  const auto version = static_cast<std::uint8_t>(*in.take(1));
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = in.u64();
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = in.u64();
    std::string name(in.take(len), len);
    const std::uint64_t rank = in.u64();
    if (rank > 16) throw FormatError("implausible rank " + std::to_string(rank) + " for " + name);
    Shape shape(rank);
    for (auto& e : shape) e = in.u64();
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = in.f64();
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint payload");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

void restore_parameters(const std::vector<NamedTensor>& stored, std::vector<NamedTensor>& params) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& s : stored) by_name.emplace(s.name, &s.tensor);
  if (by_name.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) +
                      " parameters, model expects " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter " + p.name);
    if (it->second->shape() != p.tensor.shape()) {
      throw FormatError("parameter " + p.name + " stored as " + shape_str(it->second->shape()) +
                        ", model expects " + shape_str(p.tensor.shape()));
    }
    auto src = it->second->values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
}

}  // namespace adpf
