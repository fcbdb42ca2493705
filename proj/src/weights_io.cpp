#include "storewatch/weights_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "storewatch/error.hpp"

namespace storewatch::weights {

static_assert(std::endian::native == std::endian::little, "NNWA I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace {

constexpr char kMagic[4] = {'N', 'N', 'W', 'A'};
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == in_.size(); }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw TruncationError(std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, " +
                                std::to_string(in_.size() - pos_) + " remain",
                            pos_);
    }
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8(const char* what) { return *take(1, what); }
  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }
  std::string str(const char* what) {
    const auto n = u32(what);
    const auto* p = take(n, what);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_name(const std::string& name) {
  if (name.empty()) throw FormatError("tensor name must not be empty");
  if (name.size() > kMaxNameBytes) {
    throw FormatError("tensor name '" + name.substr(0, 32) + "...' is " + std::to_string(name.size()) +
                      " bytes; the limit is " + std::to_string(kMaxNameBytes));
  }
}

}  // namespace

const Tensor& TensorArchive::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw MissingWeightError(name);
  return it->second;
}

std::vector<std::uint8_t> write_archive(const TensorArchive& archive) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(archive.metadata.size()));
  for (const auto& [key, value] : archive.metadata) {
    w.str(key);
    w.str(value);
  }
  w.u32(static_cast<std::uint32_t>(archive.entries.size()));
  for (const auto& [name, tensor] : archive.entries) {
    check_name(name);
    if (tensor.empty()) throw FormatError("tensor '" + name + "' is empty");
    w.str(name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (auto d : tensor.dims()) w.u32(static_cast<std::uint32_t>(d));
    w.bytes(tensor.data().data(), tensor.size() * sizeof(float));
  }
  return w.take();
}

TensorArchive read_archive(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not an NNWA archive");
  const auto version = r.u32("version");
  if (version != kFormatVersion) {
    throw VersionError("unsupported NNWA version " + std::to_string(version) + " (expected " +
                       std::to_string(kFormatVersion) + ")");
  }

  TensorArchive archive;
  archive.metadata.clear();
  const auto pairs = r.u32("metadata count");
  for (std::uint32_t i = 0; i < pairs; ++i) {
    auto key = r.str("metadata key");
    auto value = r.str("metadata value");
    if (!archive.metadata.emplace(std::move(key), std::move(value)).second) {
      throw DuplicateError("duplicate metadata key");
    }
  }
  if (!archive.metadata.count("format_version")) throw FormatError("metadata lacks 'format_version'");

  const auto count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_offset = r.offset();
    auto name = r.str("tensor name");
    check_name(name);
    const auto dtype = r.u8("dtype");
    if (dtype != kDtypeF32) throw FormatError("tensor '" + name + "' has unsupported dtype " + std::to_string(dtype));
    const auto rank = r.u8("rank");
    if (rank == 0 || rank > Tensor::kMaxRank) {
      throw FormatError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    }
    Shape dims(rank);
    std::uint64_t elements = 1;
    for (auto& d : dims) {
      d = r.u32("dims");
      if (d == 0) throw FormatError("tensor '" + name + "' has a zero dimension");
      elements *= d;
      if (elements > bytes.size()) throw TruncationError("tensor '" + name + "' payload exceeds file", entry_offset);
    }
    std::vector<float> data(static_cast<std::size_t>(elements));
    const auto* payload = r.take(data.size() * sizeof(float), "tensor payload");
    std::memcpy(data.data(), payload, data.size() * sizeof(float));
    if (archive.entries.count(name)) throw DuplicateError("duplicate tensor name '" + name + "'");
    archive.entries.emplace(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (!r.done()) {
    throw FormatError(std::to_string(bytes.size() - r.offset()) + " trailing bytes after the last entry at byte offset " +
                      std::to_string(r.offset()));
  }
  return archive;
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_archive(bytes);
}

void save_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  const auto bytes = write_archive(archive);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing weights file " + path.string());
}

std::string ValidationReport::describe() const {
  std::ostringstream os;
  for (const auto& m : missing) os << "missing: " << m << '\n';
  for (const auto& e : extra) os << "extra: " << e << '\n';
  for (const auto& s : mismatched) {
    os << "shape mismatch: " << s.name << " expected " << shape_to_string(s.expected) << " got "
       << shape_to_string(s.actual) << '\n';
  }
  return os.str();
}

ValidationReport validate_manifest(const TensorArchive& archive, const Manifest& manifest) {
  ValidationReport report;
  std::map<std::string, const Shape*> expected;
  for (const auto& e : manifest) expected.emplace(e.name, &e.dims);
  for (const auto& [name, dims] : expected) {
    auto it = archive.entries.find(name);
    if (it == archive.entries.end()) {
      report.missing.push_back(name);
    } else if (it->second.dims() != *dims) {
      report.mismatched.push_back({name, *dims, it->second.dims()});
    }
  }
  for (const auto& [name, tensor] : archive.entries) {
    if (!expected.count(name)) report.extra.push_back(name);
  }
  return report;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Uniform in [0, 1) from the top 24 bits; independent of the standard
// library's distribution implementations.
float unit(std::mt19937_64& rng) { return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f); }

}  // namespace

TensorArchive random_archive(const Manifest& manifest, std::uint64_t seed) {
  TensorArchive archive;
  archive.metadata["generator"] = "random";
  archive.metadata["seed"] = std::to_string(seed);
  std::mt19937_64 rng(seed);
  for (const auto& entry : manifest) {
    std::vector<float> data(shape_size(entry.dims));
    const std::string& n = entry.name;
    if (ends_with(n, "variance")) {
      for (auto& v : data) v = 0.5f + unit(rng);
    } else if (ends_with(n, "gamma")) {
      for (auto& v : data) v = 0.8f + 0.4f * unit(rng);
    } else if (ends_with(n, "beta") || ends_with(n, "mean") || ends_with(n, "bias")) {
      for (auto& v : data) v = 0.2f * (unit(rng) - 0.5f);
    } else {
      // Kernels: uniform with variance 2 / fan_in keeps activations bounded.
      std::size_t fan_in = 1;
      for (std::size_t i = 0; i + 1 < entry.dims.size(); ++i) fan_in *= entry.dims[i];
      const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
      for (auto& v : data) v = limit * (2.0f * unit(rng) - 1.0f);
    }
    archive.entries.emplace(n, Tensor(entry.dims, std::move(data)));
  }
  return archive;
}

}  // namespace storewatch::weights
