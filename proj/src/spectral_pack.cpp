#include "rwfast/spectral_pack.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "rwfast/errors.hpp"

namespace rwfast {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'R', 'W', 'P', 'K'};
constexpr std::uint32_t kVersion = 1;

constexpr std::uint64_t kP1 = 0x9E3779B185EBCA87ULL;
constexpr std::uint64_t kP2 = 0xC2B2AE3D27D4EB4FULL;
constexpr std::uint64_t kP3 = 0x165667B19E3779F9ULL;
constexpr std::uint64_t kP4 = 0x85EBCA77C2B2AE63ULL;
constexpr std::uint64_t kP5 = 0x27D4EB2F165667C5ULL;

std::uint64_t xx_round(std::uint64_t acc, std::uint64_t input) {
  acc += input * kP2;
  acc = std::rotl(acc, 31);
  return acc * kP1;
}

std::uint64_t xx_merge(std::uint64_t acc, std::uint64_t val) {
  acc ^= xx_round(0, val);
  return acc * kP1 + kP4;
}

template <typename T>
T load_le(const std::byte* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

// Incremental XXH64 so large pack files can be verified chunk by chunk.
class Xxh64 {
 public:
  explicit Xxh64(std::uint64_t seed)
      : v_{seed + kP1 + kP2, seed + kP2, seed, seed - kP1}, seed_(seed) {}

  void update(std::span<const std::byte> data) {
    total_ += data.size();
    std::size_t pos = 0;
    if (buffered_ > 0) {
      const std::size_t take = std::min<std::size_t>(32 - buffered_, data.size());
      std::memcpy(buffer_ + buffered_, data.data(), take);
      buffered_ += take;
      pos = take;
      if (buffered_ < 32) return;
      stripe(buffer_);
      buffered_ = 0;
    }
    for (; pos + 32 <= data.size(); pos += 32) stripe(data.data() + pos);
    buffered_ = data.size() - pos;
    std::memcpy(buffer_, data.data() + pos, buffered_);
  }

  std::uint64_t digest() const {
    std::uint64_t h;
    if (total_ >= 32) {
      h = std::rotl(v_[0], 1) + std::rotl(v_[1], 7) + std::rotl(v_[2], 12) + std::rotl(v_[3], 18);
      for (std::uint64_t v : v_) h = xx_merge(h, v);
    } else {
      h = seed_ + kP5;
    }
    h += total_;
    std::size_t pos = 0;
    for (; pos + 8 <= buffered_; pos += 8) {
      h ^= xx_round(0, load_le<std::uint64_t>(buffer_ + pos));
      h = std::rotl(h, 27) * kP1 + kP4;
    }
    if (pos + 4 <= buffered_) {
      h ^= static_cast<std::uint64_t>(load_le<std::uint32_t>(buffer_ + pos)) * kP1;
      h = std::rotl(h, 23) * kP2 + kP3;
      pos += 4;
    }
    for (; pos < buffered_; ++pos) {
      h ^= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(buffer_[pos])) * kP5;
      h = std::rotl(h, 11) * kP1;
    }
    h ^= h >> 33;
    h *= kP2;
    h ^= h >> 29;
    h *= kP3;
    h ^= h >> 32;
    return h;
  }

 private:
  void stripe(const std::byte* p) {
    for (int i = 0; i < 4; ++i) v_[i] = xx_round(v_[i], load_le<std::uint64_t>(p + 8 * i));
  }

  std::uint64_t v_[4];
  std::uint64_t seed_;
  std::uint64_t total_ = 0;
  std::byte buffer_[32];
  std::size_t buffered_ = 0;
};

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::byte*>(data);
    bytes.insert(bytes.end(), p, p + size);
  }
  std::vector<std::byte> bytes;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::byte> data, const fs::path& path) : data_(data), path_(path) {}
  template <typename T>
  T get() {
    T v;
    get_raw(&v, sizeof(T));
    return v;
  }
  void get_raw(void* out, std::size_t size) {
    if (pos_ + size > data_.size()) throw FormatError("pack file truncated: " + path_.string());
    std::memcpy(out, data_.data() + pos_, size);
    pos_ += size;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::byte> data_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

struct PackHeader {
  Dims dims;
  std::vector<double> spacing;
  double beta = 0.0;
  std::uint32_t m = 0;
  std::uint64_t n = 0;
};

// Reads everything up to and including N; validates magic and version.
PackHeader read_header(ByteReader& r, const fs::path& path) {
  char magic[4];
  r.get_raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad pack magic in " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported pack version " + std::to_string(version) + " in " +
                      path.string());
  }
  PackHeader h;
  const auto d = r.get<std::uint8_t>();
  if (d != 2 && d != 3) throw FormatError("pack dimensionality must be 2 or 3");
  for (int a = 0; a < d; ++a) h.dims.extents.push_back(static_cast<Index>(r.get<std::uint64_t>()));
  for (int a = 0; a < d; ++a) h.spacing.push_back(r.get<double>());
  h.beta = r.get<double>();
  h.m = r.get<std::uint32_t>();
  h.n = r.get<std::uint64_t>();
  if (static_cast<Index>(h.n) != h.dims.count()) throw FormatError("pack N does not match dims");
  return h;
}

std::size_t header_size(int d) { return 4 + 4 + 1 + 8 * d + 8 * d + 8 + 4 + 8; }

}  // namespace

std::uint64_t xxhash64(std::span<const std::byte> data, std::uint64_t seed) {
  Xxh64 h(seed);
  h.update(data);
  return h.digest();
}

ImageHash image_content_hash(const Image& image) {
  ByteWriter w;
  for (Index e : image.dims.extents) w.put(static_cast<std::uint64_t>(e));
  w.put_raw(image.intensities.data(), image.intensities.size() * sizeof(double));
  ImageHash out{};
  unsigned int len = 0;
  EVP_Digest(w.bytes.data(), w.bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

std::string to_hex(const ImageHash& hash) {
  std::ostringstream s;
  for (auto b : hash) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  return s.str();
}

bool SpectralPack::operator==(const SpectralPack& o) const {
  return dims == o.dims && spacing == o.spacing && beta == o.beta && vectors == o.vectors &&
         values == o.values && d_sqrt == o.d_sqrt && image_hash == o.image_hash;
}

SpectralPack precompute(const Image& image, double beta, int m, const PrecomputeOptions& options) {
  const Index n = image.size();
  if (m < 1 || m > std::min<Index>(n, options.max_columns)) {
    throw InvalidParam("precompute: m=" + std::to_string(m) + " must be in [1, min(N=" +
                       std::to_string(n) + ", cap=" + std::to_string(options.max_columns) + ")]");
  }
  const WeightedLatticeGraph graph = build_graph(image, beta);
  const Laplacian lap = laplacian(graph, LaplacianMode::Normalized);
  const EigenBasis basis = smallest_eigs(lap.matrix, m, options.eig);

  SpectralPack pack;
  pack.dims = image.dims;
  pack.spacing = image.spacing;
  pack.beta = beta;
  pack.vectors = basis.vectors.cast<float>();
  pack.values = basis.values;
  pack.d_sqrt = lap.d_sqrt.cast<float>();
  pack.image_hash = image_content_hash(image);
  pack.eig_tol = options.eig.tol;
  pack.requested = m;
  if (pack.size() == 0) {
    throw NotConverged("precompute: no eigenpair converged", {});
  }
  return pack;
}

void validate_pack(const SpectralPack& pack) {
  const Index n = pack.dims.count();
  if (pack.vectors.rows() != n || pack.d_sqrt.size() != n) throw FormatError("pack shape mismatch");
  if (pack.values.size() != pack.vectors.cols()) throw FormatError("pack value count mismatch");
  if (!(pack.beta >= 0.0)) throw FormatError("pack beta must be >= 0");
  if (pack.d_sqrt.size() > 0 && !(pack.d_sqrt.minCoeff() > 0.0f)) {
    throw FormatError("pack d_sqrt must be positive");
  }
  for (Index i = 1; i < pack.values.size(); ++i) {
    if (pack.values[i] < pack.values[i - 1]) throw FormatError("pack eigenvalues not ascending");
  }
  if (pack.values.size() > 0 && pack.values[0] > 1e-8) {
    throw FormatError("pack first eigenvalue must be ~0");
  }
}

void save_pack(const SpectralPack& pack, const fs::path& path) {
  validate_pack(pack);
  ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(pack.dims.ndim()));
  for (Index e : pack.dims.extents) w.put(static_cast<std::uint64_t>(e));
  for (int a = 0; a < pack.dims.ndim(); ++a) {
    w.put(a < static_cast<int>(pack.spacing.size()) ? pack.spacing[a] : 1.0);
  }
  w.put(pack.beta);
  w.put(static_cast<std::uint32_t>(pack.size()));
  w.put(static_cast<std::uint64_t>(pack.voxels()));
  w.put_raw(pack.values.data(), sizeof(double) * pack.values.size());
  w.put_raw(pack.d_sqrt.data(), sizeof(float) * pack.d_sqrt.size());
  w.put_raw(pack.vectors.data(), sizeof(float) * pack.vectors.size());
  const std::uint64_t checksum = xxhash64(w.bytes);
  w.put(checksum);
  w.put_raw(pack.image_hash.data(), pack.image_hash.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write pack " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes.data()),
            static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw IoError("write failed for pack " + path.string());
}

SpectralPack load_pack(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pack " + path.string());
  std::vector<char> raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::span<const std::byte> bytes(reinterpret_cast<const std::byte*>(raw.data()), raw.size());
  ByteReader r(bytes, path);
  const PackHeader h = read_header(r, path);
  const std::size_t payload =
      8 * static_cast<std::size_t>(h.m) + 4 * h.n + 4 * h.n * static_cast<std::size_t>(h.m);
  const std::size_t expected = header_size(h.dims.ndim()) + payload + 8 + 32;
  if (bytes.size() != expected) {
    throw FormatError("pack file " + path.string() + " has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expected));
  }
  SpectralPack pack;
  pack.dims = h.dims;
  pack.spacing = h.spacing;
  pack.beta = h.beta;
  pack.values.resize(h.m);
  r.get_raw(pack.values.data(), 8 * h.m);
  pack.d_sqrt.resize(static_cast<Index>(h.n));
  r.get_raw(pack.d_sqrt.data(), 4 * h.n);
  pack.vectors.resize(static_cast<Index>(h.n), h.m);
  r.get_raw(pack.vectors.data(), 4 * h.n * h.m);
  const std::size_t covered = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (stored != xxhash64(bytes.first(covered))) {
    throw ChecksumMismatch("pack checksum mismatch in " + path.string());
  }
  r.get_raw(pack.image_hash.data(), pack.image_hash.size());
  pack.requested = static_cast<int>(h.m);
  validate_pack(pack);
  return pack;
}

PackSet::PackSet(std::vector<std::shared_ptr<const SpectralPack>> packs) : packs_(std::move(packs)) {
  std::sort(packs_.begin(), packs_.end(), [](const auto& a, const auto& b) { return a->beta < b->beta; });
  for (std::size_t i = 0; i < packs_.size(); ++i) {
    if (!packs_[i]) throw InvalidParam("null pack in pack set");
    if (i > 0) {
      if (packs_[i]->beta == packs_[i - 1]->beta) {
        throw InvalidParam("pack set betas must be distinct");
      }
      if (packs_[i]->dims != packs_[0]->dims || packs_[i]->image_hash != packs_[0]->image_hash) {
        throw ImageMismatch("pack set mixes images");
      }
    }
  }
}

std::size_t PackSet::nearest(double beta) const {
  if (packs_.empty()) throw InvalidParam("empty pack set");
  // beta = 0 compares on a shifted log scale so it stays finite.
  auto key = [](double b) { return std::log(b + 1e-12); };
  std::size_t best = 0;
  double best_d = std::abs(key(beta) - key(packs_[0]->beta));
  for (std::size_t i = 1; i < packs_.size(); ++i) {
    const double d = std::abs(key(beta) - key(packs_[i]->beta));
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

void PackBasis::read_columns(int first, int count, Eigen::MatrixXd& out) const {
  out = pack_.vectors.middleCols(first, count).cast<double>();
}

void DenseBasis::read_columns(int first, int count, Eigen::MatrixXd& out) const {
  out = vectors_.middleCols(first, count);
}

PackFileBasis::PackFileBasis(const fs::path& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open pack " + path.string());
  in_.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);

  std::vector<std::byte> head(std::min<std::uint64_t>(file_size, header_size(3)));
  in_.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  ByteReader r(head, path_);
  const PackHeader h = read_header(r, path_);
  dims_ = h.dims;
  beta_ = h.beta;
  n_ = static_cast<Index>(h.n);
  const std::uint64_t hsize = header_size(h.dims.ndim());
  const std::uint64_t covered = hsize + 8ULL * h.m + 4ULL * h.n + 4ULL * h.n * h.m;
  if (file_size != covered + 8 + 32) throw FormatError("pack file truncated: " + path.string());

  // Chunked checksum pass.
  Xxh64 hasher(0);
  in_.seekg(0);
  std::vector<std::byte> chunk(1 << 20);
  std::uint64_t left = covered;
  while (left > 0) {
    const std::size_t take = static_cast<std::size_t>(std::min<std::uint64_t>(left, chunk.size()));
    in_.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(take));
    hasher.update(std::span<const std::byte>(chunk.data(), take));
    left -= take;
  }
  std::uint64_t stored = 0;
  in_.read(reinterpret_cast<char*>(&stored), 8);
  if (stored != hasher.digest()) throw ChecksumMismatch("pack checksum mismatch in " + path.string());
  in_.read(reinterpret_cast<char*>(hash_.data()), 32);

  values_.resize(h.m);
  in_.seekg(static_cast<std::streamoff>(hsize));
  in_.read(reinterpret_cast<char*>(values_.data()), static_cast<std::streamsize>(8 * h.m));
  q_offset_ = hsize + 8ULL * h.m + 4ULL * h.n;
  if (!in_) throw IoError("read failed for pack " + path.string());
}

void PackFileBasis::read_columns(int first, int count, Eigen::MatrixXd& out) const {
  std::lock_guard lock(mutex_);
  std::vector<float> buf(static_cast<std::size_t>(n_) * count);
  in_.seekg(static_cast<std::streamoff>(q_offset_ + 4ULL * n_ * first));
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4 * buf.size()));
  if (!in_) throw IoError("read failed for pack " + path_.string());
  out = Eigen::Map<const Eigen::MatrixXf>(buf.data(), n_, count).cast<double>();
}

}  // namespace rwfast
