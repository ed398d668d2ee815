#include "rwfast/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "rwfast/errors.hpp"

namespace rwfast {

static_assert(std::endian::native == std::endian::little,
              "RAWJ and pack payloads are read by memcpy");

namespace fs = std::filesystem;
using json = nlohmann::json;

Index Dims::count() const {
  Index n = 1;
  for (Index e : extents) n *= e;
  return n;
}

Index Dims::stride(int axis) const {
  Index s = 1;
  for (int a = 0; a < axis; ++a) s *= extents[a];
  return s;
}

Index Dims::flat(std::span<const Index> coord) const {
  Index idx = 0;
  Index s = 1;
  for (std::size_t a = 0; a < extents.size(); ++a) {
    idx += coord[a] * s;
    s *= extents[a];
  }
  return idx;
}

std::vector<Index> Dims::coord(Index flat_index) const {
  std::vector<Index> c(extents.size());
  for (std::size_t a = 0; a < extents.size(); ++a) {
    c[a] = flat_index % extents[a];
    flat_index /= extents[a];
  }
  return c;
}

void validate_dims(const Dims& dims) {
  if (dims.ndim() != 2 && dims.ndim() != 3) {
    throw InvalidParam("images must have 2 or 3 axes, got " + std::to_string(dims.ndim()));
  }
  for (Index e : dims.extents) {
    if (e <= 0) throw InvalidParam("image extents must be positive");
  }
}

Image make_image(Dims dims, std::vector<double> raw, std::vector<double> spacing) {
  validate_dims(dims);
  if (static_cast<Index>(raw.size()) != dims.count()) {
    throw DimsMismatch("intensity count " + std::to_string(raw.size()) +
                       " does not match dims product " + std::to_string(dims.count()));
  }
  if (spacing.empty()) spacing.assign(dims.extents.size(), 1.0);
  if (spacing.size() != dims.extents.size()) throw InvalidParam("spacing rank mismatch");

  Image img;
  img.dims = std::move(dims);
  img.spacing = std::move(spacing);
  for (double v : raw) {
    if (!std::isfinite(v)) throw FormatError("non-finite intensity");
  }
  auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  img.raw_min = *lo;
  img.raw_max = *hi;
  const double range = img.raw_max - img.raw_min;
  img.intensities.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.intensities[i] = range > 0 ? (raw[i] - img.raw_min) / range : 0.0;
  }
  return img;
}

LabelMap hard_labels(const ProbabilityField& field) {
  LabelMap out;
  out.dims = field.dims;
  const Index n = field.values.rows();
  out.labels.resize(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) {
    int best = 0;
    for (int k = 1; k < field.values.cols(); ++k) {
      if (field.values(x, k) > field.values(x, best)) best = k;
    }
    out.labels[static_cast<std::size_t>(x)] = static_cast<std::uint16_t>(best);
  }
  return out;
}

double row_sum_deviation(const Eigen::MatrixXd& values) {
  if (values.rows() == 0) return 0.0;
  return (values.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

namespace {

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed for " + path.string());
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32" || dtype == "u32") return 4;
  if (dtype == "u16") return 2;
  throw FormatError("unsupported RAWJ dtype '" + dtype + "'");
}

}  // namespace

Image load_pgm(const fs::path& path) {
  const auto bytes = read_all(path);
  std::size_t pos = 0;
  auto skip_ws = [&] {
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
  auto read_int = [&]() -> long {
    skip_ws();
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw FormatError("malformed PGM header in " + path.string());
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("bad PGM magic in " + path.string() + " (expected P5)");
  }
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0) throw FormatError("PGM dims must be positive");
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval out of range");
  ++pos;  // single whitespace before raster
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width * height);
  if (bytes.size() < pos || bytes.size() - pos != n * bpp) {
    throw FormatError("PGM payload size does not match " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (bpp == 1) {
      raw[i] = static_cast<unsigned char>(bytes[pos + i]);
    } else {
      raw[i] = static_cast<unsigned char>(bytes[pos + 2 * i]) * 256.0 +
               static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    }
  }
  // Scale by maxval, not by the observed range, so byte 255 maps to 1.
  Image img = make_image(Dims{{width, height}}, raw);
  for (std::size_t i = 0; i < n; ++i) img.intensities[i] = raw[i] / static_cast<double>(maxval);
  img.raw_min = 0.0;
  img.raw_max = static_cast<double>(maxval);
  return img;
}

void save_pgm(const Image& image, const fs::path& path) {
  if (image.dims.ndim() != 2) throw InvalidParam("PGM output requires a 2D image");
  std::ostringstream header;
  header << "P5\n" << image.dims.extents[0] << " " << image.dims.extents[1] << "\n255\n";
  std::string data = header.str();
  for (double v : image.intensities) {
    data.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  write_all(path, data.data(), data.size());
}

std::pair<fs::path, fs::path> rawj_paths(const fs::path& path) {
  fs::path stem = path;
  if (path.extension() == ".json" || path.extension() == ".raw" ||
      path.extension() == ".rawj") {
    stem.replace_extension();
  }
  fs::path j = stem;
  j += ".json";
  fs::path r = stem;
  r += ".raw";
  return {j, r};
}

void write_rawj(const fs::path& path, const RawjHeader& header,
                std::span<const std::byte> payload) {
  const auto [jpath, rpath] = rawj_paths(path);
  json j;
  j["dims"] = header.dims.extents;
  j["spacing"] = header.spacing.empty() ? std::vector<double>(header.dims.extents.size(), 1.0)
                                        : header.spacing;
  j["dtype"] = header.dtype;
  j["order"] = "x-fastest";
  if (header.channels != 1) j["channels"] = header.channels;
  const std::string text = j.dump();
  write_all(jpath, text.data(), text.size());
  write_all(rpath, payload.data(), payload.size());
}

RawjHeader read_rawj(const fs::path& path, std::vector<std::byte>& payload) {
  const auto [jpath, rpath] = rawj_paths(path);
  const auto text = read_all(jpath);
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw FormatError("bad RAWJ header " + jpath.string() + ": " + e.what());
  }
  RawjHeader h;
  try {
    h.dims.extents = j.at("dims").get<std::vector<Index>>();
    h.spacing = j.value("spacing", std::vector<double>(h.dims.extents.size(), 1.0));
    h.dtype = j.value("dtype", std::string("f32"));
    h.channels = j.value("channels", 1);
    if (j.value("order", std::string("x-fastest")) != "x-fastest") {
      throw FormatError("RAWJ order must be x-fastest");
    }
  } catch (const json::exception& e) {
    throw FormatError("bad RAWJ header " + jpath.string() + ": " + e.what());
  }
  try {
    validate_dims(h.dims);
  } catch (const InvalidParam& e) {
    throw FormatError(std::string("RAWJ dims: ") + e.what());
  }
  if (h.channels < 1) throw FormatError("RAWJ channels must be positive");
  const auto raw = read_all(rpath);
  const std::size_t expected =
      static_cast<std::size_t>(h.dims.count()) * h.channels * dtype_size(h.dtype);
  if (raw.size() != expected) {
    throw FormatError("RAWJ payload " + rpath.string() + " has " + std::to_string(raw.size()) +
                      " bytes, header implies " + std::to_string(expected));
  }
  payload.resize(raw.size());
  std::memcpy(payload.data(), raw.data(), raw.size());
  return h;
}

Image load_rawj_image(const fs::path& path) {
  std::vector<std::byte> payload;
  RawjHeader h = read_rawj(path, payload);
  if (h.dtype != "f32" || h.channels != 1) {
    throw FormatError("image RAWJ must be single-channel f32");
  }
  const std::size_t n = payload.size() / 4;
  std::vector<float> f(n);
  std::memcpy(f.data(), payload.data(), payload.size());
  std::vector<double> raw(f.begin(), f.end());
  Image img = make_image(h.dims, std::move(raw), h.spacing);
  // Data already in [0,1] is kept verbatim so save/load round trips exactly.
  if (img.raw_min >= 0.0 && img.raw_max <= 1.0) {
    for (std::size_t i = 0; i < n; ++i) img.intensities[i] = f[i];
    img.raw_min = 0.0;
    img.raw_max = 1.0;
  }
  return img;
}

Image load_image(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".json" || ext == ".raw" || ext == ".rawj") return load_rawj_image(path);
  // Sniff: PGM magic, else try the RAWJ pair.
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] == 'P' && magic[1] == '5') return load_pgm(path);
  }
  return load_rawj_image(path);
}

void save_rawj_image(const Image& image, const fs::path& path) {
  std::vector<float> f(image.intensities.begin(), image.intensities.end());
  write_rawj(path, RawjHeader{image.dims, image.spacing, "f32", 1},
             std::as_bytes(std::span<const float>(f)));
}

void save_label_map(const LabelMap& labels, const fs::path& path) {
  write_rawj(path, RawjHeader{labels.dims, {}, "u16", 1},
             std::as_bytes(std::span<const std::uint16_t>(labels.labels)));
}

LabelMap load_label_map(const fs::path& path) {
  std::vector<std::byte> payload;
  RawjHeader h = read_rawj(path, payload);
  if (h.dtype != "u16" || h.channels != 1) throw FormatError("label map RAWJ must be u16");
  LabelMap out;
  out.dims = h.dims;
  out.labels.resize(payload.size() / 2);
  std::memcpy(out.labels.data(), payload.data(), payload.size());
  return out;
}

void save_probability_field(const ProbabilityField& field, const fs::path& path) {
  const Index n = field.values.rows();
  const Index k = field.values.cols();
  std::vector<float> f(static_cast<std::size_t>(n * k));
  for (Index x = 0; x < n; ++x) {
    for (Index c = 0; c < k; ++c) {
      f[static_cast<std::size_t>(x * k + c)] =
          static_cast<float>(std::clamp(field.values(x, c), 0.0, 1.0));
    }
  }
  write_rawj(path, RawjHeader{field.dims, {}, "f32", static_cast<int>(k)},
             std::as_bytes(std::span<const float>(f)));
}

ProbabilityField load_probability_field(const fs::path& path) {
  std::vector<std::byte> payload;
  RawjHeader h = read_rawj(path, payload);
  if (h.dtype != "f32") throw FormatError("probability RAWJ must be f32");
  std::vector<float> f(payload.size() / 4);
  std::memcpy(f.data(), payload.data(), payload.size());
  ProbabilityField out;
  out.dims = h.dims;
  const Index n = h.dims.count();
  out.values.resize(n, h.channels);
  for (Index x = 0; x < n; ++x) {
    for (int c = 0; c < h.channels; ++c) out.values(x, c) = f[static_cast<std::size_t>(x * h.channels + c)];
  }
  return out;
}

}  // namespace rwfast
