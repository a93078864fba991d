#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trust/binary_io.hpp"
#include "trust/error.hpp"
#include "trust/matrix.hpp"
#include "trust/nn.hpp"

namespace trust {

/// Labelled feature matrix (one sample per row). A label equal to
/// num_classes marks an out-of-distribution sample.
struct Dataset {
  Matrix features;
  std::vector<std::uint32_t> labels;
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> sample(std::size_t i) const { return features.row(i); }

  void validate() const {
    if (features.rows() != labels.size()) {
      throw ShapeError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                       std::to_string(labels.size()) + " labels");
    }
    for (auto y : labels) {
      if (y > num_classes) throw ShapeError("label " + std::to_string(y) + " out of range");
    }
  }

  bool operator==(const Dataset&) const = default;
};

struct SyntheticSpec {
  std::size_t d = 64;
  std::size_t k = 4;
  std::size_t modes_per_class = 2;
  double cluster_std = 0.05;
  std::size_t samples_per_mode = 250;
  double radius = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (d == 0 || k == 0 || modes_per_class == 0 || samples_per_mode == 0) {
      throw ConfigError("synthetic spec counts must be >= 1");
    }
    if (!(cluster_std > 0.0) || !(radius > 0.0)) {
      throw ConfigError("cluster_std and radius must be positive");
    }
  }
};

inline constexpr std::size_t kMaxCenterAttempts = 1'000'000;
inline constexpr double kMaxCenterCosine = 0.5;

namespace detail {

inline void fill_unit_direction(std::span<double> out, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double n = 0.0;
  do {
    for (auto& v : out) v = gauss(rng);
    n = norm2(out);
  } while (n == 0.0);
  for (auto& v : out) v /= n;
}

}  // namespace detail

struct SyntheticSplit {
  Dataset train;
  Dataset test;
  Matrix centers;  // one row per mode; mode m belongs to class m / modes_per_class
};

/// Micro-cluster data: mode centers on the radius sphere with pairwise
/// cosine < 0.5, Gaussian samples around each center, 80/20 split per mode.
inline SyntheticSplit gen_microclusters(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t modes = spec.k * spec.modes_per_class;

  Matrix centers(modes, spec.d);
  Vector candidate(spec.d);
  std::size_t attempts = 0;
  for (std::size_t m = 0; m < modes; ++m) {
    for (;;) {
      if (++attempts > kMaxCenterAttempts) {
        throw InfeasibleSpecError("mode-center rejection sampling exceeded " +
                                  std::to_string(kMaxCenterAttempts) +
                                  " attempts; too many modes for dimension " +
                                  std::to_string(spec.d));
      }
      detail::fill_unit_direction(candidate, rng);
      bool ok = true;
      for (std::size_t j = 0; j < m && ok; ++j) {
        ok = dot(candidate, centers.row(j)) / spec.radius < kMaxCenterCosine;
      }
      if (ok) break;
    }
    auto row = centers.row(m);
    for (std::size_t i = 0; i < spec.d; ++i) row[i] = candidate[i] * spec.radius;
  }

  const std::size_t train_per_mode = spec.samples_per_mode * 4 / 5;
  const std::size_t test_per_mode = spec.samples_per_mode - train_per_mode;
  SyntheticSplit out;
  out.train.features = Matrix(modes * train_per_mode, spec.d);
  out.test.features = Matrix(modes * test_per_mode, spec.d);
  out.train.num_classes = out.test.num_classes = spec.k;
  out.train.name = "microclusters-train";
  out.test.name = "microclusters-test";

  std::normal_distribution<double> noise(0.0, spec.cluster_std);
  std::size_t train_row = 0;
  std::size_t test_row = 0;
  for (std::size_t m = 0; m < modes; ++m) {
    const auto label = static_cast<std::uint32_t>(m / spec.modes_per_class);
    const auto c = centers.row(m);
    for (std::size_t s = 0; s < spec.samples_per_mode; ++s) {
      const bool to_train = s < train_per_mode;
      auto& ds = to_train ? out.train : out.test;
      auto row = ds.features.row(to_train ? train_row++ : test_row++);
      for (std::size_t i = 0; i < spec.d; ++i) row[i] = c[i] + noise(rng);
      ds.labels.push_back(label);
    }
  }
  out.centers = std::move(centers);
  return out;
}

/// Uniform points on the radius sphere, labelled with the sentinel class k.
inline Dataset gen_ood(std::size_t n, std::size_t d, double radius, std::uint64_t seed,
                       std::size_t k) {
  if (d == 0) throw ConfigError("OOD dimension must be >= 1");
  Rng rng(seed);
  Dataset out;
  out.features = Matrix(n, d);
  out.num_classes = k;
  out.name = "ood-sphere";
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.features.row(i);
    detail::fill_unit_direction(row, rng);
    for (auto& v : row) v *= radius;
    out.labels.push_back(static_cast<std::uint32_t>(k));
  }
  return out;
}

enum class CorruptionKind { uniform, gaussian, brightness };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian;
  double level = 0.0;
  std::uint64_t seed = 0;
};

inline CorruptionKind parse_corruption_kind(const std::string& s) {
  if (s == "uniform") return CorruptionKind::uniform;
  if (s == "gaussian") return CorruptionKind::gaussian;
  if (s == "brightness") return CorruptionKind::brightness;
  throw ConfigError("unknown corruption kind '" + s + "'");
}

inline std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::uniform: return "uniform";
    case CorruptionKind::gaussian: return "gaussian";
    case CorruptionKind::brightness: return "brightness";
  }
  return "unknown";
}

/// Population standard deviation over every feature entry.
inline double feature_std(const Dataset& data) {
  const auto v = data.features.values();
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Additive corruption whose magnitude is level times the dataset's feature std.
inline Dataset corrupt(const Dataset& data, const CorruptionSpec& spec) {
  if (!(spec.level >= 0.0) || !std::isfinite(spec.level)) {
    throw ConfigError("corruption level must be finite and >= 0");
  }
  Dataset out = data;
  if (spec.level == 0.0) return out;
  const double scale = spec.level * feature_std(data);
  Rng rng(spec.seed);
  auto values = out.features.values();
  switch (spec.kind) {
    case CorruptionKind::uniform: {
      std::uniform_real_distribution<double> u(-scale, scale);
      for (auto& v : values) v += u(rng);
      break;
    }
    case CorruptionKind::gaussian: {
      std::normal_distribution<double> g(0.0, scale);
      for (auto& v : values) v += g(rng);
      break;
    }
    case CorruptionKind::brightness:
      for (auto& v : values) v += scale;
      break;
  }
  out.name = data.name + "-" + to_string(spec.kind) + "-" + std::to_string(spec.level);
  return out;
}

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarPixels = 3072;

/// CIFAR-10 binary batch: per record one label byte then 3072 pixel bytes
/// (R, G, B planes of 32x32), scaled to [0, 1].
inline Dataset decode_cifar10_bin(std::span<const char> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR-10 file length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset out;
  out.features = Matrix(n, kCifarPixels);
  out.num_classes = 10;
  out.name = "cifar10";
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + i * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError("record " + std::to_string(i) + " has label byte " +
                        std::to_string(rec[0]));
    }
    out.labels.push_back(rec[0]);
    auto row = out.features.row(i);
    for (std::size_t p = 0; p < kCifarPixels; ++p) row[p] = rec[1 + p] / 255.0;
  }
  return out;
}

inline Dataset load_cifar10_bin(const std::string& path) {
  return decode_cifar10_bin(io::read_file(path));
}

// Dataset file: u64 LE header length, JSON {name, d, k, n}, n*d LE doubles
// (row-major), n u32 LE labels.

inline std::string encode_dataset(const Dataset& data) {
  data.validate();
  std::string out;
  io::put_json_header(out, {{"name", data.name},
                            {"d", data.dim()},
                            {"k", data.num_classes},
                            {"n", data.size()}});
  io::put_doubles(out, data.features.values());
  for (auto y : data.labels) io::put_uint<std::uint32_t>(out, y);
  return out;
}

inline Dataset decode_dataset(std::span<const char> bytes) {
  io::Reader in(bytes);
  const auto header = in.get_json_header();
  Dataset out;
  std::size_t n = 0;
  std::size_t d = 0;
  try {
    out.name = header.at("name").get<std::string>();
    d = header.at("d").get<std::size_t>();
    out.num_classes = header.at("k").get<std::size_t>();
    n = header.at("n").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  if (in.remaining() != n * d * 8 + n * 4) {
    throw FormatError("dataset payload is " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(n * d * 8 + n * 4));
  }
  out.features = Matrix(n, d);
  for (auto& v : out.features.values()) v = in.get_double();
  out.labels.resize(n);
  for (auto& y : out.labels) y = in.get_uint<std::uint32_t>();
  try {
    out.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("dataset labels: ") + e.what());
  }
  return out;
}

inline void save_dataset(const Dataset& data, const std::string& path) {
  io::write_file(path, encode_dataset(data));
}

inline Dataset load_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

}  // namespace trust
