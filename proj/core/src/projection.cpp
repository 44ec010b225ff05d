#include "gradtrace/projection.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"
#include "gradtrace/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "projection container I/O assumes a little-endian host");

namespace gradtrace {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'R', 'J'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kGeneratorPhiloxBoxMuller = 1;
constexpr std::uint8_t kDtypeFloat64 = 1;

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const char* what) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CorruptionError(std::string("truncated file while reading ") + what);
  return value;
}

}  // namespace

ProjectionSpec make_projection(Eigen::Index d, Eigen::Index k,
                               std::uint64_t seed) {
  if (d < 1 || k < 1) {
    throw ConfigError("projection needs positive k and d");
  }
  ProjectionSpec proj;
  proj.seed = seed;
  proj.generator_id = kGeneratorPhiloxBoxMuller;
  proj.matrix.resize(k, d);

  // Row-major fill order is part of the pinned generator contract.
  Philox rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      proj.matrix(i, j) = rng.next_normal() * scale;
    }
  }

  // Moment gate on large matrices: catches a broken generator, proves
  // nothing stronger.
  const double nd = static_cast<double>(k) * static_cast<double>(d);
  if (nd >= 1e4) {
    CompensatedSum sum, sum_sq;
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < k; ++i) {
        sum.add(proj.matrix(i, j));
        sum_sq.add(proj.matrix(i, j) * proj.matrix(i, j));
      }
    }
    const double mean = sum.value() / nd;
    const double var = sum_sq.value() / nd - mean * mean;
    const double target = 1.0 / static_cast<double>(k);
    if (std::abs(mean) > 5.0 / std::sqrt(nd) ||
        std::abs(var - target) > 0.1 * target) {
      throw NumericalError("projection entries fail the moment gate: mean " +
                           std::to_string(mean) + ", variance " +
                           std::to_string(var));
    }
  }
  return proj;
}

void save_projection(const ProjectionSpec& proj, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_raw(out, kVersion);
  write_raw(out, proj.generator_id);
  write_raw(out, kDtypeFloat64);
  const char reserved[3] = {0, 0, 0};
  out.write(reserved, 3);
  write_raw(out, static_cast<std::uint64_t>(proj.k()));
  write_raw(out, static_cast<std::uint64_t>(proj.d()));
  write_raw(out, proj.seed);
  // Stored row-major to match the generation order.
  for (Eigen::Index i = 0; i < proj.k(); ++i) {
    for (Eigen::Index j = 0; j < proj.d(); ++j) {
      write_raw(out, proj.matrix(i, j));
    }
  }
  if (!out) throw IoError("short write on projection file: " + path);
}

ProjectionSpec load_projection(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open projection file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic; not a projection container: " + path);
  }
  const auto version = read_raw<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported projection container version " +
                      std::to_string(version));
  }
  const auto generator_id = read_raw<std::uint32_t>(in, "generator id");
  if (generator_id != kGeneratorPhiloxBoxMuller) {
    throw FormatError("unknown generator id " + std::to_string(generator_id));
  }
  const auto dtype = read_raw<std::uint8_t>(in, "dtype");
  if (dtype != kDtypeFloat64) {
    throw FormatError("unknown dtype tag " + std::to_string(dtype));
  }
  char reserved[3];
  in.read(reserved, 3);
  if (!in) throw CorruptionError("truncated file while reading reserved bytes");
  const auto k = read_raw<std::uint64_t>(in, "k");
  const auto d = read_raw<std::uint64_t>(in, "d");
  const auto seed = read_raw<std::uint64_t>(in, "seed");
  if (k == 0 || d == 0) {
    throw FormatError("header declares an empty projection");
  }

  const std::uint64_t header_bytes = 4 + 4 + 4 + 1 + 3 + 8 + 8 + 8;
  const std::uint64_t expected = header_bytes + k * d * 8;
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw CorruptionError("payload size disagrees with header: expected " +
                          std::to_string(expected) + " bytes, file has " +
                          std::to_string(actual));
  }

  ProjectionSpec proj;
  proj.seed = seed;
  proj.generator_id = generator_id;
  proj.matrix.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::uint64_t i = 0; i < k; ++i) {
    for (std::uint64_t j = 0; j < d; ++j) {
      proj.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          read_raw<double>(in, "payload");
    }
  }
  return proj;
}

GradientTrace apply_projection(const ProjectionSpec& proj,
                               const GradientTrace& trace) {
  if (proj.d() != trace.dim()) {
    throw DimensionError("projection expects dimension " +
                         std::to_string(proj.d()) + ", trace has " +
                         std::to_string(trace.dim()));
  }
  Eigen::MatrixXd projected = proj.matrix * trace.values();

  std::map<std::string, std::string> meta = trace.meta();
  meta["projection.seed"] = std::to_string(proj.seed);
  meta["projection.k"] = std::to_string(proj.k());
  meta["projection.source_dim"] = std::to_string(trace.dim());
  return GradientTrace(std::move(projected), std::move(meta));
}

double DistortionStats::fraction_within(double tolerance) const {
  if (ratios.empty()) return 0.0;
  std::size_t inside = 0;
  for (double r : ratios) {
    if (std::abs(r - 1.0) <= tolerance) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(ratios.size());
}

DistortionStats distortion_check(const ProjectionSpec& proj,
                                 const Eigen::MatrixXd& vectors) {
  if (vectors.rows() != proj.d()) {
    throw DimensionError("probe vectors have dimension " +
                         std::to_string(vectors.rows()) +
                         ", projection expects " + std::to_string(proj.d()));
  }
  const Eigen::MatrixXd image = proj.matrix * vectors;

  DistortionStats stats;
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const double source_sq = compensated_squared_norm(vectors.col(j));
    if (source_sq == 0.0) continue;
    const double image_sq = compensated_squared_norm(image.col(j));
    const double ratio = image_sq / source_sq;
    stats.ratios.push_back(ratio);
    const double norm_err = std::abs(std::sqrt(ratio) - 1.0);
    if (norm_err > stats.max_relative_norm_error) {
      stats.max_relative_norm_error = norm_err;
    }
  }
  stats.pair_count = static_cast<Eigen::Index>(stats.ratios.size());
  if (stats.pair_count == 0) {
    throw ValidationError("no usable probe vectors: every column is zero");
  }
  return stats;
}

}  // namespace gradtrace
