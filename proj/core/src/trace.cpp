#include "gradtrace/trace.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"

static_assert(std::endian::native == std::endian::little,
              "trace container I/O assumes a little-endian host");

namespace gradtrace {

namespace {

constexpr char kMagic[4] = {'G', 'T', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::uint8_t kDtypeFloat64 = 1;

std::string meta_sidecar_path(const std::string& path) {
  return path + ".meta.json";
}

void check_finite(const Eigen::MatrixXd& values) {
  for (Eigen::Index t = 0; t < values.cols(); ++t) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (!std::isfinite(values(i, t))) {
        throw ValidationError("non-finite trace entry at (row " +
                              std::to_string(i) + ", step " +
                              std::to_string(t) + ")");
      }
    }
  }
}

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

GradientTrace load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic; not a gradient trace container: " + path);
  }
  const auto version = read_raw<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw FormatError("unsupported trace container version " +
                      std::to_string(version));
  }
  const auto dtype = read_raw<std::uint8_t>(in, "dtype");
  if (dtype != kDtypeFloat32 && dtype != kDtypeFloat64) {
    throw FormatError("unknown dtype tag " + std::to_string(dtype));
  }
  char reserved[3];
  in.read(reserved, 3);
  if (!in) throw CorruptionError("truncated file while reading reserved bytes");
  const auto dim = read_raw<std::uint64_t>(in, "dim");
  const auto count = read_raw<std::uint64_t>(in, "count");
  if (dim == 0 || count == 0) {
    throw FormatError("header declares an empty trace (dim " +
                      std::to_string(dim) + ", count " +
                      std::to_string(count) + ")");
  }

  const std::uint64_t header_bytes = 4 + 4 + 1 + 3 + 8 + 8;
  const std::uint64_t elem_bytes = dtype == kDtypeFloat32 ? 4 : 8;
  const std::uint64_t expected = header_bytes + dim * count * elem_bytes;
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw CorruptionError("payload size disagrees with header: expected " +
                          std::to_string(expected) + " bytes, file has " +
                          std::to_string(actual));
  }

  Eigen::MatrixXd values(static_cast<Eigen::Index>(dim),
                         static_cast<Eigen::Index>(count));
  if (dtype == kDtypeFloat64) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(dim * count * 8));
    if (!in) throw CorruptionError("truncated payload");
  } else {
    std::vector<float> buf(dim * count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(dim * count * 4));
    if (!in) throw CorruptionError("truncated payload");
    for (std::uint64_t j = 0; j < count; ++j) {
      for (std::uint64_t i = 0; i < dim; ++i) {
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<double>(buf[j * dim + i]);
      }
    }
  }

  std::map<std::string, std::string> meta;
  const std::string sidecar = meta_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream ms(sidecar);
    if (ms) {
      nlohmann::json j = nlohmann::json::parse(ms, nullptr, false);
      if (!j.is_discarded() && j.is_object()) {
        for (const auto& [k, v] : j.items()) {
          if (v.is_string()) meta[k] = v.get<std::string>();
        }
      }
    }
  }
  return GradientTrace(std::move(values), std::move(meta));
}

GradientTrace load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file: " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() &&
               (cell[pos] == ' ' || cell[pos] == '\r' || cell[pos] == '\t')) {
          ++pos;
        }
        if (pos != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw FormatError("unparsable value '" + cell + "' on line " +
                          std::to_string(lineno));
      }
    }
    if (row.empty()) {
      throw FormatError("empty row on line " + std::to_string(lineno));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw CorruptionError("row width changes on line " +
                            std::to_string(lineno) + ": expected " +
                            std::to_string(rows.front().size()) + ", got " +
                            std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("trace file holds no steps: " + path);

  const Eigen::Index dim = static_cast<Eigen::Index>(rows.front().size());
  const Eigen::Index count = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd values(dim, count);
  for (Eigen::Index t = 0; t < count; ++t) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      values(i, t) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
    }
  }

  std::map<std::string, std::string> meta;
  const std::string sidecar = meta_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream ms(sidecar);
    nlohmann::json j = nlohmann::json::parse(ms, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        if (v.is_string()) meta[k] = v.get<std::string>();
      }
    }
  }
  return GradientTrace(std::move(values), std::move(meta));
}

void save_meta_sidecar(const GradientTrace& trace, const std::string& path) {
  const std::string sidecar = meta_sidecar_path(path);
  if (trace.meta().empty()) {
    // Stale sidecars would silently re-attach on the next load.
    std::error_code ec;
    std::filesystem::remove(sidecar, ec);
    return;
  }
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : trace.meta()) j[k] = v;
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw IoError("cannot write metadata sidecar: " + sidecar);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write on metadata sidecar: " + sidecar);
}

void save_binary(const GradientTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_raw(out, kVersion);
  write_raw(out, kDtypeFloat64);
  const char reserved[3] = {0, 0, 0};
  out.write(reserved, 3);
  write_raw(out, static_cast<std::uint64_t>(trace.dim()));
  write_raw(out, static_cast<std::uint64_t>(trace.steps()));
  out.write(reinterpret_cast<const char*>(trace.values().data()),
            static_cast<std::streamsize>(
                sizeof(double) * static_cast<std::size_t>(trace.dim()) *
                static_cast<std::size_t>(trace.steps())));
  if (!out) throw IoError("short write on trace file: " + path);
  out.close();
  save_meta_sidecar(trace, path);
}

void save_csv(const GradientTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[64];
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    for (Eigen::Index i = 0; i < trace.dim(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", trace.values()(i, t));
      if (i) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("short write on trace file: " + path);
  out.close();
  save_meta_sidecar(trace, path);
}

}  // namespace

GradientTrace::GradientTrace(Eigen::MatrixXd values,
                             std::map<std::string, std::string> meta)
    : values_(std::move(values)), meta_(std::move(meta)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw ValidationError("a trace needs at least one step of positive dimension");
  }
  check_finite(values_);
}

GradientTrace load_trace(const std::string& path, TraceFormat format) {
  return format == TraceFormat::binary ? load_binary(path) : load_csv(path);
}

void save_trace(const GradientTrace& trace, const std::string& path,
                TraceFormat format) {
  if (format == TraceFormat::binary) {
    save_binary(trace, path);
  } else {
    save_csv(trace, path);
  }
}

TraceFormat sniff_trace_format(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return (in && std::memcmp(magic, kMagic, 4) == 0) ? TraceFormat::binary
                                                    : TraceFormat::csv;
}

TraceDiagnostics validate_trace(const GradientTrace& trace) {
  TraceDiagnostics diag;
  CompensatedSum energy;
  diag.min_norm = std::numeric_limits<double>::infinity();
  diag.max_norm = 0.0;
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    const double sq = compensated_squared_norm(trace.values().col(t));
    energy.add(sq);
    const double norm = std::sqrt(sq);
    if (norm < diag.min_norm) diag.min_norm = norm;
    if (norm > diag.max_norm) diag.max_norm = norm;
    if (sq == 0.0) diag.zero_gradient_steps.push_back(t);
  }
  diag.total_energy = energy.value();
  return diag;
}

}  // namespace gradtrace
