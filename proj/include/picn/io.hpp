#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "picn/analysis.hpp"
#include "picn/field.hpp"
#include "picn/problem.hpp"
#include "picn/training.hpp"

namespace picn {
namespace io {

/// 17 significant digits: lossless double -> text -> double round trip.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

/// One grid node per line, row-major; u_exact/abs_err columns only when a
/// reference field is available.
inline void write_field_csv(const std::filesystem::path& path, const GridSpec& grid,
                            const FieldTensor& field, const FieldFn& reference, int channel) {
  if (field.rows() != grid.ny || field.cols() != grid.nx)
    throw std::invalid_argument("write_field_csv: field does not match grid");
  std::ofstream out = open_out(path);
  out << (reference ? "x,y,u_pred,u_exact,abs_err\n" : "x,y,u_pred\n");
  for (int i = 0; i < grid.ny; ++i)
    for (int j = 0; j < grid.nx; ++j) {
      const double x = grid.x(j), y = grid.y(i), v = field(i, j);
      out << g17(x) << ',' << g17(y) << ',' << g17(v);
      if (reference) {
        const double e = reference(x, y, channel);
        out << ',' << g17(e) << ',' << g17(std::abs(v - e));
      }
      out << '\n';
    }
}

/// One JSON object per logged epoch; rel_l2 is the max over channels and null
/// when the problem has no reference field.
inline void write_metrics_jsonl(const std::filesystem::path& path,
                                const std::vector<EpochRecord>& history) {
  std::ofstream out = open_out(path);
  for (const auto& rec : history) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["loss_total"] = rec.loss.total;
    j["loss_g"] = rec.loss.l_g;
    j["loss_r1"] = rec.loss.l_r1;
    j["loss_r2"] = rec.loss.l_r2;
    j["loss_obs"] = rec.loss.l_obs;
    if (rec.rel_l2.empty()) {
      j["rel_l2"] = nullptr;
    } else {
      double worst = 0.0;
      for (double e : rec.rel_l2) worst = std::max(worst, e);
      j["rel_l2"] = worst;
    }
    out << j.dump() << '\n';
  }
}

inline void write_spectrum_csv(const std::filesystem::path& path, const PowerSpectrum& s) {
  std::ofstream out = open_out(path);
  out << (s.two_d ? "freq_x,freq_y,power\n" : "freq_x,power\n");
  for (const auto& b : s.bins) {
    out << g17(b.freq_x) << ',';
    if (s.two_d) out << g17(b.freq_y) << ',';
    out << g17(b.power) << '\n';
  }
}

/// Epoch-indexed spectrum history (one row per bin per logged epoch).
inline void write_spectrum_log_csv(const std::filesystem::path& path,
                                   const std::vector<std::pair<int, PowerSpectrum>>& log) {
  std::ofstream out = open_out(path);
  const bool two_d = !log.empty() && log.front().second.two_d;
  out << (two_d ? "epoch,freq_x,freq_y,power\n" : "epoch,freq_x,power\n");
  for (const auto& [epoch, s] : log)
    for (const auto& b : s.bins) {
      out << epoch << ',' << g17(b.freq_x) << ',';
      if (two_d) out << g17(b.freq_y) << ',';
      out << g17(b.power) << '\n';
    }
}

inline void write_lambda_history_csv(const std::filesystem::path& path,
                                     const std::vector<EpochRecord>& history) {
  std::ofstream out = open_out(path);
  size_t n = 0;
  for (const auto& rec : history) n = std::max(n, rec.lambda.size());
  out << "epoch";
  for (size_t i = 0; i < n; ++i) out << ",lambda_" << (i + 1);
  out << '\n';
  for (const auto& rec : history) {
    out << rec.epoch;
    for (size_t i = 0; i < n; ++i)
      out << ',' << g17(i < rec.lambda.size() ? rec.lambda[i] : 0.0);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Hashing (reproducibility checks)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const void* bytes, size_t n, std::uint64_t h = 14695981039346656037ull) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for hashing: " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
  return h;
}

}  // namespace io
}  // namespace picn
