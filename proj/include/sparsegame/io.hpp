#pragma once

// Report serialization: CSV with a mandatory header row, '.' decimals and
// '\n' line endings, JSON mirrors, and atomic file writes (temp file in
// the target directory, then rename), so failed runs leave no partial
// output behind.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsegame/decay.hpp"
#include "sparsegame/reduction.hpp"

namespace sparsegame {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const {
    std::string out;
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += row[i];
      }
      out += '\n';
    }
    return out;
  }
};

inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  const fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline CsvTable curve_csv(const W2Curve& curve, bool with_iterations) {
  CsvTable t;
  t.header = {"r", "avg_w2_sq", "sup_w2_sq", "gamma_r", "rhs", "theta", "theta_star"};
  if (with_iterations) t.header.push_back("iterations");
  for (const auto& row : curve.rows) {
    std::vector<std::string> cells = {
        std::to_string(row.r),         format_double(row.avg_w2_sq),
        format_double(row.sup_w2_sq),  format_double(row.gamma_r),
        format_double(row.rhs),        format_double(row.theta),
        format_double(row.theta_star)};
    if (with_iterations) cells.push_back(std::to_string(row.iterations));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline nlohmann::json curve_json(const W2Curve& curve, const std::string& kind) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : curve.rows)
    rows.push_back({{"r", row.r},
                    {"avg_w2_sq", row.avg_w2_sq},
                    {"sup_w2_sq", row.sup_w2_sq},
                    {"gamma_r", row.gamma_r},
                    {"rhs", row.rhs},
                    {"theta", row.theta},
                    {"theta_star", row.theta_star},
                    {"iterations", row.iterations}});
  return {{"experiment", kind},
          {"rows", rows},
          {"refinement_rel_change", curve.refinement_rel_change},
          {"warnings", curve.warnings}};
}

// The per-layer table behind the constants report: h, the sup count
// feeding gamma_h, gamma_h itself and the running product.
inline CsvTable constants_csv(const NkhTable& table,
                              const std::vector<double>& gamma_seq) {
  CsvTable t;
  t.header = {"h", "sup_nkh", "gamma_h", "gamma_prod"};
  double prod = 1.0;
  for (size_t h = 0; h < gamma_seq.size(); ++h) {
    prod *= gamma_seq[h];
    t.rows.push_back({std::to_string(h),
                      std::to_string(table.layer_sup(static_cast<int>(h) + 1,
                                                     static_cast<int>(h))),
                      format_double(gamma_seq[h]), format_double(prod)});
  }
  return t;
}

inline CsvTable decay_table_csv(const DecoupingDecayReport& rep) {
  CsvTable t;
  t.header = {"k", "distance", "max_norm"};
  for (const auto& row : rep.rows)
    t.rows.push_back({std::to_string(row.k), std::to_string(row.distance),
                      format_double(row.max_norm)});
  return t;
}

inline nlohmann::json decay_table_json(const DecoupingDecayReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"k", row.k},
                    {"distance", row.distance},
                    {"max_norm", row.max_norm}});
  return {{"experiment", "decay-v"},
          {"rows", rows},
          {"slope", rep.slope},
          {"intercept", rep.intercept},
          {"slope_valid", rep.slope_valid}};
}

inline nlohmann::json perturbation_json(const PerturbationResult& res) {
  return {{"experiment", "perturb"},
          {"distance", res.distance},
          {"w2_sq_at_T", res.w2_sq_at_T},
          {"int_w2_sq", res.int_w2_sq},
          {"left", res.left},
          {"bound", res.bound},
          {"ratio", res.ratio},
          {"tilde_r", res.tilde_r},
          {"gamma_weighted", res.gamma_weighted},
          {"source_weight", res.source_weight}};
}

inline CsvTable perturbation_csv(const PerturbationResult& res) {
  CsvTable t;
  t.header = {"distance", "w2_sq_at_T", "int_w2_sq", "left", "bound", "ratio", "tilde_r"};
  t.rows.push_back({std::to_string(res.distance), format_double(res.w2_sq_at_T),
                    format_double(res.int_w2_sq), format_double(res.left),
                    format_double(res.bound), format_double(res.ratio),
                    format_double(res.tilde_r)});
  return t;
}

}  // namespace sparsegame
