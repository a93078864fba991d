#pragma once

// CSV/JSON emitters and the score CSV reader. Doubles are printed with 17
// significant digits so files round-trip exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trust/error.hpp"
#include "trust/geometry.hpp"
#include "trust/metrics.hpp"

namespace trust::report {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ScoreRow {
  std::size_t sample_id = 0;
  std::size_t true_label = 0;
  std::size_t predicted_label = 0;
  double score = 0.0;
  std::size_t iterations = 0;
  double final_loss = 0.0;
  std::string method = "trust";

  bool correct() const noexcept { return predicted_label == true_label; }
  bool operator==(const ScoreRow&) const = default;
};

inline const char* kTrustScoreHeader =
    "sample_id,true_label,predicted_label,trust_score,iterations,final_loss";

/// TRUST rows use the bare header; other methods append a `method` column.
inline std::string scores_csv(const std::vector<ScoreRow>& rows, bool with_method) {
  std::ostringstream out;
  out << kTrustScoreHeader << (with_method ? ",method" : "") << '\n';
  for (const auto& r : rows) {
    out << r.sample_id << ',' << r.true_label << ',' << r.predicted_label << ',' << fmt(r.score)
        << ',' << r.iterations << ',' << fmt(r.final_loss);
    if (with_method) out << ',' << r.method;
    out << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("score CSV lacks column '" + name + "'");
}

}  // namespace detail

inline std::vector<ScoreRow> parse_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("score CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split(line);
  const auto c_id = detail::column(header, "sample_id");
  const auto c_true = detail::column(header, "true_label");
  const auto c_pred = detail::column(header, "predicted_label");
  const auto c_score = detail::column(header, "trust_score");
  const auto c_iter = detail::column(header, "iterations");
  const auto c_loss = detail::column(header, "final_loss");
  std::size_t c_method = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "method") c_method = i;
  }

  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split(line);
    if (cells.size() != header.size()) {
      throw FormatError("score CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields");
    }
    try {
      ScoreRow r;
      r.sample_id = std::stoull(cells[c_id]);
      r.true_label = std::stoull(cells[c_true]);
      r.predicted_label = std::stoull(cells[c_pred]);
      r.score = std::stod(cells[c_score]);
      r.iterations = std::stoull(cells[c_iter]);
      r.final_loss = std::stod(cells[c_loss]);
      if (c_method < cells.size()) r.method = cells[c_method];
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("score CSV line " + std::to_string(line_no) + " is not numeric");
    }
  }
  return rows;
}

inline std::vector<ScoredPrediction> to_predictions(const std::vector<ScoreRow>& rows) {
  std::vector<ScoredPrediction> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.sample_id, r.score, r.correct()});
  return out;
}

inline std::string risk_coverage_csv(const RiskCoverageCurve& curve) {
  std::ostringstream out;
  out << "coverage,risk\n";
  for (const auto& p : curve) out << fmt(p.coverage) << ',' << fmt(p.risk) << '\n';
  return out.str();
}

inline std::string sparsification_csv(const SparsificationCurve& c) {
  std::ostringstream out;
  out << "removed_fraction,method_error,oracle_error\n";
  for (std::size_t i = 0; i < c.removed_fraction.size(); ++i) {
    out << fmt(c.removed_fraction[i]) << ',' << fmt(c.method_error[i]) << ','
        << fmt(c.oracle_error[i]) << '\n';
  }
  return out.str();
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream out;
  out << "bin_center,mass\n";
  for (const auto& b : bins) out << fmt(b.center) << ',' << fmt(b.mass) << '\n';
  return out.str();
}

/// Accuracy over the top 10%, 20%, ..., 100% most confident predictions.
inline std::vector<std::pair<int, double>> stratification(const std::vector<ScoredPrediction>& preds) {
  std::vector<std::pair<int, double>> out;
  for (int pct = 10; pct <= 100; pct += 10) {
    out.emplace_back(pct, accuracy_at_top(preds, pct / 100.0));
  }
  return out;
}

inline std::string stratification_csv(const std::vector<std::pair<int, double>>& table) {
  std::ostringstream out;
  out << "top_percent,accuracy\n";
  for (const auto& [pct, acc] : table) out << pct << ',' << fmt(acc) << '\n';
  return out.str();
}

inline nlohmann::json to_json(const geometry::McReport& r) {
  return {{"trials", r.trials},
          {"empirical_value", r.empirical_value},
          {"theoretical_value", r.theoretical_value},
          {"abs_error", r.abs_error},
          {"rel_error", r.rel_error}};
}

/// Single-line JSON with a trailing newline.
inline std::string dump(const nlohmann::json& j) { return j.dump() + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trust::report
