#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "armtune/errors.hpp"
#include "armtune/metrics.hpp"
#include "armtune/study.hpp"
#include "armtune/tpe.hpp"

namespace armtune {

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline std::string param_csv(const ParamValue& v) {
  if (std::holds_alternative<double>(v)) return csv_num(std::get<double>(v));
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  return csv_field(std::get<std::string>(v));
}

}  // namespace detail

// One row per complete trial, columns in search-space order, then `value`.
inline void emit_pcp_csv(const std::string& path, const std::vector<TrialRecord>& records, const SearchSpace& space) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < space.domains.size(); ++i) {
    os << detail::csv_field(space.domains[i].name) << ',';
  }
  os << "value\n";
  for (const auto& r : records) {
    if (r.trial.state != TrialState::kComplete) continue;
    for (const auto& d : space.domains) {
      os << detail::param_csv(r.trial.params.at(d.name)) << ',';
    }
    os << detail::csv_num(r.trial.value) << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

// param,score sorted by descending score (name ascending on ties).
inline void emit_importance_csv(const std::string& path, const std::vector<TrialRecord>& records,
                                const SearchSpace& space) {
  std::vector<Trial> trials;
  for (const auto& r : records) trials.push_back(r.trial);
  const std::map<std::string, double> scores = importance(trials, space);
  std::vector<std::pair<std::string, double>> rows(scores.begin(), scores.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "param,score\n";
  for (const auto& [name, score] : rows) os << detail::csv_field(name) << ',' << detail::csv_num(score) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

// label,episode,reward,smoothed for each labelled training curve.
inline void emit_curves_csv(const std::string& path,
                            const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves,
                            int smoothing_window) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "label,episode,reward,smoothed\n";
  for (const auto& [label, curve] : curves) {
    std::vector<double> rewards;
    rewards.reserve(curve.size());
    for (const auto& p : curve) rewards.push_back(p.reward);
    const std::vector<double> smoothed = trailing_moving_average(rewards, smoothing_window);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      os << detail::csv_field(label) << ',' << curve[i].episode << ',' << detail::csv_num(curve[i].reward) << ','
         << detail::csv_num(smoothed[i]) << '\n';
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

struct SummaryRow {
  std::string model;
  std::int64_t episodes = 0;
  double success_rate = 0.0;
};

inline void append_summary_row(const std::string& path, const SummaryRow& row) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot write " + path);
  if (fresh) os << "model,episodes,success_rate\n";
  os << detail::csv_field(row.model) << ',' << row.episodes << ',' << detail::csv_num(row.success_rate) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<SummaryRow> read_summary_rows(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<SummaryRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("model,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    SummaryRow r;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw IoError("malformed summary row: " + line);
    r.model = line.substr(0, c1);
    r.episodes = std::stoll(line.substr(c1 + 1, c2 - c1 - 1));
    r.success_rate = std::stod(line.substr(c2 + 1));
    rows.push_back(r);
  }
  return rows;
}

// The Table-5 shaped grid, one row per (model, episodes) pair.
inline void emit_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "model,episodes,success_rate\n";
  for (const auto& r : rows) {
    os << detail::csv_field(r.model) << ',' << r.episodes << ',' << detail::csv_num(r.success_rate) << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

struct ReportInputs {
  std::string journal_path;  // may be empty
  std::optional<Algo> algo;  // space hint; inferred from the journal otherwise
  std::vector<std::pair<std::string, std::string>> curves;  // label -> curve csv path
  std::string evals_path;    // summary rows collected by `evaluate`
  int smoothing_window = 100;
};

// Emits pcp.csv, importance.csv, curves.csv, summary.csv into out_dir.
// Returns human-readable warnings for inputs that were missing or too small.
inline std::vector<std::string> report_emit(const ReportInputs& in, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> warnings;

  std::vector<TrialRecord> records;
  if (!in.journal_path.empty()) records = read_journal(in.journal_path);

  SearchSpace space;
  if (in.algo.has_value()) {
    space = search_space(*in.algo);
  } else if (!records.empty()) {
    const bool looks_sac = records.front().trial.params.count("buffer_size") > 0;
    space = search_space(looks_sac ? Algo::kSac : Algo::kPpo);
  } else {
    space = ppo_search_space();
  }

  emit_pcp_csv(out_dir + "/pcp.csv", records, space);
  if (records.empty()) warnings.push_back("journal empty: pcp.csv has headers only");

  int complete = 0;
  for (const auto& r : records) complete += r.trial.state == TrialState::kComplete ? 1 : 0;
  if (complete >= 20) {
    emit_importance_csv(out_dir + "/importance.csv", records, space);
  } else {
    std::ofstream os(out_dir + "/importance.csv");
    os << "param,score\n";
    warnings.push_back("importance needs >= 20 complete trials, have " + std::to_string(complete) +
                       ": importance.csv has headers only");
  }

  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  for (const auto& [label, path] : in.curves) curves.emplace_back(label, read_curve_csv(path));
  emit_curves_csv(out_dir + "/curves.csv", curves, in.smoothing_window);
  if (curves.empty()) warnings.push_back("no curve logs given: curves.csv has headers only");

  std::vector<SummaryRow> rows;
  if (!in.evals_path.empty()) rows = read_summary_rows(in.evals_path);
  emit_summary_csv(out_dir + "/summary.csv", rows);
  if (rows.empty()) warnings.push_back("no evaluation rows given: summary.csv has headers only");

  return warnings;
}

}  // namespace armtune
