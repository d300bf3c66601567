#pragma once

#include <string>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/io_util.hpp"

namespace patchgraph {

struct SurvivalLabel {
  std::string patient_id;
  double time = 0.0;      // months
  bool censored = false;  // true: event not observed, time is a lower bound
  int bin = -1;           // discrete time bin, assigned once boundaries exist

  SurvivalLabel() = default;
  SurvivalLabel(std::string pid, double t, bool c)
      : patient_id(std::move(pid)), time(t), censored(c) {}
};

inline std::string labels_to_csv(const std::vector<SurvivalLabel>& labels) {
  std::string out = "patient_id,time,censored\n";
  for (const auto& l : labels) {
    out += l.patient_id;
    out += ',';
    out += format_double(l.time);
    out += ',';
    out += l.censored ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void write_labels_csv(const std::vector<SurvivalLabel>& labels,
                             const std::string& path) {
  atomic_write_file(path, labels_to_csv(labels));
}

inline std::vector<SurvivalLabel> read_labels_csv(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "patient_id,time,censored")
    throw FormatError(path + ": expected header 'patient_id,time,censored'");
  std::vector<SurvivalLabel> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_csv_line(lines[i]);
    if (fields.size() != 3)
      throw FormatError(path + ":" + std::to_string(i + 1) + ": expected 3 fields");
    SurvivalLabel l;
    l.patient_id = std::string(fields[0]);
    l.time = parse_double(fields[1], path);
    if (l.time < 0)
      throw ValidationError(path + ": negative time for patient " + l.patient_id);
    const long long c = parse_int(fields[2], path);
    if (c != 0 && c != 1)
      throw FormatError(path + ": censored must be 0 or 1, got " + std::to_string(c));
    l.censored = c == 1;
    labels.push_back(std::move(l));
  }
  return labels;
}

}  // namespace patchgraph
