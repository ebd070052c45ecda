#include "longtmle/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "longtmle/stats.hpp"

namespace longtmle {

std::string to_string(CensorCause cause) {
  switch (cause) {
    case CensorCause::none: return "none";
    case CensorCause::disenroll: return "disenroll";
    case CensorCause::death: return "death";
    case CensorCause::admin: return "admin";
  }
  throw Error("unreachable censor cause");
}

CensorCause censor_cause_from_string(const std::string& text) {
  if (text == "none" || text == "0") return CensorCause::none;
  if (text == "disenroll" || text == "1") return CensorCause::disenroll;
  if (text == "death" || text == "2") return CensorCause::death;
  if (text == "admin" || text == "3") return CensorCause::admin;
  throw ParseError("unknown censor cause '" + text + "'");
}

std::size_t LongDataset::n_rows() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.rows.size();
  return n;
}

int LongDataset::max_t() const {
  int m = -1;
  for (const auto& s : subjects) m = std::max(m, s.last_t());
  return m;
}

std::size_t LongDataset::covariate_index(const std::string& name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j) {
    if (covariate_names[j] == name) return j;
  }
  throw ConfigError("unknown covariate '" + name + "'");
}

std::vector<Violation> validate(const LongDataset& data) {
  std::vector<Violation> out;
  auto flag = [&](const std::string& id, int t, std::string msg) {
    out.push_back({id, t, std::move(msg)});
  };

  std::unordered_set<std::string> seen_ids;
  for (const auto& subject : data.subjects) {
    if (!seen_ids.insert(subject.id).second) {
      flag(subject.id, 0, "duplicate subject id");
    }
    if (subject.rows.empty()) {
      flag(subject.id, 0, "subject has no rows");
      continue;
    }
    const int last = subject.last_t();
    for (int t = 0; t <= last; ++t) {
      const auto& row = subject.rows[static_cast<std::size_t>(t)];
      if (row.t != t) {
        flag(subject.id, t, "intervals not consecutive from zero");
      }
      if (row.covariates.size() != data.covariate_names.size()) {
        flag(subject.id, t, "covariate count mismatch");
      }
      for (double v : row.covariates) {
        if (!std::isfinite(v)) {
          flag(subject.id, t, "non-finite covariate value");
          break;
        }
      }
      if (row.a_treat != 0 && row.a_treat != 1) {
        flag(subject.id, t, "a_treat outside {0,1}");
      }
      const bool censored = row.a_cens != CensorCause::none;
      if (censored != !row.y.has_value()) {
        flag(subject.id, t, "outcome must be present exactly when uncensored");
      }
      if (row.y && *row.y != 0 && *row.y != 1) {
        flag(subject.id, t, "y outside {0,1}");
      }
      if (censored && t != last) {
        flag(subject.id, t, "censoring must end the subject's rows");
      }
      if (row.y && *row.y == 1 && t != last) {
        flag(subject.id, t, "failure must end the subject's rows");
      }
    }
  }
  return out;
}

SummaryMap SummaryMap::default_map(const LongDataset& data) {
  SummaryMap map;
  map.baseline = data.covariate_names;
  map.current = data.covariate_names;
  map.lagged_treatment = true;
  return map;
}

std::size_t SummaryMap::dimension() const {
  return baseline.size() + current.size() + (lagged_treatment ? 1 : 0);
}

std::vector<std::string> SummaryMap::column_labels() const {
  std::vector<std::string> labels;
  labels.reserve(dimension());
  for (const auto& name : baseline) labels.push_back(name + "_0");
  for (const auto& name : current) labels.push_back(name);
  if (lagged_treatment) labels.push_back("a_prev");
  return labels;
}

ResolvedSummary::ResolvedSummary(const LongDataset& data, const SummaryMap& map) {
  baseline_idx_.reserve(map.baseline.size());
  for (const auto& name : map.baseline) {
    baseline_idx_.push_back(data.covariate_index(name));
  }
  current_idx_.reserve(map.current.size());
  for (const auto& name : map.current) {
    current_idx_.push_back(data.covariate_index(name));
  }
  lagged_treatment_ = map.lagged_treatment;
}

void ResolvedSummary::fill(const Subject& subject, int k, double* out) const {
  const auto& base = subject.rows.front().covariates;
  const auto& cur = subject.rows[static_cast<std::size_t>(k)].covariates;
  std::size_t j = 0;
  for (std::size_t idx : baseline_idx_) out[j++] = base[idx];
  for (std::size_t idx : current_idx_) out[j++] = cur[idx];
  if (lagged_treatment_) {
    out[j++] = k > 0 ? subject.rows[static_cast<std::size_t>(k - 1)].a_treat : 0.0;
  }
}

SummaryBlock build_summary(const LongDataset& data, const SummaryMap& map, int k) {
  const ResolvedSummary r(data, map);
  const auto dim = static_cast<Eigen::Index>(map.dimension());

  SummaryBlock block;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    if (data.subjects[i].last_t() >= k) block.subject_index.push_back(i);
  }
  block.x.resize(static_cast<Eigen::Index>(block.subject_index.size()), dim);
  std::vector<double> buf(map.dimension());
  for (std::size_t row = 0; row < block.subject_index.size(); ++row) {
    r.fill(data.subjects[block.subject_index[row]], k, buf.data());
    for (Eigen::Index j = 0; j < dim; ++j) {
      block.x(static_cast<Eigen::Index>(row), j) = buf[static_cast<std::size_t>(j)];
    }
  }
  return block;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": expected a number, got '" + text + "'");
  }
}

int parse_int(const std::string& text, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": expected an integer, got '" + text + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

}  // namespace

LongDataset read_long_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input");

  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "subject_id" || header[1] != "t") {
    throw ParseError("header must start with subject_id,t and end with a_treat,a_cens,y");
  }
  const std::size_t ncol = header.size();
  if (header[ncol - 3] != "a_treat" || header[ncol - 2] != "a_cens" ||
      header[ncol - 1] != "y") {
    throw ParseError("header must end with a_treat,a_cens,y");
  }

  LongDataset data;
  data.covariate_names.assign(header.begin() + 2, header.end() - 3);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != ncol) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(ncol) + " fields, got " +
                       std::to_string(fields.size()));
    }
    PersonTimeRow row;
    row.t = parse_int(fields[1], line_no);
    row.covariates.reserve(data.covariate_names.size());
    for (std::size_t j = 0; j < data.covariate_names.size(); ++j) {
      row.covariates.push_back(parse_double(fields[2 + j], line_no));
    }
    row.a_treat = parse_int(fields[ncol - 3], line_no);
    row.a_cens = censor_cause_from_string(fields[ncol - 2]);
    const std::string& y_text = fields[ncol - 1];
    if (!y_text.empty()) row.y = parse_int(y_text, line_no);

    const std::string& id = fields[0];
    if (data.subjects.empty() || data.subjects.back().id != id) {
      data.subjects.push_back(Subject{id, {}});
    }
    data.subjects.back().rows.push_back(std::move(row));
  }
  return data;
}

LongDataset read_long_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_long_csv(in);
}

void write_long_csv(const LongDataset& data, std::ostream& out) {
  out << "subject_id,t";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << ",a_treat,a_cens,y\n";
  for (const auto& subject : data.subjects) {
    for (const auto& row : subject.rows) {
      out << subject.id << ',' << row.t;
      for (double v : row.covariates) out << ',' << format_double(v);
      out << ',' << row.a_treat << ',' << to_string(row.a_cens) << ',';
      if (row.y) out << *row.y;
      out << '\n';
    }
  }
}

void write_long_csv_file(const LongDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_long_csv(data, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace longtmle
