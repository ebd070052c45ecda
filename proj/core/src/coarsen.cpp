#include "longtmle/coarsen.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "longtmle/stats.hpp"

namespace longtmle {

std::string to_string(ExposureRule rule) {
  switch (rule) {
    case ExposureRule::any_day: return "any_day";
    case ExposureRule::first_day: return "first_day";
    case ExposureRule::majority: return "majority";
  }
  throw Error("unreachable exposure rule");
}

ExposureRule exposure_rule_from_string(const std::string& text) {
  if (text == "any_day") return ExposureRule::any_day;
  if (text == "first_day") return ExposureRule::first_day;
  if (text == "majority") return ExposureRule::majority;
  throw ParseError("unknown exposure rule '" + text + "'");
}

namespace {

void check_stream(const DailyEventStream& s, const CoarsenConfig& cfg) {
  if (cfg.time_unit_days <= 0) throw ConfigError("time_unit_days must be positive");
  if (cfg.max_intervals <= 0) throw ConfigError("max_intervals must be positive");
  if (s.end_day < s.entry_day) {
    throw ConfigError("stream '" + s.subject_id + "': end_day before entry_day");
  }
  auto in_window = [&](int day) { return day >= s.entry_day && day <= s.end_day; };
  if (s.failure_day && !in_window(*s.failure_day)) {
    throw ConfigError("stream '" + s.subject_id + "': failure_day outside window");
  }
  if (s.censor_day && !in_window(*s.censor_day)) {
    throw ConfigError("stream '" + s.subject_id + "': censor_day outside window");
  }
  if (s.censor_day.has_value() !=
      (s.censor_cause == CensorCause::disenroll || s.censor_cause == CensorCause::death)) {
    throw ConfigError("stream '" + s.subject_id +
                      "': censor_day requires cause disenroll or death");
  }
  for (const auto& obs : s.covariates) {
    if (!in_window(obs.day)) {
      throw ConfigError("stream '" + s.subject_id + "': covariate day outside window");
    }
  }
  for (const auto& ep : s.episodes) {
    if (ep.end_day < ep.start_day) {
      throw ConfigError("stream '" + s.subject_id + "': episode ends before it starts");
    }
  }
}

bool exposed_in_bin(const DailyEventStream& s, const CoarsenConfig& cfg,
                    int first_day, int last_day) {
  switch (cfg.exposure) {
    case ExposureRule::any_day: {
      for (const auto& ep : s.episodes) {
        if (ep.start_day <= last_day && ep.end_day >= first_day) return true;
      }
      return false;
    }
    case ExposureRule::first_day: {
      for (const auto& ep : s.episodes) {
        if (ep.start_day <= first_day && ep.end_day >= first_day) return true;
      }
      return false;
    }
    case ExposureRule::majority: {
      // Counted against the nominal bin width, so trailing partial bins need
      // a strict majority of the full unit as well.
      int days_on = 0;
      for (const auto& ep : s.episodes) {
        const int lo = std::max(ep.start_day, first_day);
        const int hi = std::min(ep.end_day, last_day);
        if (hi >= lo) days_on += hi - lo + 1;
      }
      return 2 * days_on > cfg.time_unit_days;
    }
  }
  throw Error("unreachable exposure rule");
}

}  // namespace

std::vector<PersonTimeRow> coarsen_stream(const DailyEventStream& stream,
                                          const CoarsenConfig& config,
                                          const std::vector<std::string>& covariate_names) {
  check_stream(stream, config);
  const int unit = config.time_unit_days;
  const int entry = stream.entry_day;

  // Terminal event: earliest of failure, explicit censoring and end of data.
  // Failure wins a same-day tie; explicit censoring beats end of data.
  int event_day = stream.end_day;
  CensorCause event_cause = CensorCause::admin;
  bool event_is_failure = false;
  if (stream.censor_day && *stream.censor_day <= event_day) {
    event_day = *stream.censor_day;
    event_cause = stream.censor_cause;
  }
  if (stream.failure_day && *stream.failure_day <= event_day) {
    event_day = *stream.failure_day;
    event_is_failure = true;
    event_cause = CensorCause::none;
  }

  int event_interval = (event_day - entry) / unit;
  bool truncated = false;
  if (event_interval >= config.max_intervals) {
    event_interval = config.max_intervals - 1;
    truncated = true;
  }

  // Observations sorted by day once; a cursor walks them as bins advance.
  std::vector<CovariateObservation> obs = stream.covariates;
  std::stable_sort(obs.begin(), obs.end(),
                   [](const auto& a, const auto& b) { return a.day < b.day; });

  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < covariate_names.size(); ++j) col_of.emplace(covariate_names[j], j);
  for (const auto& o : obs) {
    if (!col_of.count(o.name)) {
      throw ConfigError("stream '" + stream.subject_id + "': covariate '" + o.name +
                        "' not in the requested column set");
    }
  }

  const std::size_t p = covariate_names.size();
  std::vector<double> carried(p, 0.0);
  std::vector<bool> ever_seen(p, false);
  std::vector<int> seen_at(p, std::numeric_limits<int>::min());
  std::size_t cursor = 0;

  std::vector<PersonTimeRow> rows;
  rows.reserve(static_cast<std::size_t>(event_interval) + 1);
  int prev_first_day = std::numeric_limits<int>::min();

  for (int k = 0; k <= event_interval; ++k) {
    const int first_day = entry + k * unit;
    const int last_day = first_day + unit - 1;

    while (cursor < obs.size() && obs[cursor].day <= first_day) {
      const std::size_t j = col_of.at(obs[cursor].name);
      carried[j] = obs[cursor].value;
      ever_seen[j] = true;
      seen_at[j] = obs[cursor].day;
      ++cursor;
    }

    PersonTimeRow row;
    row.t = k;
    row.covariates.resize(2 * p);
    for (std::size_t j = 0; j < p; ++j) {
      row.covariates[j] = ever_seen[j] ? carried[j] : 0.0;
      // Fresh means observed since the previous bin's decision day; anything
      // older is flagged as imputed.
      const bool fresh = ever_seen[j] && seen_at[j] > prev_first_day;
      row.covariates[p + j] = fresh ? 0.0 : 1.0;
    }
    row.a_treat = exposed_in_bin(stream, config, first_day, last_day) ? 1 : 0;

    if (k == event_interval) {
      if (truncated) {
        row.a_cens = CensorCause::admin;
      } else if (event_is_failure) {
        row.y = 1;
      } else {
        row.a_cens = event_cause;
      }
    } else {
      row.y = 0;
    }
    rows.push_back(std::move(row));
    prev_first_day = first_day;
  }
  return rows;
}

LongDataset coarsen_dataset(const std::vector<DailyEventStream>& streams,
                            const CoarsenConfig& config) {
  std::vector<std::string> names;
  std::unordered_map<std::string, bool> seen;
  for (const auto& s : streams) {
    for (const auto& o : s.covariates) {
      if (!seen.count(o.name)) {
        seen.emplace(o.name, true);
        names.push_back(o.name);
      }
    }
  }

  LongDataset data;
  data.covariate_names = names;
  for (const auto& name : names) data.covariate_names.push_back(name + "_imp");
  data.subjects.reserve(streams.size());
  for (const auto& s : streams) {
    Subject subject;
    subject.id = s.subject_id;
    subject.rows = coarsen_stream(s, config, names);
    data.subjects.push_back(std::move(subject));
  }
  return data;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
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

int to_int(const std::string& text, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + text + "'");
  }
}

double to_double(const std::string& text, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
}

}  // namespace

std::vector<DailyEventStream> read_daily_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input");
  if (split_line(line) != std::vector<std::string>{"subject_id", "record", "day", "name", "value"}) {
    throw ParseError("daily header must be subject_id,record,day,name,value");
  }

  // Preserve first-appearance order of subjects.
  std::vector<DailyEventStream> streams;
  std::unordered_map<std::string, std::size_t> index_of;
  std::unordered_map<std::string, bool> has_entry, has_end;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 5) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields");
    }
    const std::string& id = f[0];
    auto [it, inserted] = index_of.try_emplace(id, streams.size());
    if (inserted) {
      streams.push_back(DailyEventStream{});
      streams.back().subject_id = id;
    }
    DailyEventStream& s = streams[it->second];
    const std::string& record = f[1];
    const int day = to_int(f[2], line_no);

    if (record == "entry") {
      s.entry_day = day;
      has_entry[id] = true;
    } else if (record == "end") {
      s.end_day = day;
      has_end[id] = true;
    } else if (record == "covariate") {
      s.covariates.push_back({day, f[3], to_double(f[4], line_no)});
    } else if (record == "treat") {
      TreatmentEpisode ep;
      ep.start_day = day;
      ep.end_day = f[4].empty() ? std::numeric_limits<int>::max() : to_int(f[4], line_no);
      s.episodes.push_back(ep);
    } else if (record == "failure") {
      if (s.failure_day) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate failure record");
      }
      s.failure_day = day;
    } else if (record == "censor") {
      if (s.censor_day) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate censor record");
      }
      s.censor_day = day;
      s.censor_cause = censor_cause_from_string(f[3]);
      if (s.censor_cause != CensorCause::disenroll && s.censor_cause != CensorCause::death) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": censor cause must be disenroll or death");
      }
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown record '" + record + "'");
    }
  }

  for (auto& s : streams) {
    if (!has_entry[s.subject_id] || !has_end[s.subject_id]) {
      throw ParseError("stream '" + s.subject_id + "' is missing entry or end record");
    }
    // Open-ended episodes run to the end of data.
    for (auto& ep : s.episodes) {
      if (ep.end_day == std::numeric_limits<int>::max()) ep.end_day = s.end_day;
    }
  }
  return streams;
}

std::vector<DailyEventStream> read_daily_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_daily_csv(in);
}

void write_daily_csv(const std::vector<DailyEventStream>& streams, std::ostream& out) {
  out << "subject_id,record,day,name,value\n";
  std::ostringstream num;
  num.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : streams) {
    out << s.subject_id << ",entry," << s.entry_day << ",,\n";
    out << s.subject_id << ",end," << s.end_day << ",,\n";
    for (const auto& o : s.covariates) {
      num.str("");
      num << o.value;
      out << s.subject_id << ",covariate," << o.day << ',' << o.name << ',' << num.str() << '\n';
    }
    for (const auto& ep : s.episodes) {
      out << s.subject_id << ",treat," << ep.start_day << ",," << ep.end_day << '\n';
    }
    if (s.failure_day) {
      out << s.subject_id << ",failure," << *s.failure_day << ",,\n";
    }
    if (s.censor_day) {
      out << s.subject_id << ",censor," << *s.censor_day << ',' << to_string(s.censor_cause)
          << ",\n";
    }
  }
}

void write_daily_csv_file(const std::vector<DailyEventStream>& streams,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_daily_csv(streams, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace longtmle
