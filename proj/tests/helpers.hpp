#pragma once

// Hand-built fixtures shared across test files.

#include <optional>
#include <string>
#include <vector>

#include "longtmle/data_model.hpp"

namespace longtmle::testing {

// One subject from compact per-interval tuples.
struct RowSpec {
  std::vector<double> covariates;
  int a_treat = 0;
  CensorCause cens = CensorCause::none;
  int y = 0;  // ignored when censored
};

inline Subject make_subject(const std::string& id, const std::vector<RowSpec>& rows) {
  Subject s;
  s.id = id;
  int t = 0;
  for (const auto& r : rows) {
    PersonTimeRow row;
    row.t = t++;
    row.covariates = r.covariates;
    row.a_treat = r.a_treat;
    row.a_cens = r.cens;
    if (r.cens == CensorCause::none) row.y = r.y;
    s.rows.push_back(std::move(row));
  }
  return s;
}

inline LongDataset make_dataset(std::vector<std::string> covariate_names,
                                std::vector<Subject> subjects) {
  LongDataset d;
  d.covariate_names = std::move(covariate_names);
  d.subjects = std::move(subjects);
  return d;
}

}  // namespace longtmle::testing
