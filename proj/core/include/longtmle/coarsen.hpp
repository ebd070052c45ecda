#pragma once

// Coarsening of daily event streams into fixed-width follow-up intervals.
// Day d relative to entry lands in interval floor(d / unit). Covariates are
// carried forward from the last observation on or before an interval's first
// day, so the value feeding interval k is known before that interval's
// treatment decision.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "longtmle/data_model.hpp"

namespace longtmle {

struct CovariateObservation {
  int day = 0;
  std::string name;
  double value = 0.0;
};

// Days on treatment, inclusive on both ends.
struct TreatmentEpisode {
  int start_day = 0;
  int end_day = 0;
};

struct DailyEventStream {
  std::string subject_id;
  int entry_day = 0;
  int end_day = 0;  // last day of available data
  std::vector<CovariateObservation> covariates;
  std::vector<TreatmentEpisode> episodes;
  std::optional<int> failure_day;
  std::optional<int> censor_day;
  CensorCause censor_cause = CensorCause::none;
};

enum class ExposureRule {
  any_day,    // treated in the bin if exposed on any of its days
  first_day,  // exposure status on the bin's first day
  majority,   // exposed on more than half of the bin's nominal days
};

std::string to_string(ExposureRule rule);
ExposureRule exposure_rule_from_string(const std::string& text);

struct CoarsenConfig {
  int time_unit_days = 90;
  int max_intervals = 8;
  ExposureRule exposure = ExposureRule::any_day;
};

// Interval rows for one stream. covariate_names fixes the column layout; an
// imputation indicator column (name + "_imp") is emitted for each covariate,
// 1 when the value was carried forward or never observed. Ends with admin
// censoring at the interval holding end_day (or at the max_intervals cut)
// unless failure or explicit censoring comes first; within one interval the
// earlier day wins and failure beats censoring on ties.
std::vector<PersonTimeRow> coarsen_stream(const DailyEventStream& stream,
                                          const CoarsenConfig& config,
                                          const std::vector<std::string>& covariate_names);

// Coarsens a collection into one dataset. Covariate column order is first
// appearance across streams; indicator columns follow the value columns.
LongDataset coarsen_dataset(const std::vector<DailyEventStream>& streams,
                            const CoarsenConfig& config);

// CSV exchange format for daily streams. Columns: subject_id,record,day,name,
// value. Record types: entry (day), end (day), covariate (day,name,value),
// treat (day = first day on treatment, value = last day, empty for ongoing),
// failure (day), censor (day, name = disenroll|death).
std::vector<DailyEventStream> read_daily_csv(std::istream& in);
std::vector<DailyEventStream> read_daily_csv_file(const std::string& path);
void write_daily_csv(const std::vector<DailyEventStream>& streams, std::ostream& out);
void write_daily_csv_file(const std::vector<DailyEventStream>& streams,
                          const std::string& path);

}  // namespace longtmle
