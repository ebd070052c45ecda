#pragma once

// Long-format event data: one row per subject-interval carrying covariates,
// the treatment decision, the censoring indicator and the failure outcome.
// Rows exist only while the subject is at risk, so the storage footprint is
// one record per observed person-interval rather than per subject-by-time
// cell.

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace longtmle {

enum class CensorCause : std::uint8_t { none = 0, disenroll, death, admin };

std::string to_string(CensorCause cause);
CensorCause censor_cause_from_string(const std::string& text);

struct PersonTimeRow {
  int t = 0;
  std::vector<double> covariates;  // aligned with LongDataset::covariate_names
  int a_treat = 0;
  CensorCause a_cens = CensorCause::none;
  std::optional<int> y;  // present exactly when a_cens == none

  bool operator==(const PersonTimeRow&) const = default;
};

struct Subject {
  std::string id;
  std::vector<PersonTimeRow> rows;  // t = 0, 1, ..., last_t() in order

  // Last interval with a row; -1 for an empty subject.
  int last_t() const { return static_cast<int>(rows.size()) - 1; }

  bool operator==(const Subject&) const = default;
};

class LongDataset {
 public:
  std::vector<std::string> covariate_names;
  std::vector<Subject> subjects;

  std::size_t n_subjects() const { return subjects.size(); }
  std::size_t n_rows() const;
  int max_t() const;

  // Index of a covariate column; throws ConfigError for unknown names.
  std::size_t covariate_index(const std::string& name) const;

  bool operator==(const LongDataset&) const = default;
};

struct Violation {
  std::string subject_id;
  int t = 0;
  std::string message;
};

// Structural checks on a dataset: consecutive intervals from zero, outcome
// present exactly on uncensored rows, censoring and failure terminal, values
// in domain. Returns every violation found rather than stopping at the first.
std::vector<Violation> validate(const LongDataset& data);

// Covariate-history summary used as the regression design at interval k:
// chosen baseline columns (values at t = 0), chosen current columns (values
// at t = k) and optionally the previous interval's treatment. At k = 0 the
// current block repeats the baseline values and the treatment lag is zero,
// which keeps the summary dimension constant across k.
struct SummaryMap {
  std::vector<std::string> baseline;
  std::vector<std::string> current;
  bool lagged_treatment = true;

  // Baseline and current blocks over all covariates, plus the treatment lag.
  static SummaryMap default_map(const LongDataset& data);

  std::size_t dimension() const;
  std::vector<std::string> column_labels() const;
};

// A summary map with covariate names resolved to column indices, for cheap
// repeated row construction. Valid for any dataset sharing the covariate
// layout it was resolved against.
class ResolvedSummary {
 public:
  ResolvedSummary() = default;
  ResolvedSummary(const LongDataset& data, const SummaryMap& map);

  std::size_t dimension() const {
    return baseline_idx_.size() + current_idx_.size() + (lagged_treatment_ ? 1 : 0);
  }
  // Fills one design row for (subject, k). out must have dimension() slots.
  void fill(const Subject& subject, int k, double* out) const;

 private:
  std::vector<std::size_t> baseline_idx_;
  std::vector<std::size_t> current_idx_;
  bool lagged_treatment_ = false;
};

// Design rows at interval k for every subject still in the data at k.
struct SummaryBlock {
  Eigen::MatrixXd x;                        // n_k by map.dimension()
  std::vector<std::size_t> subject_index;   // row -> index into data.subjects
};

SummaryBlock build_summary(const LongDataset& data, const SummaryMap& map, int k);

// CSV exchange format. Columns: subject_id, t, one column per covariate,
// a_treat, a_cens, y. y is empty on censored rows. Rows for a subject must be
// contiguous and in time order.
LongDataset read_long_csv(std::istream& in);
LongDataset read_long_csv_file(const std::string& path);
void write_long_csv(const LongDataset& data, std::ostream& out);
void write_long_csv_file(const LongDataset& data, const std::string& path);

}  // namespace longtmle
