#include "longtmle/regimes.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "longtmle/stats.hpp"

namespace longtmle {

std::string Regime::label() const {
  if (std::isinf(theta)) {
    return theta < 0 ? "always" : "never";
  }
  std::ostringstream os;
  os << 'd' << theta;
  return os.str();
}

Regime Regime::threshold(double theta, std::string biomarker) {
  Regime r;
  r.theta = theta;
  r.biomarker = std::move(biomarker);
  return r;
}

Regime Regime::always_treat(std::string biomarker) {
  Regime r;
  r.theta = -std::numeric_limits<double>::infinity();
  r.biomarker = std::move(biomarker);
  return r;
}

Regime Regime::never_treat(std::string biomarker) {
  Regime r;
  r.theta = std::numeric_limits<double>::infinity();
  r.biomarker = std::move(biomarker);
  return r;
}

RulePath rule_path(const LongDataset& data, const Subject& subject, const Regime& regime) {
  const std::size_t marker = data.covariate_index(regime.biomarker);
  const std::size_t n = subject.rows.size();

  RulePath path;
  path.a_rule.resize(n);
  path.follows.resize(n);

  bool triggered = false;
  bool adherent = true;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& row = subject.rows[k];
    const double value = row.covariates[marker];
    if (!triggered) {
      triggered = regime.threshold_inclusive ? value >= regime.theta : value > regime.theta;
    }
    path.a_rule[k] = triggered ? 1 : 0;
    if (row.a_treat != path.a_rule[k] || row.a_cens != CensorCause::none) {
      adherent = false;
    }
    path.follows[k] = adherent ? 1 : 0;
  }
  return path;
}

std::vector<RulePath> rule_paths(const LongDataset& data, const Regime& regime) {
  std::vector<RulePath> out;
  out.reserve(data.n_subjects());
  for (const auto& subject : data.subjects) {
    out.push_back(rule_path(data, subject, regime));
  }
  return out;
}

}  // namespace longtmle
