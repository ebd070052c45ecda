#pragma once

// Small numeric helpers shared across the estimation code: bounded logistic
// transforms, weighted summaries, normal quantiles and seed derivation.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace longtmle {

// Base class for faults raised by the library. Subclasses distinguish
// recoverable configuration mistakes from estimation-time aborts.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Raised when an estimand is not identified in the data at hand, e.g. no
// at-risk rule-followers remain at some time point.
class PositivityError : public Error {
 public:
  explicit PositivityError(const std::string& msg) : Error(msg) {}
};

// Default probability bound used when inverting fitted action probabilities.
inline constexpr double kDefaultPMin = 1e-6;

// Default bound applied to iterated outcome predictions before taking logits.
inline constexpr double kDefaultQMin = 1e-5;

double expit(double x);

// logit of p after clamping p into [bound, 1 - bound].
double logit(double p, double bound = 1e-12);

double clamp_prob(double p, double bound);

// Weighted mean; returns fallback when total weight is zero.
double weighted_mean(std::span<const double> x, std::span<const double> w,
                     double fallback = 0.0);

double mean(std::span<const double> x);

// Sample variance with the 1/(n-1) convention; zero for n < 2.
double sample_variance(std::span<const double> x);

// Empirical quantile with linear interpolation (type 7). p in [0, 1].
double quantile(std::vector<double> x, double p);

// Standard normal quantile. Rational approximation polished with one
// Halley step against erfc, good to ~1e-15 over (0, 1).
double normal_quantile(double p);

// splitmix64 step; used to derive independent seed streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministically mixes a base seed with a stream index so per-subject
// draws do not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// FNV-1a over a byte string; used for config fingerprints in run manifests.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace longtmle
