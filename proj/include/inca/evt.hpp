#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace inca::evt {

struct EvtConfig {
  double q = 1e-3;             // tail probability of an extreme value
  double init_fraction = 0.5;  // leading share of the series used for calibration
  double eta_quantile = 0.98;  // empirical quantile used as the peak threshold
  std::size_t refit_every = 1; // refit the tail every k-th new peak
  std::size_t min_peaks = 10;  // fewer peaks fall back to an exponential tail

  void validate() const;
};

// Linear-interpolated empirical quantile (the usual "type 7" rule).
double empirical_quantile(std::span<const double> values, double prob);

// Peak threshold from the calibration segment. Throws TooShort below 20 points.
double estimate_eta(std::span<const double> init_segment, const EvtConfig& cfg);

struct GpdFit {
  double zeta = 0.0;   // shape
  double delta = 1.0;  // scale
  double log_likelihood = 0.0;
  bool degenerate = false;  // all excesses equal: exponential tail at the mean
};

// GPD log-likelihood of positive excesses; -inf outside the support.
double gpd_log_likelihood(std::span<const double> excesses, double zeta, double delta);

// Maximum-likelihood GPD fit via Grimshaw's one-dimensional reduction, with a
// profile grid over zeta in [-0.5, 1] as a safety net and a final local
// polish. Throws TooShort below 10 excesses.
GpdFit fit_gpd(std::span<const double> excesses);

struct EvtState {
  double eta = 0.0;
  double zeta = 0.0;
  double delta = 1.0;
  double boundary = std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  std::size_t n_eta = 0;
  std::vector<double> peaks;  // excesses over eta
  std::size_t peaks_since_fit = 0;
};

// rho = eta + delta / zeta * ((q n / N_eta)^-zeta - 1), exponential limit at
// zeta = 0. Throws InvalidCounts when n or N_eta is zero.
double compute_boundary(const EvtState& state, const EvtConfig& cfg);

// Calibrates eta, the tail fit and the boundary on the initial segment.
EvtState initialize(std::span<const double> init_segment, const EvtConfig& cfg);

struct Detection {
  std::vector<double> anomalies;
  std::vector<std::size_t> positions;  // index into the detection segment
  EvtState state;
};

// Streams the detection segment: values above the current boundary are
// anomalies, values between eta and the boundary become peaks and trigger a
// refit, everything else only advances the observation count.
Detection detect_stream(std::span<const double> detect_segment, EvtState state, const EvtConfig& cfg);

double sigmoid(double x);

// Half-open range of indices used for detection.
struct SegmentRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Individual causal score of a standardized series: mean sigmoid of the
// anomalies found on both tails, 0 if there are none. The calibration segment
// is the leading init_fraction (cut short at the detection start); detection
// runs on `detect` or, if absent, on the remainder of the series.
double individual_score(std::span<const double> series, const EvtConfig& cfg,
                        std::optional<SegmentRange> detect = std::nullopt);

}  // namespace inca::evt
