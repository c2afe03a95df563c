#include "inca/evt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "inca/core/error.hpp"

namespace inca::evt {

void EvtConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::InvalidArgument, "q must lie in (0, 1)");
  if (!(init_fraction > 0.0 && init_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "init_fraction must lie in (0, 1)");
  if (!(eta_quantile > 0.0 && eta_quantile < 1.0))
    fail(ErrorCode::InvalidArgument, "eta_quantile must lie in (0, 1)");
  if (refit_every < 1) fail(ErrorCode::InvalidArgument, "refit_every must be >= 1");
}

double empirical_quantile(std::span<const double> values, double prob) {
  if (values.empty()) fail(ErrorCode::TooShort, "quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double estimate_eta(std::span<const double> init_segment, const EvtConfig& cfg) {
  if (init_segment.size() < 20)
    fail(ErrorCode::TooShort, "calibration segment needs >= 20 points, got " +
                                  std::to_string(init_segment.size()));
  return empirical_quantile(init_segment, cfg.eta_quantile);
}

double gpd_log_likelihood(std::span<const double> y, double zeta, double delta) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (!(delta > 0.0) || !std::isfinite(zeta)) return neg_inf;
  const double n = static_cast<double>(y.size());
  if (std::abs(zeta) < 1e-12) {
    double s = 0.0;
    for (double v : y) s += v;
    return -n * std::log(delta) - s / delta;
  }
  double s = 0.0;
  for (double v : y) {
    const double z = zeta * v / delta;
    if (!(z > -1.0)) return neg_inf;
    s += std::log1p(z);
  }
  return -n * std::log(delta) - (1.0 + 1.0 / zeta) * s;
}

namespace {

// Grimshaw's reduction: with x = zeta / delta, stationary points of the
// likelihood are roots of w(x) = u(x) v(x) - 1.
double grimshaw_w(std::span<const double> y, double x) {
  double u = 0.0, v = 0.0;
  for (double yi : y) {
    const double s = 1.0 + x * yi;
    u += 1.0 / s;
    v += std::log(s);
  }
  const double n = static_cast<double>(y.size());
  return (u / n) * (1.0 + v / n) - 1.0;
}

std::vector<double> roots_on(std::span<const double> y, double a, double b, int points) {
  std::vector<double> roots;
  if (!(b > a)) return roots;
  double x_prev = a;
  double w_prev = grimshaw_w(y, a);
  for (int k = 1; k <= points; ++k) {
    const double x = a + (b - a) * static_cast<double>(k) / points;
    const double w = grimshaw_w(y, x);
    if (std::isfinite(w_prev) && std::isfinite(w) && (w_prev == 0.0 || w_prev * w < 0.0)) {
      double lo = x_prev, hi = x, flo = w_prev;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = grimshaw_w(y, mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x_prev = x;
    w_prev = w;
  }
  return roots;
}

// Profile likelihood over delta for fixed zeta by golden-section on log delta.
GpdFit profile_delta(std::span<const double> y, double zeta, double ymax, double mean) {
  double lo = std::log(std::max(1e-12 * mean, zeta < 0.0 ? -zeta * ymax * (1.0 + 1e-9) : 1e-12 * mean));
  double hi = std::log(100.0 * std::max(ymax, mean));
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  auto ll = [&](double ld) { return gpd_log_likelihood(y, zeta, std::exp(ld)); };
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  double fc = ll(c), fd = ll(d);
  for (int it = 0; it < 120; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = ll(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = ll(d);
    }
  }
  const double ld = 0.5 * (lo + hi);
  return {zeta, std::exp(ld), ll(ld), false};
}

// Nelder-Mead on (zeta, log delta).
GpdFit polish(std::span<const double> y, GpdFit start) {
  auto f = [&](const std::array<double, 2>& v) { return -gpd_log_likelihood(y, v[0], std::exp(v[1])); };
  std::array<std::array<double, 2>, 3> s{{{start.zeta, std::log(start.delta)},
                                          {start.zeta + 0.02, std::log(start.delta)},
                                          {start.zeta, std::log(start.delta) + 0.02}}};
  std::array<double, 3> fs{f(s[0]), f(s[1]), f(s[2])};
  for (int it = 0; it < 2000; ++it) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    const int best = idx[0], mid = idx[1], worst = idx[2];
    if (std::abs(fs[worst] - fs[best]) <= 1e-13 * (std::abs(fs[best]) + 1e-300) &&
        std::abs(s[worst][0] - s[best][0]) + std::abs(s[worst][1] - s[best][1]) < 1e-10)
      break;
    std::array<double, 2> cen{0.5 * (s[best][0] + s[mid][0]), 0.5 * (s[best][1] + s[mid][1])};
    auto along = [&](double t) {
      return std::array<double, 2>{cen[0] + t * (s[worst][0] - cen[0]), cen[1] + t * (s[worst][1] - cen[1])};
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fs[best]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[mid]) {
      s[worst] = xr;
      fs[worst] = fr;
    } else {
      const auto xc = along(fr < fs[worst] ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fs[worst])) {
        s[worst] = xc;
        fs[worst] = fc;
      } else {
        for (int k : {mid, worst}) {
          s[k] = {0.5 * (s[k][0] + s[best][0]), 0.5 * (s[k][1] + s[best][1])};
          fs[k] = f(s[k]);
        }
      }
    }
  }
  const int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  GpdFit out{s[best][0], std::exp(s[best][1]), -fs[best], false};
  return out.log_likelihood >= start.log_likelihood ? out : start;
}

}  // namespace

GpdFit fit_gpd(std::span<const double> y) {
  if (y.size() < 10) fail(ErrorCode::TooShort, "GPD fit needs >= 10 excesses, got " + std::to_string(y.size()));
  double ymin = y[0], ymax = y[0], mean = 0.0;
  for (double v : y) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "excesses must be positive and finite");
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  if (ymax - ymin <= 1e-12 * ymax) return {0.0, mean, gpd_log_likelihood(y, 0.0, mean), true};

  GpdFit best{0.0, mean, gpd_log_likelihood(y, 0.0, mean), false};
  auto consider = [&](const GpdFit& c) {
    if (c.zeta > -1.0 && c.delta > 0.0 && c.log_likelihood > best.log_likelihood) best = c;
  };

  const double eps = 1e-8 / ymax;
  const double a = -1.0 / ymax + eps;
  const double b = 2.0 * (mean - ymin) / (ymin * ymin);
  std::vector<double> roots = roots_on(y, a, -eps, 400);
  for (double r : roots_on(y, eps, std::max(b, 2.0 * eps), 400)) roots.push_back(r);
  for (double x : roots) {
    double zeta = 0.0;
    for (double v : y) zeta += std::log1p(x * v);
    zeta /= static_cast<double>(y.size());
    const double delta = zeta / x;
    consider({zeta, delta, gpd_log_likelihood(y, zeta, delta), false});
  }
  for (int k = 0; k <= 150; ++k) consider(profile_delta(y, -0.5 + 0.01 * k, ymax, mean));
  return polish(y, best);
}

double compute_boundary(const EvtState& state, const EvtConfig& cfg) {
  if (state.n == 0 || state.n_eta == 0)
    fail(ErrorCode::InvalidCounts, "boundary needs n > 0 and N_eta > 0");
  const double ratio = cfg.q * static_cast<double>(state.n) / static_cast<double>(state.n_eta);
  if (!(ratio > 0.0)) fail(ErrorCode::InvalidCounts, "q n / N_eta must be positive");
  const double log_r = std::log(ratio);
  if (state.zeta == 0.0) return state.eta - state.delta * log_r;
  // (r^-zeta - 1) / zeta, evaluated without cancellation for small zeta.
  return state.eta + state.delta * std::expm1(-state.zeta * log_r) / state.zeta;
}

namespace {

void refit(EvtState& state, const EvtConfig& cfg) {
  if (state.peaks.empty()) {
    state.zeta = 0.0;
    state.delta = 1.0;
    state.boundary = std::numeric_limits<double>::infinity();
    return;
  }
  if (state.peaks.size() >= cfg.min_peaks) {
    const GpdFit fit = fit_gpd(state.peaks);
    state.zeta = fit.zeta;
    state.delta = fit.delta;
  } else {
    double mean = 0.0;
    for (double v : state.peaks) mean += v;
    state.zeta = 0.0;
    state.delta = mean / static_cast<double>(state.peaks.size());
  }
  state.boundary = compute_boundary(state, cfg);
  state.peaks_since_fit = 0;
}

}  // namespace

EvtState initialize(std::span<const double> init_segment, const EvtConfig& cfg) {
  cfg.validate();
  EvtState state;
  state.eta = estimate_eta(init_segment, cfg);
  state.n = init_segment.size();
  for (double v : init_segment)
    if (v > state.eta) state.peaks.push_back(v - state.eta);
  state.n_eta = state.peaks.size();
  refit(state, cfg);
  return state;
}

Detection detect_stream(std::span<const double> segment, EvtState state, const EvtConfig& cfg) {
  cfg.validate();
  Detection out;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const double v = segment[i];
    ++state.n;
    if (v > state.boundary) {
      out.anomalies.push_back(v);
      out.positions.push_back(i);
    } else if (v > state.eta) {
      state.peaks.push_back(v - state.eta);
      ++state.n_eta;
      if (++state.peaks_since_fit >= cfg.refit_every) {
        refit(state, cfg);
      } else {
        state.boundary = compute_boundary(state, cfg);
      }
    }
  }
  out.state = std::move(state);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double individual_score(std::span<const double> series, const EvtConfig& cfg,
                        std::optional<SegmentRange> detect) {
  cfg.validate();
  const std::size_t n = series.size();
  std::size_t init_end = static_cast<std::size_t>(std::floor(cfg.init_fraction * static_cast<double>(n)));
  SegmentRange range{init_end, n};
  if (detect) {
    range = *detect;
    range.end = std::min(range.end, n);
    range.begin = std::min(range.begin, range.end);
    init_end = std::min(init_end, range.begin);
  }
  const auto init = series.first(init_end);
  const auto det = series.subspan(range.begin, range.end - range.begin);

  std::vector<double> pooled;
  for (double sign : {1.0, -1.0}) {
    std::vector<double> calib(init.begin(), init.end());
    std::vector<double> stream(det.begin(), det.end());
    if (sign < 0.0) {
      for (double& v : calib) v = -v;
      for (double& v : stream) v = -v;
    }
    const Detection d = detect_stream(stream, initialize(calib, cfg), cfg);
    // Anomalies on the negated series are deviations below the lower bound;
    // both tails are pooled by absolute deviation.
    for (double a : d.anomalies) pooled.push_back(std::abs(a));
  }
  if (pooled.empty()) return 0.0;
  double s = 0.0;
  for (double a : pooled) s += sigmoid(a);
  return s / static_cast<double>(pooled.size());
}

}  // namespace inca::evt
