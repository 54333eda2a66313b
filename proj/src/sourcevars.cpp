#include "vtv/sourcevars.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vtv/error.hpp"
#include "vtv/simd/kernels.hpp"

namespace vtv {

namespace {

void require_nonempty(std::span<const double> window) {
  if (window.empty()) throw Error(ErrorKind::EmptyInput, "empty audio window");
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  }
  return w;
}

double autocorr(const std::vector<double>& y, std::size_t lag) {
  if (lag >= y.size()) return 0.0;
  return simd::active().dot(y.data(), y.data() + lag, y.size() - lag);
}

}  // namespace

Periodicity find_periodicity(std::span<const double> window, double fs,
                             const SourceParams& params) {
  require_nonempty(window);
  const std::size_t n = window.size();

  double peak_abs = 0.0;
  for (double v : window) peak_abs = std::max(peak_abs, std::abs(v));
  if (peak_abs == 0.0) return {};

  const double clip = params.clip_ratio * peak_abs;
  const std::vector<double> w = hann(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = window[i];
    const double c = v > clip ? v - clip : (v < -clip ? v + clip : 0.0);
    y[i] = c * w[i];
  }
  const double r0 = autocorr(y, 0);
  if (r0 <= 0.0) return {};
  const double rw0 = autocorr(w, 0);

  const auto min_lag = static_cast<std::size_t>(std::floor(fs / params.f0_max));
  const auto max_lag = std::min(static_cast<std::size_t>(std::ceil(fs / params.f0_min)),
                                n / 2);
  if (min_lag < 1 || max_lag <= min_lag + 1) return {};

  // Dividing by the window's own autocorrelation undoes the taper's decay.
  std::vector<double> rn(max_lag + 2, 0.0);
  for (std::size_t lag = min_lag - 1; lag <= max_lag + 1 && lag < n; ++lag) {
    const double rw = autocorr(w, lag) / rw0;
    rn[lag] = rw > 0.0 ? (autocorr(y, lag) / r0) / rw : 0.0;
  }

  struct Candidate {
    double lag, value;
  };
  std::vector<Candidate> maxima;
  double global = 0.0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    const double a = rn[lag - 1], b = rn[lag], c = rn[lag + 1];
    if (b <= 0.0 || b < a || b < c) continue;
    const double denom = a - 2.0 * b + c;
    double offset = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const double value = b - 0.25 * (a - c) * offset;
    maxima.push_back({static_cast<double>(lag) + offset, value});
    global = std::max(global, value);
  }
  if (maxima.empty()) return {};
  // First peak close to the strongest one; avoids picking a multiple of the period.
  for (const Candidate& m : maxima) {
    if (m.value >= 0.9 * global) return {m.value, m.lag};
  }
  return {};
}

double estimate_f0(std::span<const double> window, double fs,
                   const SourceParams& params) {
  const Periodicity p = find_periodicity(window, fs, params);
  if (p.peak <= params.voicing_threshold || p.lag <= 0.0) return 0.0;
  const double f0 = fs / p.lag;
  if (f0 < params.f0_min || f0 > params.f0_max) return 0.0;
  return f0;
}

SourceEnergies estimate_energies(std::span<const double> window, double fs,
                                 const SourceParams& params) {
  require_nonempty(window);
  const double ms = simd::active().dot(window.data(), window.data(), window.size()) /
                    static_cast<double>(window.size());
  const double total = std::min(1.0, std::sqrt(2.0 * ms));
  if (total == 0.0) return {};
  const double p = std::clamp(find_periodicity(window, fs, params).peak, 0.0, 1.0);
  return {total * p, total * (1.0 - p)};
}

std::vector<SourceFrame> analyze_source(std::span<const double> signal, double fs,
                                        const SourceParams& params) {
  require_nonempty(signal);
  const auto win = static_cast<std::size_t>(std::llround(params.window_s * fs));
  const auto hop = static_cast<std::size_t>(std::llround(params.hop_s * fs));
  std::vector<SourceFrame> frames;
  if (win == 0 || hop == 0) return frames;
  std::vector<double> buf(win);
  for (std::size_t start = 0; start + win / 2 < signal.size() || start == 0;
       start += hop) {
    for (std::size_t i = 0; i < win; ++i) {
      buf[i] = start + i < signal.size() ? signal[start + i] : 0.0;
    }
    SourceFrame f;
    f.time = (static_cast<double>(start) + 0.5 * static_cast<double>(win)) / fs;
    f.f0 = estimate_f0(buf, fs, params);
    const SourceEnergies e = estimate_energies(buf, fs, params);
    f.periodic_energy = e.periodic;
    f.aperiodic_energy = e.aperiodic;
    frames.push_back(f);
    if (start + win >= signal.size()) break;
  }
  return frames;
}

}  // namespace vtv
