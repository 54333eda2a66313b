#pragma once

// Glottal source descriptors (F0, periodic and aperiodic energy) from a
// center-clipped, window-corrected normalized autocorrelation.

#include <span>
#include <vector>

namespace vtv {

struct SourceParams {
  double window_s = 0.040;
  double hop_s = 0.020;
  double f0_min = 50.0;
  double f0_max = 500.0;
  double voicing_threshold = 0.3;
  double clip_ratio = 0.3;  // center-clip level relative to the window peak
};

struct SourceFrame {
  double f0 = 0.0;  // Hz, 0 when unvoiced
  double periodic_energy = 0.0;
  double aperiodic_energy = 0.0;
  double time = 0.0;  // window center, seconds
};

struct Periodicity {
  double peak = 0.0;  // normalized autocorrelation at the chosen lag
  double lag = 0.0;   // samples, fractional
};

// Strongest periodicity in the F0 search band. peak = 0 when the window is
// silent or shorter than the smallest searchable lag.
Periodicity find_periodicity(std::span<const double> window, double fs,
                             const SourceParams& params = {});

double estimate_f0(std::span<const double> window, double fs,
                   const SourceParams& params = {});

struct SourceEnergies {
  double periodic = 0.0;
  double aperiodic = 0.0;
};

// Frame energy relative to a full-scale sinusoid (min(1, sqrt(2 mean x^2)))
// split by the clamped periodicity peak.
SourceEnergies estimate_energies(std::span<const double> window, double fs,
                                 const SourceParams& params = {});

// Frames every hop_s over the whole signal.
std::vector<SourceFrame> analyze_source(std::span<const double> signal, double fs,
                                        const SourceParams& params = {});

}  // namespace vtv
