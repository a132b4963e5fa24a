#pragma once
#include <cstdint>
#include <string>
#include <vector>

// HBT photon-stream simulation and g2(tau) estimation / fitting with
// background correction.
namespace fibsim {

struct PhotonStream {
  std::vector<double> timestamps_s;  // sorted ascending, within [0, duration]
  char channel = 'A';
  double duration_s = 0;
};

struct HbtStreams {
  PhotonStream a, b;
};

struct HbtSettings {
  int n_emitters = 1;
  double emission_rate_cps = 2e5;  // detected rate per emitter
  double lifetime_ns = 5.0;        // excited-state lifetime
  double background_rate_cps = 0;  // Poissonian, split 50/50 like the signal
  double duration_s = 1.0;
  double jitter_ps = 100;          // Gaussian detector jitter
};

// Each emitter: renewal process with interval = Exp(pump) + Exp(lifetime),
// pump solved from 1/rate = 1/pump + lifetime; photons routed 50/50.
// All rates zero -> error; rate must stay below 1/lifetime.
HbtStreams simulate_stream(const HbtSettings& settings, uint64_t seed);

enum class CorrelationMode { full, start_stop };

struct G2Histogram {
  std::vector<double> tau_ns;   // bin centers, symmetric about 0
  std::vector<uint64_t> counts;
  std::vector<double> g2;       // counts / baseline
  std::vector<double> sigma;    // sqrt(counts) / baseline
  double baseline = 0;          // N_A * N_B * bin / duration per bin
  double bin_ns = 0;
};

// Full cross-correlation (two-pointer) by default; start-stop (first B after
// each A) available for fidelity to simple TCSPC hardware.
G2Histogram g2_histogram(const PhotonStream& a, const PhotonStream& b,
                         double bin_ns, double window_ns,
                         CorrelationMode mode = CorrelationMode::full);

struct G2Fit {
  double g2_zero = 0;            // clamped at 0
  double antibunching_time_ns = 0;
  double signal_fraction = 1;    // rho, set by the caller when known
  double g2_zero_corrected = 0;
  bool corrected_clamped = false;
  double sse = 0;                // fit residual
};

// Least squares of g2(tau) = 1 - (1 - g2_zero) exp(-|tau|/tau0): closed-form
// amplitude at fixed tau0, golden-section search over tau0.
G2Fit fit_g2(const G2Histogram& hist);

struct CorrectedG2 {
  double value = 0;
  bool clamped = false;  // raw value slightly negative from noise
};

// corrected = (g2_zero - (1 - rho^2)) / rho^2, clamped at 0.
CorrectedG2 background_correct(double g2_zero, double rho);

// CSV round-trip: "channel,t_seconds" rows (both channels in one file).
std::string streams_csv(const HbtStreams& s);
HbtStreams parse_streams_csv(const std::string& text);

std::string histogram_csv(const G2Histogram& h);  // tau_ns,g2,sigma

}  // namespace fibsim
