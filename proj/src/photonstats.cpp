#include "fibsim/photonstats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fibsim/io.hpp"
#include "fibsim/rng.hpp"

namespace fibsim {

namespace {

// one renewal emitter (or Poisson background when lifetime == 0), routed 50/50
void emit_photons(double rate_cps, double lifetime_s, double jitter_s,
                  double duration_s, Rng& rng, std::vector<double>& a,
                  std::vector<double>& b) {
  if (rate_cps <= 0) return;
  double pump_mean;  // mean re-excitation delay
  if (lifetime_s > 0) {
    double mean_interval = 1.0 / rate_cps;
    if (mean_interval <= lifetime_s)
      throw std::invalid_argument("simulate_stream: rate exceeds 1/lifetime");
    pump_mean = mean_interval - lifetime_s;
  } else {
    pump_mean = 1.0 / rate_cps;
  }
  double t = 0;
  while (true) {
    t += rng.exponential(pump_mean);
    if (lifetime_s > 0) t += rng.exponential(lifetime_s);
    if (t >= duration_s) break;
    double stamp = t + (jitter_s > 0 ? rng.normal() * jitter_s : 0.0);
    if (stamp < 0 || stamp > duration_s) continue;
    (rng.uniform() < 0.5 ? a : b).push_back(stamp);
  }
}

}  // namespace

HbtStreams simulate_stream(const HbtSettings& st, uint64_t seed) {
  if (st.duration_s <= 0)
    throw std::invalid_argument("simulate_stream: duration must be > 0");
  if (st.n_emitters < 0 || st.emission_rate_cps < 0 || st.background_rate_cps < 0)
    throw std::invalid_argument("simulate_stream: negative rate");
  bool any = (st.n_emitters > 0 && st.emission_rate_cps > 0) ||
             st.background_rate_cps > 0;
  if (!any) throw std::invalid_argument("simulate_stream: all rates zero");

  HbtStreams out;
  out.a.channel = 'A';
  out.b.channel = 'B';
  out.a.duration_s = out.b.duration_s = st.duration_s;
  double jitter_s = st.jitter_ps * 1e-12;
  double lifetime_s = st.lifetime_ns * 1e-9;
  for (int e = 0; e < st.n_emitters; ++e) {
    Rng rng(seed, static_cast<uint64_t>(e));
    emit_photons(st.emission_rate_cps, lifetime_s, jitter_s, st.duration_s, rng,
                 out.a.timestamps_s, out.b.timestamps_s);
  }
  if (st.background_rate_cps > 0) {
    Rng rng(seed, static_cast<uint64_t>(st.n_emitters));
    emit_photons(st.background_rate_cps, 0.0, jitter_s, st.duration_s, rng,
                 out.a.timestamps_s, out.b.timestamps_s);
  }
  std::sort(out.a.timestamps_s.begin(), out.a.timestamps_s.end());
  std::sort(out.b.timestamps_s.begin(), out.b.timestamps_s.end());
  return out;
}

G2Histogram g2_histogram(const PhotonStream& a, const PhotonStream& b,
                         double bin_ns, double window_ns, CorrelationMode mode) {
  if (bin_ns <= 0 || window_ns <= bin_ns)
    throw std::invalid_argument("g2_histogram: need bin > 0 and window > bin");
  if (a.timestamps_s.empty() || b.timestamps_s.empty())
    throw std::invalid_argument("g2_histogram: empty stream");
  double duration = std::max(a.duration_s, b.duration_s);
  if (duration <= 0) throw std::invalid_argument("g2_histogram: zero duration");

  int half = static_cast<int>(std::floor(window_ns / bin_ns));
  int nbins = 2 * half + 1;
  G2Histogram h;
  h.bin_ns = bin_ns;
  h.tau_ns.resize(nbins);
  h.counts.assign(nbins, 0);
  for (int k = 0; k < nbins; ++k) h.tau_ns[k] = (k - half) * bin_ns;
  double reach_s = (half + 0.5) * bin_ns * 1e-9;

  const auto& ta = a.timestamps_s;
  const auto& tb = b.timestamps_s;
  if (mode == CorrelationMode::full) {
    size_t lo = 0;
    for (double t : ta) {
      while (lo < tb.size() && tb[lo] < t - reach_s) ++lo;
      for (size_t j = lo; j < tb.size() && tb[j] < t + reach_s; ++j) {
        int k = half + static_cast<int>(std::lround((tb[j] - t) * 1e9 / bin_ns));
        if (k >= 0 && k < nbins) ++h.counts[k];
      }
    }
  } else {
    // start-stop: first B strictly after each A, and first A after each B for
    // the negative side
    size_t j = 0;
    for (double t : ta) {
      while (j < tb.size() && tb[j] <= t) ++j;
      if (j == tb.size()) break;
      double tau = (tb[j] - t) * 1e9;
      if (tau < reach_s * 1e9) {
        int k = half + static_cast<int>(std::lround(tau / bin_ns));
        if (k >= 0 && k < nbins) ++h.counts[k];
      }
    }
    size_t i = 0;
    for (double t : tb) {
      while (i < ta.size() && ta[i] <= t) ++i;
      if (i == ta.size()) break;
      double tau = (ta[i] - t) * 1e9;
      if (tau < reach_s * 1e9) {
        int k = half - static_cast<int>(std::lround(tau / bin_ns));
        if (k >= 0 && k < nbins) ++h.counts[k];
      }
    }
  }

  h.baseline = static_cast<double>(ta.size()) * static_cast<double>(tb.size()) *
               (bin_ns * 1e-9) / duration;
  if (h.baseline <= 0) throw std::runtime_error("g2_histogram: zero baseline");
  h.g2.resize(nbins);
  h.sigma.resize(nbins);
  for (int k = 0; k < nbins; ++k) {
    h.g2[k] = static_cast<double>(h.counts[k]) / h.baseline;
    h.sigma[k] = std::sqrt(static_cast<double>(h.counts[k])) / h.baseline;
  }
  return h;
}

namespace {

// sum of squared residuals of 1 - A exp(-|tau|/tau0) with the optimal A
double profile_sse(const G2Histogram& h, double tau0, double* amplitude) {
  double se = 0, sy = 0;
  for (size_t i = 0; i < h.tau_ns.size(); ++i) {
    double e = std::exp(-std::abs(h.tau_ns[i]) / tau0);
    se += e * e;
    sy += e * (1.0 - h.g2[i]);
  }
  double a = se > 0 ? sy / se : 0.0;
  double sse = 0;
  for (size_t i = 0; i < h.tau_ns.size(); ++i) {
    double e = std::exp(-std::abs(h.tau_ns[i]) / tau0);
    double r = h.g2[i] - (1.0 - a * e);
    sse += r * r;
  }
  if (amplitude) *amplitude = a;
  return sse;
}

}  // namespace

G2Fit fit_g2(const G2Histogram& h) {
  if (h.tau_ns.size() < 10)
    throw std::invalid_argument("fit_g2: need >= 10 bins spanning the dip");

  double lo = 0.5 * h.bin_ns;
  double hi = std::abs(h.tau_ns.back());
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = profile_sse(h, x1, nullptr), f2 = profile_sse(h, x2, nullptr);
  for (int it = 0; it < 120 && hi - lo > 1e-6 * hi; ++it) {
    if (f1 < f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = profile_sse(h, x1, nullptr);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = profile_sse(h, x2, nullptr);
    }
  }
  double tau0 = 0.5 * (lo + hi);
  double amplitude = 0;
  double sse = profile_sse(h, tau0, &amplitude);
  if (!std::isfinite(sse) || !std::isfinite(amplitude))
    throw std::runtime_error("fit_g2: fit diverged, residual " + std::to_string(sse));

  G2Fit fit;
  fit.antibunching_time_ns = tau0;
  fit.g2_zero = std::max(0.0, 1.0 - amplitude);
  fit.g2_zero_corrected = fit.g2_zero;
  fit.sse = sse;
  return fit;
}

CorrectedG2 background_correct(double g2_zero, double rho) {
  if (!(rho > 0) || rho > 1)
    throw std::invalid_argument("background_correct: rho outside (0, 1]");
  CorrectedG2 c;
  double raw = (g2_zero - (1.0 - rho * rho)) / (rho * rho);
  c.clamped = raw < 0;
  c.value = std::max(0.0, raw);
  return c;
}

std::string streams_csv(const HbtStreams& s) {
  std::ostringstream os;
  os << "channel,t_seconds\n";
  char buf[48];
  auto dump = [&](const PhotonStream& p) {
    for (double t : p.timestamps_s) {
      std::snprintf(buf, sizeof buf, "%c,%.12g\n", p.channel, t);
      os << buf;
    }
  };
  dump(s.a);
  dump(s.b);
  return os.str();
}

HbtStreams parse_streams_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&line_no](const std::string& why) {
    throw std::runtime_error("stream parse error, line " + std::to_string(line_no) +
                             ": " + why);
  };
  ++line_no;
  if (!std::getline(in, line) || line != "channel,t_seconds")
    fail("missing 'channel,t_seconds' header");
  HbtStreams s;
  s.a.channel = 'A';
  s.b.channel = 'B';
  double tmax = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() < 3 || line[1] != ',') fail("expected 'channel,t'");
    char ch = line[0];
    if (ch != 'A' && ch != 'B') fail("channel must be A or B");
    char* end = nullptr;
    double t = std::strtod(line.c_str() + 2, &end);
    if (end != line.c_str() + line.size() || !(t >= 0)) fail("bad timestamp");
    (ch == 'A' ? s.a : s.b).timestamps_s.push_back(t);
    tmax = std::max(tmax, t);
  }
  if (!std::is_sorted(s.a.timestamps_s.begin(), s.a.timestamps_s.end()) ||
      !std::is_sorted(s.b.timestamps_s.begin(), s.b.timestamps_s.end()))
    fail("timestamps not sorted per channel");
  s.a.duration_s = s.b.duration_s = tmax;
  return s;
}

std::string histogram_csv(const G2Histogram& h) {
  std::ostringstream os;
  os << "tau_ns,g2,sigma\n";
  for (size_t i = 0; i < h.tau_ns.size(); ++i)
    os << format_g6(h.tau_ns[i]) << ',' << format_g6(h.g2[i]) << ','
       << format_g6(h.sigma[i]) << "\n";
  return os.str();
}

}  // namespace fibsim
