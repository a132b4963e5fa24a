#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "fibsim/photonstats.hpp"

using namespace fibsim;

namespace {

template <typename Fn>
void expect_throw_with(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL_CHECK("expected exception containing '" << needle << "'");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

uint64_t total(const G2Histogram& h) {
  return std::accumulate(h.counts.begin(), h.counts.end(), uint64_t{0});
}

}  // namespace

TEST_SUITE("photonstats") {

TEST_CASE("histogram bins a crafted coincidence set") {
  PhotonStream a, b;
  a.channel = 'A';
  b.channel = 'B';
  a.timestamps_s = {1e-6};
  b.timestamps_s = {1e-6 - 4.4e-9, 1e-6 + 1.0e-9, 1e-6 + 3.2e-9};
  a.duration_s = b.duration_s = 1e-3;

  G2Histogram h = g2_histogram(a, b, 1.0, 5.5);
  REQUIRE(h.tau_ns.size() == 11);  // half = floor(5.5) -> bins -5..+5
  CHECK(h.tau_ns.front() == -5.0);
  CHECK(h.tau_ns.back() == 5.0);
  CHECK(h.tau_ns[5] == 0.0);

  // delays +1.0, +3.2 (rounds to +3), -4.4 (rounds to -4) ns
  std::vector<uint64_t> want(11, 0);
  want[6] = 1;
  want[8] = 1;
  want[1] = 1;
  CHECK(h.counts == want);
  CHECK(h.baseline == doctest::Approx(3e-6).epsilon(1e-12));  // 1*3*1ns/1ms
  CHECK(h.g2[6] == doctest::Approx(1.0 / 3e-6).epsilon(1e-12));
  CHECK(h.sigma[6] == doctest::Approx(1.0 / 3e-6).epsilon(1e-12));
  CHECK(h.g2[0] == 0.0);
}

TEST_CASE("full correlation counts all pairs, start-stop only the first") {
  PhotonStream a, b;
  a.timestamps_s = {1e-6};
  b.timestamps_s = {1e-6 + 1e-9, 1e-6 + 2e-9};
  a.duration_s = b.duration_s = 1e-3;
  auto full = g2_histogram(a, b, 1.0, 5.5, CorrelationMode::full);
  auto ss = g2_histogram(a, b, 1.0, 5.5, CorrelationMode::start_stop);
  CHECK(total(full) == 2);
  CHECK(total(ss) == 1);
  CHECK(ss.counts[6] == 1);  // +1 ns survives, +2 ns is shadowed
}

TEST_CASE("histogram input validation") {
  PhotonStream a, b;
  a.timestamps_s = {0.1};
  b.timestamps_s = {0.2};
  a.duration_s = b.duration_s = 1.0;
  CHECK_THROWS_AS(g2_histogram(a, b, 0.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(g2_histogram(a, b, 2.0, 2.0), std::invalid_argument);
  PhotonStream empty;
  empty.duration_s = 1.0;
  CHECK_THROWS_AS(g2_histogram(a, empty, 1.0, 10.0), std::invalid_argument);
  PhotonStream z = a;
  z.duration_s = 0.0;
  PhotonStream z2 = b;
  z2.duration_s = 0.0;
  CHECK_THROWS_AS(g2_histogram(z, z2, 1.0, 10.0), std::invalid_argument);
}

TEST_CASE("simulated stream has the right rate and ordering") {
  HbtSettings st;
  st.n_emitters = 1;
  st.emission_rate_cps = 50000;
  st.lifetime_ns = 5.0;
  st.background_rate_cps = 0;
  st.duration_s = 0.2;
  st.jitter_ps = 100;
  HbtStreams s = simulate_stream(st, 99);

  auto n_a = s.a.timestamps_s.size(), n_b = s.b.timestamps_s.size();
  double n = static_cast<double>(n_a + n_b);
  CHECK(std::fabs(n - 10000.0) < 400.0);  // 4 sigma for a renewal process
  CHECK(std::fabs(static_cast<double>(n_a) - static_cast<double>(n_b)) < 400.0);
  CHECK(std::is_sorted(s.a.timestamps_s.begin(), s.a.timestamps_s.end()));
  for (double t : s.a.timestamps_s) {
    CHECK(t >= 0.0);
    CHECK(t <= st.duration_s);
  }

  // deterministic per seed; jitter perturbs the draw sequence
  HbtStreams s2 = simulate_stream(st, 99);
  CHECK(s.a.timestamps_s == s2.a.timestamps_s);
  CHECK(s.b.timestamps_s == s2.b.timestamps_s);
  HbtStreams s3 = simulate_stream(st, 100);
  CHECK(s.a.timestamps_s != s3.a.timestamps_s);
  auto st0 = st;
  st0.jitter_ps = 0;
  HbtStreams s4 = simulate_stream(st0, 99);
  CHECK(s.a.timestamps_s != s4.a.timestamps_s);
}

TEST_CASE("stream simulation validation") {
  HbtSettings st;
  st.lifetime_ns = 5.0;
  st.emission_rate_cps = 2.5e8;  // above 1 / lifetime = 2e8
  CHECK_THROWS_AS(simulate_stream(st, 1), std::invalid_argument);
  st = HbtSettings{};
  st.duration_s = 0;
  CHECK_THROWS_AS(simulate_stream(st, 1), std::invalid_argument);
  st = HbtSettings{};
  st.emission_rate_cps = -1;
  CHECK_THROWS_AS(simulate_stream(st, 1), std::invalid_argument);
  st = HbtSettings{};
  st.n_emitters = 0;
  st.background_rate_cps = 0;
  CHECK_THROWS_AS(simulate_stream(st, 1), std::invalid_argument);

  // background-only operation is legitimate (alignment mode)
  st = HbtSettings{};
  st.n_emitters = 0;
  st.background_rate_cps = 20000;
  st.duration_s = 0.1;
  HbtStreams s = simulate_stream(st, 3);
  double n = static_cast<double>(s.a.timestamps_s.size() + s.b.timestamps_s.size());
  CHECK(std::fabs(n - 2000.0) < 4.0 * std::sqrt(2000.0));
}

TEST_CASE("fit recovers a synthetic antibunching dip") {
  G2Histogram h;
  h.bin_ns = 1.0;
  for (int k = -30; k <= 30; ++k) {
    double tau = static_cast<double>(k);
    h.tau_ns.push_back(tau);
    h.g2.push_back(1.0 - 0.7 * std::exp(-std::fabs(tau) / 8.0));
    h.counts.push_back(100);
    h.sigma.push_back(0.1);
  }
  G2Fit fit = fit_g2(h);
  CHECK(fit.g2_zero == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(fit.antibunching_time_ns == doctest::Approx(8.0).epsilon(1e-4));
  CHECK(fit.sse < 1e-8);
  CHECK(fit.g2_zero_corrected == fit.g2_zero);
  CHECK(fit.signal_fraction == 1.0);

  G2Histogram tiny;
  tiny.bin_ns = 1.0;
  for (int k = -4; k <= 4; ++k) {
    tiny.tau_ns.push_back(k);
    tiny.g2.push_back(1.0);
  }
  CHECK_THROWS_AS(fit_g2(tiny), std::invalid_argument);
}

TEST_CASE("single emitter antibunches, fit finds the dip") {
  HbtSettings st;
  st.n_emitters = 1;
  st.emission_rate_cps = 2e5;
  st.lifetime_ns = 5.0;
  st.duration_s = 2.0;
  st.jitter_ps = 0;
  HbtStreams s = simulate_stream(st, 2024);
  G2Histogram h = g2_histogram(s.a, s.b, 1.0, 50.0);

  CHECK(h.g2[50] < 0.3);  // tau = 0
  double wing = 0;
  int nw = 0;
  for (size_t i = 0; i < h.tau_ns.size(); ++i)
    if (std::fabs(h.tau_ns[i]) > 30.0) wing += h.g2[i], ++nw;
  CHECK(std::fabs(wing / nw - 1.0) < 0.15);

  G2Fit fit = fit_g2(h);
  CHECK(fit.g2_zero < 0.15);
  CHECK(fit.antibunching_time_ns > 2.0);
  CHECK(fit.antibunching_time_ns < 12.0);
}

TEST_CASE("background correction") {
  auto c = background_correct(0.7, 0.5477225575051661);  // rho^2 = 0.3
  CHECK(c.value < 1e-12);
  c = background_correct(0.5, 1.0);
  CHECK(c.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(c.clamped);
  c = background_correct(0.1, 0.5);  // raw (0.1 - 0.75) / 0.25 < 0
  CHECK(c.value == 0.0);
  CHECK(c.clamped);
  CHECK_THROWS_AS(background_correct(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(background_correct(0.5, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(background_correct(0.5, -0.3), std::invalid_argument);
}

TEST_CASE("stream csv round trip") {
  HbtStreams s;
  s.a.channel = 'A';
  s.b.channel = 'B';
  s.a.timestamps_s = {0.00025, 0.5};
  s.b.timestamps_s = {0.1};
  s.a.duration_s = s.b.duration_s = 0.5;

  auto csv = streams_csv(s);
  CHECK(csv.rfind("channel,t_seconds\n", 0) == 0);
  HbtStreams r = parse_streams_csv(csv);
  REQUIRE(r.a.timestamps_s.size() == 2);
  REQUIRE(r.b.timestamps_s.size() == 1);
  CHECK(r.a.timestamps_s[0] == doctest::Approx(0.00025).epsilon(1e-11));
  CHECK(r.a.timestamps_s[1] == doctest::Approx(0.5).epsilon(1e-11));
  CHECK(r.b.timestamps_s[0] == doctest::Approx(0.1).epsilon(1e-11));
  CHECK(r.a.duration_s == doctest::Approx(0.5).epsilon(1e-11));
}

TEST_CASE("stream parsing names the offending line") {
  expect_throw_with([] { parse_streams_csv("bad header\nA,1\n"); }, "line 1");
  expect_throw_with([] { parse_streams_csv("channel,t_seconds\nX,0.5\n"); },
                    "line 2");
  expect_throw_with([] { parse_streams_csv("channel,t_seconds\nA,0.5\nA,0.25\n"); },
                    "not sorted");
  expect_throw_with([] { parse_streams_csv("channel,t_seconds\nA,xyz\n"); },
                    "bad timestamp");
  expect_throw_with([] { parse_streams_csv("channel,t_seconds\nA,-1\n"); },
                    "bad timestamp");
  expect_throw_with([] { parse_streams_csv("channel,t_seconds\nA\n"); },
                    "line 2");
}

TEST_CASE("histogram csv shape") {
  PhotonStream a, b;
  a.timestamps_s = {1e-6};
  b.timestamps_s = {2e-6};
  a.duration_s = b.duration_s = 1e-3;
  auto h = g2_histogram(a, b, 1.0, 10.0);
  auto csv = histogram_csv(h);
  CHECK(csv.rfind("tau_ns,g2,sigma\n", 0) == 0);
  size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == h.tau_ns.size() + 1);
}

}  // TEST_SUITE
