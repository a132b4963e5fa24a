#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "fibsim/config.hpp"
#include "fibsim/elements.hpp"
#include "fibsim/io.hpp"
#include "fibsim/patterning.hpp"
#include "fibsim/pipeline.hpp"
#include "fibsim/photonstats.hpp"
#include "fibsim/sample.hpp"
#include "fibsim/transport.hpp"
#include "json.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string default_out_dir() {
  if (const char* env = std::getenv("FIBSIM_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

std::string hex_hash(const std::string& text) {
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fibsim::fnv1a64(text)));
  return hex;
}

struct RangeArgs {
  std::string ion = "C";
  int charge = 1;
  double energy_kev = 40;
  uint64_t histories = 100000;
  uint64_t seed = 1;
  std::string out;
};

int run_range(const RangeArgs& a) {
  using namespace fibsim;
  if (a.histories == 0) throw ConfigError("range: --histories must be > 0");
  if (a.energy_kev <= 0) throw ConfigError("range: --energy-kev must be > 0");
  if (a.charge < 1) throw ConfigError("range: --charge must be >= 1");

  std::ostringstream key;
  key << "range ion=" << a.ion << " charge=" << a.charge
      << " energy_kev=" << a.energy_kev << " histories=" << a.histories
      << " seed=" << a.seed;
  std::string cfg_hex = hex_hash(key.str());

  ImplantProfile profile = simulate_ensemble(element(a.ion), a.energy_kev,
                                             TargetMaterial::silicon(), a.histories,
                                             a.seed);
  char tag[64];
  std::snprintf(tag, sizeof tag, "range_%s_%gkeV", a.ion.c_str(), a.energy_kev);
  std::string dir = a.out.empty() ? default_out_dir() : a.out;
  std::string csv_path = dir + "/" + tag + ".csv";
  write_file_atomic(csv_path,
                    metadata_line(cfg_hex, a.seed) + profile_csv(profile));

  nlohmann::json stats = nlohmann::json::parse(profile_stats_json(profile));
  stats["ion"] = a.ion;
  stats["charge"] = a.charge;
  stats["energy_kev"] = a.energy_kev;
  stats["backscattered"] = profile.backscattered;
  stats["config"] = cfg_hex;
  stats["seed"] = a.seed;
  std::string json_path = dir + "/" + tag + "_stats.json";
  write_file_atomic(json_path, stats.dump(2) + "\n");

  std::printf("%s: mean range %.6g nm, straggle %.6g nm, vacancy peak %.6g nm\n",
              tag, profile.mean_range_nm, profile.straggle_nm,
              profile.vacancy_peak_depth_nm);
  std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
  return 0;
}

int run_pipeline_cmd(const std::string& config_path) {
  using namespace fibsim;
  RunConfig cfg = load_config(config_path);
  PipelineResult res = run_pipeline(cfg);
  for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& p : res.written) std::printf("wrote %s\n", p.c_str());
  return 0;
}

struct G2Args {
  std::string input;  // stream CSV; empty -> simulate
  int emitters = 1;
  double rate_cps = 2e5;
  double lifetime_ns = 5.0;
  double background_cps = 0;
  double duration_s = 1.0;
  double jitter_ps = 100;
  double bin_ns = 1.0;
  double window_ns = 100.0;
  double rho = 1.0;
  std::string mode = "full";
  uint64_t seed = 1;
  std::string out;
};

int run_g2(const G2Args& a) {
  using namespace fibsim;
  std::string cfg_key;
  HbtStreams streams;
  if (!a.input.empty()) {
    std::string text = read_file(a.input);
    streams = parse_streams_csv(text);
    cfg_key = text;
  } else {
    HbtSettings st;
    st.n_emitters = a.emitters;
    st.emission_rate_cps = a.rate_cps;
    st.lifetime_ns = a.lifetime_ns;
    st.background_rate_cps = a.background_cps;
    st.duration_s = a.duration_s;
    st.jitter_ps = a.jitter_ps;
    streams = simulate_stream(st, a.seed);
    std::ostringstream key;
    key << "g2 emitters=" << a.emitters << " rate=" << a.rate_cps
        << " lifetime=" << a.lifetime_ns << " background=" << a.background_cps
        << " duration=" << a.duration_s << " seed=" << a.seed;
    cfg_key = key.str();
  }
  std::string cfg_hex = hex_hash(cfg_key);

  CorrelationMode mode =
      a.mode == "start_stop" ? CorrelationMode::start_stop : CorrelationMode::full;
  if (a.mode != "full" && a.mode != "start_stop")
    throw ConfigError("g2: --mode must be full or start_stop");
  G2Histogram hist = g2_histogram(streams.a, streams.b, a.bin_ns, a.window_ns, mode);
  G2Fit fit = fit_g2(hist);
  fit.signal_fraction = a.rho;
  CorrectedG2 corr = background_correct(fit.g2_zero, a.rho);
  fit.g2_zero_corrected = corr.value;
  fit.corrected_clamped = corr.clamped;

  uint64_t coincidences = 0;
  for (auto c : hist.counts) coincidences += c;

  std::string dir = a.out.empty() ? default_out_dir() : a.out;
  std::string hist_path = dir + "/g2_histogram.csv";
  write_file_atomic(hist_path, metadata_line(cfg_hex, a.seed) + histogram_csv(hist));
  nlohmann::json j;
  j["g2_zero"] = fit.g2_zero;
  j["antibunching_time_ns"] = fit.antibunching_time_ns;
  j["rho"] = fit.signal_fraction;
  j["g2_zero_corrected"] = fit.g2_zero_corrected;
  j["corrected_clamped"] = fit.corrected_clamped;
  j["sse"] = fit.sse;
  j["coincidences"] = coincidences;
  j["config"] = cfg_hex;
  j["seed"] = a.seed;
  std::string fit_path = dir + "/g2_fit.json";
  write_file_atomic(fit_path, j.dump(2) + "\n");

  std::printf("g2(0) = %.4f, corrected %.4f (rho %.3f), tau0 %.3g ns, %llu coincidences\n",
              fit.g2_zero, fit.g2_zero_corrected, a.rho, fit.antibunching_time_ns,
              static_cast<unsigned long long>(coincidences));
  std::printf("wrote %s and %s\n", hist_path.c_str(), fit_path.c_str());
  return 0;
}

struct FitYieldArgs {
  std::string input;
  double noise_floor = 1000;
  std::string protocol = "single_step";
  std::string out;
};

int run_fit_yield(const FitYieldArgs& a) {
  using namespace fibsim;
  std::string text = read_file(a.input);
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<double, double>> pts;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "n,rate_cps")
        throw std::runtime_error("fit-yield: line " + std::to_string(line_no) +
                                 ": expected header 'n,rate_cps'");
      header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("fit-yield: line " + std::to_string(line_no) +
                               ": expected 'n,rate'");
    char* end = nullptr;
    double n = std::strtod(line.c_str(), &end);
    if (end != line.c_str() + comma)
      throw std::runtime_error("fit-yield: line " + std::to_string(line_no) +
                               ": bad n value");
    double rate = std::strtod(line.c_str() + comma + 1, &end);
    if (end != line.c_str() + line.size())
      throw std::runtime_error("fit-yield: line " + std::to_string(line_no) +
                               ": bad rate value");
    pts.emplace_back(n, rate);
  }
  Protocol proto;
  if (a.protocol == "single_step")
    proto = Protocol::single_step;
  else if (a.protocol == "two_step")
    proto = Protocol::two_step;
  else
    throw ConfigError("fit-yield: --protocol must be single_step or two_step");

  YieldFit fit = fit_power_law(pts, a.noise_floor, proto);
  nlohmann::json j;
  j["k"] = fit.k;
  j["alpha"] = fit.alpha;
  j["n_min"] = fit.n_min;
  j["protocol"] = a.protocol;
  j["points_used"] = fit.points_used;
  j["points_excluded"] = fit.points_excluded;
  j["noise_floor"] = a.noise_floor;
  j["config"] = hex_hash(text);
  j["seed"] = 0;
  std::string dir = a.out.empty() ? default_out_dir() : a.out;
  std::string path = dir + "/yield_fit.json";
  write_file_atomic(path, j.dump(2) + "\n");
  std::printf("k = %.6g, alpha = %.4f, n_min = %.6g (%d points, %d excluded)\n",
              fit.k, fit.alpha, fit.n_min, fit.points_used, fit.points_excluded);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int run_columns(const std::string& input) {
  std::string text = fibsim::read_file(input);
  std::istringstream in(text);
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      std::printf("%s\n", line.c_str());
      continue;
    }
    for (auto& ch : line)
      if (ch == ',') ch = ' ';
    if (!header_done) {
      std::printf("# %s\n", line.c_str());
      header_done = true;
    } else {
      std::printf("%s\n", line.c_str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FIB color-center fabrication simulator and planner"};
  app.require_subcommand(1);

  RangeArgs range_args;
  auto* range = app.add_subcommand("range", "Monte Carlo implant depth profile");
  range->add_option("--ion", range_args.ion, "element symbol (e.g. C, Si)");
  range->add_option("--charge", range_args.charge, "charge state (metadata only)");
  range->add_option("--energy-kev", range_args.energy_kev, "landing energy [keV]");
  range->add_option("--histories", range_args.histories, "ion histories");
  range->add_option("--seed", range_args.seed, "RNG seed");
  range->add_option("--out", range_args.out, "output directory");

  std::string config_path;
  auto* pipe = app.add_subcommand("pipeline", "run protocol steps from a config");
  pipe->add_option("--config", config_path, "JSON run config")->required();

  G2Args g2_args;
  auto* g2 = app.add_subcommand("g2", "HBT correlation histogram and fit");
  g2->add_option("--input", g2_args.input, "stream CSV (channel,t_seconds)");
  g2->add_option("--emitters", g2_args.emitters, "emitters to simulate");
  g2->add_option("--rate-cps", g2_args.rate_cps, "detected rate per emitter");
  g2->add_option("--lifetime-ns", g2_args.lifetime_ns, "excited-state lifetime");
  g2->add_option("--background-cps", g2_args.background_cps, "background rate");
  g2->add_option("--duration-s", g2_args.duration_s, "acquisition time");
  g2->add_option("--jitter-ps", g2_args.jitter_ps, "detector jitter");
  g2->add_option("--bin-ns", g2_args.bin_ns, "histogram bin");
  g2->add_option("--window-ns", g2_args.window_ns, "correlation window");
  g2->add_option("--rho", g2_args.rho, "signal fraction for correction");
  g2->add_option("--mode", g2_args.mode, "full | start_stop");
  g2->add_option("--seed", g2_args.seed, "RNG seed");
  g2->add_option("--out", g2_args.out, "output directory");

  FitYieldArgs fy_args;
  auto* fy = app.add_subcommand("fit-yield", "power-law yield fit");
  fy->add_option("--input", fy_args.input, "points CSV (n,rate_cps)")->required();
  fy->add_option("--noise-floor", fy_args.noise_floor, "detection floor [cps]");
  fy->add_option("--protocol", fy_args.protocol, "single_step | two_step");
  fy->add_option("--out", fy_args.out, "output directory");

  std::string columns_input;
  auto* cols = app.add_subcommand("columns", "re-emit a CSV as gnuplot columns");
  cols->add_option("--input", columns_input, "CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (range->parsed()) return run_range(range_args);
    if (pipe->parsed()) return run_pipeline_cmd(config_path);
    if (g2->parsed()) return run_g2(g2_args);
    if (fy->parsed()) return run_fit_yield(fy_args);
    if (cols->parsed()) return run_columns(columns_input);
  } catch (const fibsim::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
