#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibsim/beamline.hpp"
#include "fibsim/optics.hpp"
#include "fibsim/patterning.hpp"
#include "fibsim/photonstats.hpp"
#include "fibsim/sample.hpp"
#include "fibsim/transport.hpp"

// Run configuration: strict JSON (unknown keys rejected with their paths),
// defaults chosen to reproduce the calibrated protocol chain.
namespace fibsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SourceConfig {
  double total_emission_a = 10e-6;
  double peak_width_amu = kDefaultPeakWidthAmu;
  std::vector<IonSpecies> species;  // defaults to the CeC emission table
};

struct BeamlineConfig {
  std::string select_label = "C+";
  double window_amu = kDefaultSelectionWindowAmu;
  double collimation = kDefaultCollimation;
  double potential_kv = 40.0;
  double spot_fwhm_nm = 30.0;
  double current_override_a = 0;  // > 0: use the measured current directly
};

struct TransportConfig {
  TransportSettings settings;
  uint64_t histories = 100000;
};

struct SampleConfig {
  double residual_carbon_cm3 = 5e14;
  ActivationModel activation;
  SamplingMode sampling = SamplingMode::poisson;
};

struct OpticsConfig {
  EmitterSpectrumModel w = w_center_model();
  EmitterSpectrumModel g = g_center_model();
  MapSettings map;
  double noise_floor_cps_per_nm = 1.0;
  double spectrum_longpass_nm = 1150;  // grid start = filter off
};

struct PhotonstatsConfig {
  HbtSettings hbt;
  double bin_ns = 1.0;
  double window_ns = 100.0;
  double rho = 1.0;  // signal fraction for background correction
  CorrelationMode mode = CorrelationMode::full;
};

struct PatterningConfig {
  double pitch_nm = 3000;
  int cols = 20;
  std::vector<double> rows_n_bar;
  double placement_jitter_nm = kDefaultPlacementJitterNm;
  std::string created = "1970-01-01T00:00:00Z";
};

struct ProtocolStep {
  std::string op;  // implant_broad | anneal | implant_spots | activate | spectrum | scan
  std::string species = "C";  // implant_broad: element symbol
  double energy_kev = 0;      // implant_broad / implant_spots landing energy
  double fluence_cm2 = 0;     // implant_broad
  double temperature_c = 0;   // anneal
  double duration_h = 0;      // anneal
  std::string out;            // spectrum / scan file name (default step<k>_...)
};

struct RunConfig {
  uint64_t seed = 42;
  std::string output_dir;  // empty -> $FIBSIM_OUTPUT_DIR or "out"
  SourceConfig source;
  BeamlineConfig beamline;
  TransportConfig transport;
  SampleConfig sample;
  OpticsConfig optics;
  PhotonstatsConfig photonstats;
  PatterningConfig patterning;
  std::vector<ProtocolStep> protocol;

  uint64_t config_hash = 0;  // FNV-1a of the raw config text
  std::string config_hex;    // 16 hex digits of config_hash

  std::string resolved_output_dir() const;
};

// Throws ConfigError listing every unknown key path and the first bad value.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

std::string metadata_line(const std::string& config_hex, uint64_t seed);

}  // namespace fibsim
