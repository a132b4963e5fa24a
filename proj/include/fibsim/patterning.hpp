#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "fibsim/beamline.hpp"

// Fabrication intent (ions per spot, grids) -> executable exposure plan with
// dwell times from the beam current, plus the plan file reader/writer.
namespace fibsim {

struct PlanHeader {
  std::string species;   // beam species label, e.g. "C+"
  int charge = 1;        // elementary charges
  double beam_current_a = 0;
  double energy_kev = 0;
  double spot_fwhm_nm = 0;
  double write_field_nm = 0;  // spots live in [0, write_field]^2
  std::string created = "1970-01-01T00:00:00Z";  // config-supplied; fixed default
  uint64_t seed = 0;
  std::string config;  // FNV-1a-64 hex of the generating config, "" when none

  bool operator==(const PlanHeader&) const = default;
};

struct ExposureSpot {
  double x_nm = 0;
  double y_nm = 0;
  std::string species;
  int charge = 1;
  double energy_kev = 0;
  double expected_ions = 0;  // n-bar; Poisson mean for the delivered count
  int64_t dwell_ns = 0;      // plan files carry ns resolution (us, 3 decimals)

  double dwell_us() const { return static_cast<double>(dwell_ns) * 1e-3; }
  bool operator==(const ExposureSpot&) const = default;
};

struct ExposurePlan {
  PlanHeader header;
  std::vector<ExposureSpot> spots;

  double total_exposure_s() const;  // sum of dwell, no overhead terms
  bool operator==(const ExposurePlan&) const = default;
};

// Gaussian placement jitter applied when a plan is executed (stage/beam
// positioning error); the plan itself stores nominal coordinates.
inline constexpr double kDefaultPlacementJitterNm = 10.0;

// dwell = n_bar * q * e / I, exact in double; ns quantization happens when a
// spot is built so the 1e-6-level dose arithmetic is not rounded away.
double dwell_seconds(double expected_ions, int charge, double beam_current_a);
int64_t dwell_ns_for(double expected_ions, int charge, double beam_current_a);

// count = fluence [cm^-2] x area [nm^2] x 1e-14; area 0 -> 0 ions.
double fluence_to_ions(double fluence_cm2, double area_nm2);

// Row-major grid, one row per n_bar entry, `cols` spots per row at `pitch`.
// Coordinates quantized to 6 significant digits for file round-trip identity.
ExposurePlan plan_grid(const std::vector<double>& row_expected_ions, int cols,
                       double pitch_nm, const FilteredBeam& beam,
                       uint64_t seed = 0,
                       const std::string& created = "1970-01-01T00:00:00Z");

// '#'-prefixed JSON header line, column header, then one CSV row per spot:
// x_nm,y_nm,species,charge,energy_keV,expected_ions,dwell_us
// LF endings, '.' decimals, 6 significant digits, dwell with 3 decimals (ns).
std::string format_plan(const ExposurePlan& plan);
void write_plan(const std::string& path, const ExposurePlan& plan);

// Throws std::runtime_error naming the 1-based line on malformed input.
ExposurePlan parse_plan(const std::string& text);
ExposurePlan read_plan(const std::string& path);

}  // namespace fibsim
