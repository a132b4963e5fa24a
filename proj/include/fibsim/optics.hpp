#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "fibsim/sample.hpp"

// PL spectrum synthesis (ZPL + phonon sideband), ZPL intensity ratios, and
// confocal map rendering from an EmitterField.
namespace fibsim {

struct EmitterSpectrumModel {
  double zpl_wavelength_nm = 0;   // W: 1218, G: 1278
  double zpl_linewidth_nm = 1.0;  // Lorentzian FWHM
  double debye_waller = 0.3;      // ZPL fraction of total emission, (0,1]
  double psb_center_offset_nm = 30.0;  // PSB center = ZPL + offset (red side)
  double psb_width_nm = 50.0;          // Gaussian FWHM
  double e_line_wavelength_nm = 1380.0;
  double e_line_intensity = 0.0;  // fraction of total; 0 disables the E line
  double e_line_width_nm = 4.0;   // Lorentzian FWHM

  void validate() const;  // wavelength in [1150, 1450], DW in (0,1]
};

// Defaults tuned so the two ZPLs sit at 1218 / 1278 nm with visible sidebands.
EmitterSpectrumModel w_center_model();
EmitterSpectrumModel g_center_model();

struct Spectrum {
  std::vector<double> wavelength_nm;  // strictly increasing
  std::vector<double> intensity;      // counts/s/nm
  double noise_floor = 0;             // counts/s/nm

  double integral() const;  // trapezoid-free bin sum: sum(I_i * dlambda_i)
};

// 1150..1450 nm at 0.25 nm. Windows at +-4 nm need the fine pitch.
std::vector<double> default_wavelength_grid();

// Unit-integral spectrum: Lorentzian ZPL carrying exactly debye_waller of the
// on-grid integral, Gaussian PSB (and optional E line) carrying the rest.
// Each component is renormalized on the grid so truncated tails cannot skew
// the ZPL fraction.
Spectrum emitter_spectrum(const EmitterSpectrumModel& model,
                          const std::vector<double>& grid = default_wavelength_grid());

// n_W * R_W * spec_W + n_G * R_G * spec_G, zeroed below the longpass cutoff,
// plus the noise floor everywhere.
Spectrum compose_spectrum(const EmitterSite& site, const EmitterSpectrumModel& w,
                          const EmitterSpectrumModel& g, double rate_w_cps,
                          double rate_g_cps, double longpass_nm,
                          double noise_floor);

struct ZplRatio {
  double ratio = 0;  // I_G / I_W
  double i_g = 0;    // background-subtracted window integrals
  double i_w = 0;
  bool lower_bound = false;  // denominator at the noise floor
};

inline constexpr double kZplWindowNm = 4.0;  // +-4 nm integration windows

// Background-subtracted (linear flank interpolation) peak areas around
// 1278 nm (G) over 1218 nm (W). Both peaks at floor -> error.
ZplRatio zpl_ratio(const Spectrum& spectrum);

// Fraction of a unit emitter spectrum passing the longpass filter.
double filtered_fraction(const EmitterSpectrumModel& model, double longpass_nm);

struct PLMap {
  double x0_nm = 0, y0_nm = 0;  // center of pixel (0, 0)
  double pixel_nm = 0;
  int nx = 0, ny = 0;
  std::vector<double> rate_cps;  // row-major, ny rows of nx
  double psf_fwhm_nm = 0;
  double longpass_nm = 0;

  double at(int ix, int iy) const { return rate_cps[static_cast<size_t>(iy) * nx + ix]; }
};

struct MapSettings {
  double psf_fwhm_nm = 700;   // engineering default for a cryo objective
  double pixel_nm = 200;
  double longpass_nm = 1200;
  double background_cps = 100;
  double integration_s = 0.01;  // per pixel; 0 -> noiseless expected rates
  double margin_nm = 2000;      // map border beyond the outermost site
};

// Each emitter adds rate * exp(-r^2 / 2 sigma_psf^2) (peak = its filtered
// rate); per-pixel shot noise Poisson(rate * integration) / integration.
PLMap confocal_scan(const EmitterField& field, const EmitterSpectrumModel& w,
                    const EmitterSpectrumModel& g, double rate_w_cps,
                    double rate_g_cps, const MapSettings& settings, uint64_t seed);

// >= 2 edge-adjacent pixels above threshold within radius of (x, y).
bool spot_detected(const PLMap& map, double x_nm, double y_nm, double radius_nm,
                   double threshold_cps);

std::string spectrum_csv(const Spectrum& spectrum);  // wavelength_nm,counts_per_s
std::string map_csv(const PLMap& map);               // matrix of rates
std::string map_metadata_json(const PLMap& map);     // pixel/psf/longpass

}  // namespace fibsim
