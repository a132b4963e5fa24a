#pragma once
#include <string>
#include <vector>

// Ion source emission table + Wien-filter selection -> characterized beam.
namespace fibsim {

struct IonSpecies {
  std::string label;    // "Ce2+", "C+", ...
  std::string element;  // constituent element symbol, for transport
  int atom_count = 1;   // atoms per (possibly molecular) ion, e.g. C2+ -> 2
  double mass_amu = 0;  // total ion mass
  int charge = 1;       // elementary charges
  double relative_intensity = 0;  // fraction of total emission, [0,1]

  double m_over_q() const { return mass_amu / charge; }
};

struct MassPeak {
  std::string label;
  double m_over_q = 0;    // amu per elementary charge
  double intensity = 0;   // normalized to the most abundant species
  double width_amu = 0;   // FWHM, amu/e
};

struct MassSpectrum {
  std::vector<MassPeak> peaks;   // sorted by m_over_q
  std::string normalization;     // label of the reference (most abundant) peak
};

struct SpeciesTransmission {
  std::string label;
  double transmission = 0;  // [0,1]
};

struct TransmissionResult {
  std::vector<SpeciesTransmission> per_species;
  bool warning = false;  // no peak inside the window
  double transmission_of(const std::string& label) const;
};

struct FilteredBeam {
  IonSpecies species;
  double current_a = 0;
  double spot_fwhm_nm = 0;
  double landing_energy_kev = 0;  // acceleration potential x charge
};

// Defaults calibrated against the CeC source characterization: 0.25 amu/e
// peak FWHM keeps C+ transmission > 0.99 in a 1 amu/e window; collimation
// 5.6e-5 turns 10 uA total emission x 0.18% C+ into ~1 pA on target.
inline constexpr double kDefaultPeakWidthAmu = 0.25;
inline constexpr double kDefaultSelectionWindowAmu = 1.0;
inline constexpr double kDefaultCollimation = 5.6e-5;

// CeC source emission table: Ce2+ 86.3%, Ce+ 2.9%, Ce3+ 1.2%, C+ 0.18%,
// carbon clusters C2+ 0.06% / C3+ 0.04%, plus zero-intensity contaminant
// slots (Al, Fe, Cu, Lu, Pt, Bi) that a config may override.
std::vector<IonSpecies> default_source_table();

// One Gaussian peak per species at m/q; duplicate (mass, charge) entries are
// merged with summed intensity; intensities normalized to the most abundant.
MassSpectrum build_spectrum(const std::vector<IonSpecies>& source_table,
                            double peak_width_amu = kDefaultPeakWidthAmu);

// Fraction of each species' peak inside [target - window/2, target + window/2].
TransmissionResult select_species(const MassSpectrum& spectrum,
                                  double target_m_over_q, double window_amu);

// current = total_emission x relative_intensity x transmission x collimation.
// Zero result is an unusable beam -> error.
double beam_current(double total_emission_a, const IonSpecies& species,
                    double transmission, double collimation);

FilteredBeam make_beam(const IonSpecies& species, double potential_kv,
                       double current_a, double spot_fwhm_nm);

// CSV: m_over_q,intensity (LF endings, '.' decimals)
std::string spectrum_csv(const MassSpectrum& spectrum);

}  // namespace fibsim
