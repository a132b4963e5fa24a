#include "fibsim/beamline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "fibsim/elements.hpp"

namespace fibsim {

std::vector<IonSpecies> default_source_table() {
  auto make = [](const std::string& label, const std::string& sym, int atoms,
                 int charge, double intensity) {
    IonSpecies s;
    s.label = label;
    s.element = sym;
    s.atom_count = atoms;
    s.mass_amu = atoms * element(sym).mass_amu;
    s.charge = charge;
    s.relative_intensity = intensity;
    return s;
  };
  return {
      make("Ce2+", "Ce", 1, 2, 0.863),
      make("Ce+", "Ce", 1, 1, 0.029),
      make("Ce3+", "Ce", 1, 3, 0.012),
      make("C+", "C", 1, 1, 0.0018),
      make("C2+", "C", 2, 1, 0.0006),
      make("C3+", "C", 3, 1, 0.0004),
      // contaminant slots, intensity set by config if present in the source
      make("Al+", "Al", 1, 1, 0.0),
      make("Fe+", "Fe", 1, 1, 0.0),
      make("Cu+", "Cu", 1, 1, 0.0),
      make("Lu+", "Lu", 1, 1, 0.0),
      make("Pt+", "Pt", 1, 1, 0.0),
      make("Bi+", "Bi", 1, 1, 0.0),
  };
}

double TransmissionResult::transmission_of(const std::string& label) const {
  for (const auto& s : per_species)
    if (s.label == label) return s.transmission;
  throw std::invalid_argument("no such species in transmission result: " + label);
}

MassSpectrum build_spectrum(const std::vector<IonSpecies>& source_table,
                            double peak_width_amu) {
  if (source_table.empty())
    throw std::invalid_argument("build_spectrum: empty source table");
  if (peak_width_amu <= 0)
    throw std::invalid_argument("build_spectrum: peak width must be > 0");

  double total = 0;
  for (const auto& s : source_table) {
    if (s.mass_amu <= 0) throw std::invalid_argument("build_spectrum: mass <= 0");
    if (s.charge < 1) throw std::invalid_argument("build_spectrum: charge < 1");
    if (s.relative_intensity < 0 || s.relative_intensity > 1)
      throw std::invalid_argument("build_spectrum: relative_intensity outside [0,1]");
    total += s.relative_intensity;
  }
  if (total > 1.0 + 1e-9)
    throw std::invalid_argument("build_spectrum: relative intensities sum to > 1");

  // merge duplicate (mass, charge) entries
  std::vector<MassPeak> peaks;
  for (const auto& s : source_table) {
    bool merged = false;
    for (auto& p : peaks) {
      if (std::abs(p.m_over_q - s.m_over_q()) < 1e-12) {
        p.intensity += s.relative_intensity;
        merged = true;
        break;
      }
    }
    if (!merged)
      peaks.push_back({s.label, s.m_over_q(), s.relative_intensity, peak_width_amu});
  }

  auto ref = std::max_element(peaks.begin(), peaks.end(),
                              [](const MassPeak& a, const MassPeak& b) {
                                return a.intensity < b.intensity;
                              });
  if (ref->intensity <= 0)
    throw std::invalid_argument("build_spectrum: all intensities zero");
  double norm = ref->intensity;
  MassSpectrum spec;
  spec.normalization = ref->label;
  for (auto& p : peaks) p.intensity /= norm;
  std::sort(peaks.begin(), peaks.end(),
            [](const MassPeak& a, const MassPeak& b) { return a.m_over_q < b.m_over_q; });
  spec.peaks = std::move(peaks);
  return spec;
}

namespace {
// Gaussian CDF integral over [lo, hi] for a peak centered at mu with FWHM w.
double gaussian_fraction(double mu, double fwhm, double lo, double hi) {
  double sigma = fwhm / 2.3548200450309493;  // FWHM -> sigma
  double a = (lo - mu) / (sigma * 1.4142135623730951);
  double b = (hi - mu) / (sigma * 1.4142135623730951);
  return 0.5 * (std::erf(b) - std::erf(a));
}
}  // namespace

TransmissionResult select_species(const MassSpectrum& spectrum,
                                  double target_m_over_q, double window_amu) {
  if (window_amu <= 0)
    throw std::invalid_argument("select_species: window must be > 0");
  double lo = target_m_over_q - 0.5 * window_amu;
  double hi = target_m_over_q + 0.5 * window_amu;
  TransmissionResult result;
  double best = 0;
  for (const auto& p : spectrum.peaks) {
    double t = gaussian_fraction(p.m_over_q, p.width_amu, lo, hi);
    t = std::clamp(t, 0.0, 1.0);
    best = std::max(best, t);
    result.per_species.push_back({p.label, t});
  }
  result.warning = best < 1e-9;  // nothing usable inside the window
  return result;
}

double beam_current(double total_emission_a, const IonSpecies& species,
                    double transmission, double collimation) {
  if (total_emission_a < 0 || transmission < 0 || collimation < 0 ||
      species.relative_intensity < 0)
    throw std::invalid_argument("beam_current: factors must be >= 0");
  double current =
      total_emission_a * species.relative_intensity * transmission * collimation;
  if (current <= 0)
    throw std::runtime_error("beam_current: zero current, unusable beam");
  return current;
}

FilteredBeam make_beam(const IonSpecies& species, double potential_kv,
                       double current_a, double spot_fwhm_nm) {
  if (current_a <= 0) throw std::invalid_argument("make_beam: current must be > 0");
  if (spot_fwhm_nm <= 0) throw std::invalid_argument("make_beam: spot fwhm must be > 0");
  if (potential_kv <= 0) throw std::invalid_argument("make_beam: potential must be > 0");
  FilteredBeam beam;
  beam.species = species;
  beam.current_a = current_a;
  beam.spot_fwhm_nm = spot_fwhm_nm;
  beam.landing_energy_kev = potential_kv * species.charge;
  return beam;
}

std::string spectrum_csv(const MassSpectrum& spectrum) {
  std::ostringstream os;
  os << "m_over_q,intensity\n";
  char buf[80];
  for (const auto& p : spectrum.peaks) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g\n", p.m_over_q, p.intensity);
    os << buf;
  }
  return os.str();
}

}  // namespace fibsim
