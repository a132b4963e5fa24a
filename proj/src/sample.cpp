#include "fibsim/sample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fibsim/io.hpp"
#include "json.hpp"

namespace fibsim {

bool Wafer::has_pair_layer() const {
  for (const auto& l : layers)
    if (l.pair_cm3 > 0) return true;
  return false;
}

std::vector<double> Wafer::pair_profile() const {
  std::vector<double> p(layers.size(), 0.0);
  double sum = 0;
  for (size_t i = 0; i < layers.size(); ++i) {
    p[i] = layers[i].pair_cm3;
    sum += p[i];
  }
  if (sum > 0)
    for (auto& v : p) v /= sum;
  return p;
}

double EmitterField::total_w() const {
  double t = 0;
  for (const auto& s : sites) t += s.n_w;
  return t;
}

double EmitterField::total_g() const {
  double t = 0;
  for (const auto& s : sites) t += s.n_g;
  return t;
}

void ActivationModel::validate() const {
  const double fields[] = {yield_single,    k_two_step,       alpha_two_step,
                           gate_single_ions, w_gate_ions,     w_yield,
                           w_two_step_factor, residual_g_yield, residual_carbon_ref_cm3,
                           rate_w_cps,      rate_g_cps,       noise_floor_cps,
                           pair_efficiency, broad_site_area_nm2};
  for (double f : fields)
    if (!(f > 0)) throw std::invalid_argument("activation model: non-positive parameter");
}

double profile_overlap(const std::vector<double>& a, const std::vector<double>& b) {
  size_t n = std::min(a.size(), b.size());
  double o = 0;
  for (size_t i = 0; i < n; ++i) o += std::min(a[i], b[i]);
  return o;
}

namespace {

// Unit-sum stopped-ion histogram, checked against the wafer bin grid.
std::vector<double> stopped_profile(const ImplantProfile& profile, const Wafer& wafer) {
  if (std::abs(profile.depth_bin_nm - wafer.depth_bin_nm) > 1e-12)
    throw std::invalid_argument("implant: profile bin width differs from wafer grid");
  std::vector<double> p(profile.stopped_ion_counts.size(), 0.0);
  double sum = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] = static_cast<double>(profile.stopped_ion_counts[i]);
    sum += p[i];
  }
  if (sum > 0)
    for (auto& v : p) v /= sum;
  return p;
}

void check_profile(const ImplantProfile& profile, const std::string& species,
                   double energy_kev) {
  if (profile.ion != species)
    throw std::invalid_argument("implant: profile species '" + profile.ion +
                                "' does not match beam '" + species + "'");
  if (std::abs(profile.energy_kev - energy_kev) > 1e-9 * std::max(1.0, energy_kev))
    throw std::invalid_argument("implant: profile energy does not match beam energy");
  if (profile.histories == 0)
    throw std::invalid_argument("implant: empty profile");
}

void grow_layers(Wafer& w, size_t bins) {
  size_t old = w.layers.size();
  if (bins <= old) return;
  w.layers.resize(bins);
  for (size_t i = old; i < bins; ++i) {
    w.layers[i].depth_lo_nm = static_cast<double>(i) * w.depth_bin_nm;
    w.layers[i].depth_hi_nm = static_cast<double>(i + 1) * w.depth_bin_nm;
  }
}

}  // namespace

Wafer implant_broad(const Wafer& wafer, const std::string& species,
                    double energy_kev, double fluence_cm2,
                    const ImplantProfile& profile) {
  if (fluence_cm2 < 0) throw std::invalid_argument("implant_broad: negative fluence");
  if (fluence_cm2 == 0) return wafer;
  check_profile(profile, species, energy_kev);

  Wafer w = wafer;
  size_t bins = std::max(profile.stopped_ion_counts.size(),
                         profile.vacancy_counts.size());
  grow_layers(w, bins);

  // areal density (cm^-2) per bin -> volume density: / (bin width in cm)
  double inv_bin_cm = 1e7 / w.depth_bin_nm;
  double per_ion = 1.0 / static_cast<double>(profile.histories);
  bool carbon = species == "C";
  for (size_t i = 0; i < profile.stopped_ion_counts.size(); ++i) {
    double frac = static_cast<double>(profile.stopped_ion_counts[i]) * per_ion;
    double dens = fluence_cm2 * frac * inv_bin_cm;
    if (carbon)
      w.layers[i].implanted_c_cm3 += dens;
    else
      w.layers[i].si_i_cm3 += dens;  // non-C projectiles end up interstitial
  }
  for (size_t i = 0; i < profile.vacancy_counts.size(); ++i) {
    double frac = static_cast<double>(profile.vacancy_counts[i]) * per_ion;
    w.layers[i].si_i_cm3 += fluence_cm2 * frac * inv_bin_cm;
  }

  BroadImplantRecord rec;
  rec.species = species;
  rec.energy_kev = energy_kev;
  rec.fluence_cm2 = fluence_cm2;
  rec.pair_overlap = profile_overlap(stopped_profile(profile, w), w.pair_profile());
  rec.epoch = w.epoch;
  w.broad_implants.push_back(std::move(rec));
  return w;
}

Wafer anneal(const Wafer& wafer, double temperature_c, double duration_h,
             double pair_efficiency) {
  if (duration_h < 0 || temperature_c < 0)
    throw std::invalid_argument("anneal: negative temperature or duration");
  if (pair_efficiency <= 0 || pair_efficiency > 1)
    throw std::invalid_argument("anneal: pair efficiency outside (0,1]");
  if (duration_h == 0) return wafer;

  Wafer w = wafer;
  for (auto& l : w.layers) {
    // a substitutional pair consumes two implanted carbons
    l.pair_cm3 += 0.5 * pair_efficiency * l.implanted_c_cm3;
    l.implanted_c_cm3 *= 1.0 - pair_efficiency;
    l.si_i_cm3 = 0;  // crystal recovery erases damage and existing emitters
  }
  AnnealRecord rec;
  rec.temperature_c = temperature_c;
  rec.duration_h = duration_h;
  rec.calibrated = std::abs(temperature_c - 500.0) < 1e-9 &&
                   std::abs(duration_h - 2.0) < 1e-9;
  w.anneals.push_back(rec);
  w.epoch += 1;
  return w;
}

Wafer implant_spot(const Wafer& wafer, double x_nm, double y_nm,
                   const std::string& species, double energy_kev,
                   double expected_ions, Rng& rng, const ImplantProfile* profile,
                   SamplingMode mode) {
  if (expected_ions <= 0)
    throw std::invalid_argument("implant_spot: expected_ions must be > 0");

  Wafer w = wafer;
  SpotRecord s;
  s.x_nm = x_nm;
  s.y_nm = y_nm;
  s.species = species;
  s.energy_kev = energy_kev;
  s.expected_ions = expected_ions;
  s.actual_ions = mode == SamplingMode::poisson
                      ? static_cast<double>(rng.poisson(expected_ions))
                      : expected_ions;
  if (profile) {
    check_profile(*profile, species, energy_kev);
    s.pair_overlap = profile_overlap(stopped_profile(*profile, w), w.pair_profile());
  } else {
    s.pair_overlap = w.has_pair_layer() ? 1.0 : 0.0;
  }
  s.epoch = w.epoch;
  w.spots.push_back(std::move(s));
  return w;
}

namespace {

struct SiteDose {
  double x_nm = 0, y_nm = 0;
  double ions = 0;        // realized projectile count
  int atom_count = 1;     // atoms per projectile (C clusters)
  bool carbon = false;
  double pair_overlap = 0;
};

EmitterSite activate_site(const SiteDose& d, const Wafer& wafer,
                          const ActivationModel& m, Rng& rng, SamplingMode mode) {
  EmitterSite site;
  site.x_nm = d.x_nm;
  site.y_nm = d.y_nm;
  site.two_step = d.pair_overlap > 0;
  double atoms = d.ions * d.atom_count;

  double eg = 0;
  if (site.two_step) {
    if (d.ions > 0) eg = m.k_two_step * std::pow(d.ions, m.alpha_two_step);
  } else {
    if (d.carbon && atoms >= m.gate_single_ions) eg += m.yield_single * atoms;
    // damage can activate residual bulk carbon regardless of beam species
    if (atoms >= m.gate_single_ions)
      eg += m.residual_g_yield * atoms *
            (wafer.residual_carbon_cm3 / m.residual_carbon_ref_cm3);
  }
  double ew = 0;
  if (atoms >= m.w_gate_ions) {
    ew = m.w_yield * atoms;
    if (site.two_step) ew *= m.w_two_step_factor;
  }

  if (mode == SamplingMode::poisson) {
    site.n_g = eg > 0 ? static_cast<double>(rng.poisson(eg)) : 0.0;
    site.n_w = ew > 0 ? static_cast<double>(rng.poisson(ew)) : 0.0;
  } else {
    site.n_g = eg;
    site.n_w = ew;
  }
  site.rate_cps = site.n_w * m.rate_w_cps + site.n_g * m.rate_g_cps;
  return site;
}

}  // namespace

EmitterField activate_emitters(const Wafer& wafer, const ActivationModel& model,
                               uint64_t seed, SamplingMode mode) {
  model.validate();
  EmitterField field;
  uint64_t stream = 0;
  for (const auto& b : wafer.broad_implants) {
    Rng rng(seed, stream++);
    if (b.epoch != wafer.epoch) continue;  // annealed away
    SiteDose d;
    d.ions = b.fluence_cm2 * model.broad_site_area_nm2 * 1e-14;
    d.atom_count = b.atom_count;
    d.carbon = b.species == "C";
    d.pair_overlap = b.pair_overlap;
    field.sites.push_back(activate_site(d, wafer, model, rng, mode));
  }
  for (const auto& s : wafer.spots) {
    Rng rng(seed, stream++);
    if (s.epoch != wafer.epoch) continue;
    SiteDose d;
    d.x_nm = s.x_nm;
    d.y_nm = s.y_nm;
    d.ions = s.actual_ions;
    d.atom_count = s.atom_count;
    d.carbon = s.species == "C";
    d.pair_overlap = s.pair_overlap;
    field.sites.push_back(activate_site(d, wafer, model, rng, mode));
  }
  return field;
}

YieldFit fit_power_law(const std::vector<std::pair<double, double>>& n_vs_rate,
                       double noise_floor, Protocol protocol) {
  if (noise_floor <= 0) throw std::invalid_argument("fit: noise floor must be > 0");
  std::vector<std::pair<double, double>> pts;
  int excluded = 0;
  for (const auto& [n, rate] : n_vs_rate) {
    if (n <= 0 || rate <= 0) {
      ++excluded;
      continue;
    }
    if (rate > noise_floor) pts.emplace_back(std::log(n), std::log(rate));
  }
  if (pts.size() < 3)
    throw std::runtime_error("fit: fewer than 3 points above the noise floor");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  auto np = static_cast<double>(pts.size());
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = np * sxx - sx * sx;
  if (denom <= 0) throw std::runtime_error("fit: degenerate abscissae");
  double alpha = (np * sxy - sx * sy) / denom;
  double lnk = (sy - alpha * sx) / np;

  YieldFit fit;
  fit.alpha = alpha;
  fit.k = std::exp(lnk);
  fit.protocol = protocol;
  fit.points_used = static_cast<int>(pts.size());
  fit.points_excluded = excluded;
  if (!(fit.k > 0) || !(fit.alpha > 0) || fit.alpha > 2)
    throw std::domain_error("fit: parameters outside k > 0, alpha in (0, 2]");
  fit.n_min = std::pow(noise_floor / fit.k, 1.0 / fit.alpha);
  return fit;
}

std::string wafer_json(const Wafer& wafer) {
  nlohmann::json j;
  j["residual_carbon_cm3"] = wafer.residual_carbon_cm3;
  j["depth_bin_nm"] = wafer.depth_bin_nm;
  j["epoch"] = wafer.epoch;
  auto layers = nlohmann::json::array();
  for (const auto& l : wafer.layers) {
    if (l.implanted_c_cm3 == 0 && l.pair_cm3 == 0 && l.si_i_cm3 == 0) continue;
    layers.push_back({{"depth_lo_nm", l.depth_lo_nm},
                      {"depth_hi_nm", l.depth_hi_nm},
                      {"implanted_c_cm3", l.implanted_c_cm3},
                      {"pair_cm3", l.pair_cm3},
                      {"si_i_cm3", l.si_i_cm3}});
  }
  j["layers"] = std::move(layers);
  auto anneals = nlohmann::json::array();
  for (const auto& a : wafer.anneals)
    anneals.push_back({{"temperature_c", a.temperature_c},
                       {"duration_h", a.duration_h},
                       {"calibrated", a.calibrated}});
  j["anneals"] = std::move(anneals);
  j["broad_implants"] = wafer.broad_implants.size();
  j["spots"] = wafer.spots.size();
  return j.dump(2) + "\n";
}

std::string emitter_field_csv(const EmitterField& field) {
  std::ostringstream os;
  os << "x_nm,y_nm,n_w,n_g,rate_cps\n";
  for (const auto& s : field.sites)
    os << format_g6(s.x_nm) << ',' << format_g6(s.y_nm) << ',' << format_g6(s.n_w)
       << ',' << format_g6(s.n_g) << ',' << format_g6(s.rate_cps) << "\n";
  return os.str();
}

}  // namespace fibsim
