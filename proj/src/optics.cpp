#include "fibsim/optics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fibsim/constants.hpp"
#include "fibsim/io.hpp"
#include "fibsim/rng.hpp"
#include "json.hpp"

namespace fibsim {

void EmitterSpectrumModel::validate() const {
  if (zpl_wavelength_nm < 1150 || zpl_wavelength_nm > 1450)
    throw std::invalid_argument("spectrum model: ZPL outside [1150, 1450] nm");
  if (!(debye_waller > 0) || debye_waller > 1)
    throw std::invalid_argument("spectrum model: Debye-Waller outside (0, 1]");
  if (zpl_linewidth_nm <= 0 || psb_width_nm <= 0 || e_line_width_nm <= 0)
    throw std::invalid_argument("spectrum model: non-positive linewidth");
  if (e_line_intensity < 0 || debye_waller + e_line_intensity > 1)
    throw std::invalid_argument("spectrum model: ZPL + E-line fractions exceed 1");
}

EmitterSpectrumModel w_center_model() {
  EmitterSpectrumModel m;
  m.zpl_wavelength_nm = 1218;
  m.zpl_linewidth_nm = 1.0;
  m.debye_waller = 0.25;
  m.psb_center_offset_nm = 30;
  m.psb_width_nm = 50;
  m.e_line_intensity = 0;
  return m;
}

EmitterSpectrumModel g_center_model() {
  EmitterSpectrumModel m;
  m.zpl_wavelength_nm = 1278;
  m.zpl_linewidth_nm = 1.0;
  m.debye_waller = 0.30;
  m.psb_center_offset_nm = 40;
  m.psb_width_nm = 60;
  m.e_line_intensity = 0;  // enable via config for G* spectra
  return m;
}

std::vector<double> default_wavelength_grid() {
  std::vector<double> g;
  g.reserve(1201);
  for (int i = 0; i <= 1200; ++i) g.push_back(1150.0 + 0.25 * i);
  return g;
}

namespace {

// trapezoid weight of grid point i
double bin_weight(const std::vector<double>& grid, size_t i) {
  double lo = i == 0 ? grid[0] : 0.5 * (grid[i - 1] + grid[i]);
  double hi = i + 1 == grid.size() ? grid.back() : 0.5 * (grid[i] + grid[i + 1]);
  return hi - lo;
}

double lorentzian(double x, double center, double fwhm) {
  double hw = 0.5 * fwhm;
  double d = x - center;
  return hw / (kPi * (d * d + hw * hw));
}

double gaussian(double x, double center, double fwhm) {
  double sigma = fwhm / 2.3548200450309493;
  double d = (x - center) / sigma;
  return std::exp(-0.5 * d * d) / (sigma * 2.5066282746310002);
}

// render `shape` on the grid scaled so its on-grid integral equals `fraction`
void add_component(Spectrum& s, double fraction, auto&& shape) {
  if (fraction <= 0) return;
  std::vector<double> val(s.wavelength_nm.size());
  double integral = 0;
  for (size_t i = 0; i < val.size(); ++i) {
    val[i] = shape(s.wavelength_nm[i]);
    integral += val[i] * bin_weight(s.wavelength_nm, i);
  }
  if (integral <= 0) throw std::runtime_error("spectrum component off grid");
  double scale = fraction / integral;
  for (size_t i = 0; i < val.size(); ++i) s.intensity[i] += val[i] * scale;
}

}  // namespace

double Spectrum::integral() const {
  double t = 0;
  for (size_t i = 0; i < wavelength_nm.size(); ++i)
    t += intensity[i] * bin_weight(wavelength_nm, i);
  return t;
}

Spectrum emitter_spectrum(const EmitterSpectrumModel& model,
                          const std::vector<double>& grid) {
  model.validate();
  if (grid.size() < 2) throw std::invalid_argument("emitter_spectrum: grid too small");
  for (size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("emitter_spectrum: grid not increasing");

  Spectrum s;
  s.wavelength_nm = grid;
  s.intensity.assign(grid.size(), 0.0);
  double zpl = model.zpl_wavelength_nm;
  add_component(s, model.debye_waller,
                [&](double x) { return lorentzian(x, zpl, model.zpl_linewidth_nm); });
  double psb_fraction = 1.0 - model.debye_waller - model.e_line_intensity;
  add_component(s, psb_fraction, [&](double x) {
    return gaussian(x, zpl + model.psb_center_offset_nm, model.psb_width_nm);
  });
  add_component(s, model.e_line_intensity, [&](double x) {
    return lorentzian(x, model.e_line_wavelength_nm, model.e_line_width_nm);
  });
  return s;
}

Spectrum compose_spectrum(const EmitterSite& site, const EmitterSpectrumModel& w,
                          const EmitterSpectrumModel& g, double rate_w_cps,
                          double rate_g_cps, double longpass_nm,
                          double noise_floor) {
  auto grid = default_wavelength_grid();
  if (longpass_nm < grid.front() || longpass_nm > grid.back())
    throw std::invalid_argument("compose_spectrum: longpass outside grid");
  if (noise_floor < 0)
    throw std::invalid_argument("compose_spectrum: negative noise floor");
  Spectrum sw = emitter_spectrum(w, grid);
  Spectrum sg = emitter_spectrum(g, grid);
  Spectrum out;
  out.wavelength_nm = std::move(grid);
  out.intensity.assign(out.wavelength_nm.size(), 0.0);
  out.noise_floor = noise_floor;
  for (size_t i = 0; i < out.intensity.size(); ++i) {
    double v = site.n_w * rate_w_cps * sw.intensity[i] +
               site.n_g * rate_g_cps * sg.intensity[i];
    if (out.wavelength_nm[i] < longpass_nm) v = 0;
    out.intensity[i] = v + noise_floor;
  }
  return out;
}

namespace {

// background-subtracted integral over [center - w, center + w]; background is
// the line through the mean of the two flanking strips of the same width
double window_area(const Spectrum& s, double center, double w) {
  double lo = center - w, hi = center + w;
  if (lo - w < s.wavelength_nm.front() || hi + w > s.wavelength_nm.back())
    throw std::invalid_argument("zpl_ratio: window + flanks outside grid");
  double lx = 0, ly = 0, ln = 0, rx = 0, ry = 0, rn = 0;
  for (size_t i = 0; i < s.wavelength_nm.size(); ++i) {
    double x = s.wavelength_nm[i];
    if (x >= lo - w && x < lo) lx += x, ly += s.intensity[i], ln += 1;
    if (x > hi && x <= hi + w) rx += x, ry += s.intensity[i], rn += 1;
  }
  if (ln == 0 || rn == 0) throw std::invalid_argument("zpl_ratio: empty flank");
  lx /= ln, ly /= ln, rx /= rn, ry /= rn;
  double slope = (ry - ly) / (rx - lx);
  double area = 0;
  for (size_t i = 0; i < s.wavelength_nm.size(); ++i) {
    double x = s.wavelength_nm[i];
    if (x < lo || x > hi) continue;
    double bg = ly + slope * (x - lx);
    area += (s.intensity[i] - bg) * bin_weight(s.wavelength_nm, i);
  }
  return std::max(area, 0.0);
}

}  // namespace

ZplRatio zpl_ratio(const Spectrum& spectrum) {
  ZplRatio r;
  r.i_g = window_area(spectrum, 1278.0, kZplWindowNm);
  r.i_w = window_area(spectrum, 1218.0, kZplWindowNm);
  double total = 0;
  for (size_t i = 0; i < spectrum.wavelength_nm.size(); ++i)
    total += std::max(spectrum.intensity[i] - spectrum.noise_floor, 0.0) *
             bin_weight(spectrum.wavelength_nm, i);
  double eps = 1e-9 * total;
  if (r.i_g <= eps && r.i_w <= eps)
    throw std::runtime_error("zpl_ratio: both peaks at the noise floor");
  if (r.i_w <= eps) {
    r.lower_bound = true;  // true ratio is at least this
    r.ratio = r.i_g / (eps > 0 ? eps : 1e-300);
  } else {
    r.ratio = r.i_g / r.i_w;
  }
  return r;
}

double filtered_fraction(const EmitterSpectrumModel& model, double longpass_nm) {
  Spectrum s = emitter_spectrum(model);
  double f = 0;
  for (size_t i = 0; i < s.wavelength_nm.size(); ++i)
    if (s.wavelength_nm[i] >= longpass_nm)
      f += s.intensity[i] * bin_weight(s.wavelength_nm, i);
  return std::min(f, 1.0);
}

PLMap confocal_scan(const EmitterField& field, const EmitterSpectrumModel& w,
                    const EmitterSpectrumModel& g, double rate_w_cps,
                    double rate_g_cps, const MapSettings& st, uint64_t seed) {
  if (st.pixel_nm <= 0) throw std::invalid_argument("confocal_scan: pixel must be > 0");
  if (st.psf_fwhm_nm <= 0) throw std::invalid_argument("confocal_scan: psf must be > 0");

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (size_t i = 0; i < field.sites.size(); ++i) {
    const auto& s = field.sites[i];
    if (i == 0) {
      xmin = xmax = s.x_nm;
      ymin = ymax = s.y_nm;
    } else {
      xmin = std::min(xmin, s.x_nm), xmax = std::max(xmax, s.x_nm);
      ymin = std::min(ymin, s.y_nm), ymax = std::max(ymax, s.y_nm);
    }
  }
  PLMap map;
  map.pixel_nm = st.pixel_nm;
  map.psf_fwhm_nm = st.psf_fwhm_nm;
  map.longpass_nm = st.longpass_nm;
  map.x0_nm = xmin - st.margin_nm;
  map.y0_nm = ymin - st.margin_nm;
  map.nx = static_cast<int>(std::ceil((xmax - xmin + 2 * st.margin_nm) / st.pixel_nm)) + 1;
  map.ny = static_cast<int>(std::ceil((ymax - ymin + 2 * st.margin_nm) / st.pixel_nm)) + 1;
  map.rate_cps.assign(static_cast<size_t>(map.nx) * map.ny, st.background_cps);

  double fw = filtered_fraction(w, st.longpass_nm);
  double fg = filtered_fraction(g, st.longpass_nm);
  double sigma = st.psf_fwhm_nm / 2.3548200450309493;
  double reach = 5.0 * sigma;
  for (const auto& s : field.sites) {
    double rate = s.n_w * rate_w_cps * fw + s.n_g * rate_g_cps * fg;
    if (rate <= 0) continue;
    int ix0 = std::max(0, static_cast<int>((s.x_nm - reach - map.x0_nm) / st.pixel_nm));
    int ix1 = std::min(map.nx - 1,
                       static_cast<int>((s.x_nm + reach - map.x0_nm) / st.pixel_nm) + 1);
    int iy0 = std::max(0, static_cast<int>((s.y_nm - reach - map.y0_nm) / st.pixel_nm));
    int iy1 = std::min(map.ny - 1,
                       static_cast<int>((s.y_nm + reach - map.y0_nm) / st.pixel_nm) + 1);
    for (int iy = iy0; iy <= iy1; ++iy) {
      double dy = map.y0_nm + iy * st.pixel_nm - s.y_nm;
      for (int ix = ix0; ix <= ix1; ++ix) {
        double dx = map.x0_nm + ix * st.pixel_nm - s.x_nm;
        double r2 = dx * dx + dy * dy;
        map.rate_cps[static_cast<size_t>(iy) * map.nx + ix] +=
            rate * std::exp(-0.5 * r2 / (sigma * sigma));
      }
    }
  }

  if (st.integration_s > 0) {
    // per-row RNG streams keep the map deterministic under row parallelism
    for (int iy = 0; iy < map.ny; ++iy) {
      Rng rng(seed, static_cast<uint64_t>(iy));
      for (int ix = 0; ix < map.nx; ++ix) {
        auto& v = map.rate_cps[static_cast<size_t>(iy) * map.nx + ix];
        double counts = static_cast<double>(rng.poisson(v * st.integration_s));
        v = counts / st.integration_s;
      }
    }
  }
  return map;
}

bool spot_detected(const PLMap& map, double x_nm, double y_nm, double radius_nm,
                   double threshold_cps) {
  int ix0 = std::max(0, static_cast<int>((x_nm - radius_nm - map.x0_nm) / map.pixel_nm));
  int ix1 = std::min(map.nx - 1,
                     static_cast<int>((x_nm + radius_nm - map.x0_nm) / map.pixel_nm) + 1);
  int iy0 = std::max(0, static_cast<int>((y_nm - radius_nm - map.y0_nm) / map.pixel_nm));
  int iy1 = std::min(map.ny - 1,
                     static_cast<int>((y_nm + radius_nm - map.y0_nm) / map.pixel_nm) + 1);
  double r2 = radius_nm * radius_nm;
  auto inside = [&](int ix, int iy) {
    double dx = map.x0_nm + ix * map.pixel_nm - x_nm;
    double dy = map.y0_nm + iy * map.pixel_nm - y_nm;
    return dx * dx + dy * dy <= r2;
  };
  auto hot = [&](int ix, int iy) {
    return inside(ix, iy) && map.at(ix, iy) > threshold_cps;
  };
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      if (!hot(ix, iy)) continue;
      if ((ix + 1 <= ix1 && hot(ix + 1, iy)) || (iy + 1 <= iy1 && hot(ix, iy + 1)))
        return true;  // two adjacent hot pixels
    }
  return false;
}

std::string spectrum_csv(const Spectrum& spectrum) {
  std::ostringstream os;
  os << "wavelength_nm,counts_per_s\n";
  for (size_t i = 0; i < spectrum.wavelength_nm.size(); ++i)
    os << format_g6(spectrum.wavelength_nm[i]) << ','
       << format_g6(spectrum.intensity[i]) << "\n";
  return os.str();
}

std::string map_csv(const PLMap& map) {
  std::ostringstream os;
  for (int iy = 0; iy < map.ny; ++iy) {
    for (int ix = 0; ix < map.nx; ++ix) {
      if (ix) os << ',';
      os << format_g6(map.at(ix, iy));
    }
    os << "\n";
  }
  return os.str();
}

std::string map_metadata_json(const PLMap& map) {
  nlohmann::json j;
  j["x0_nm"] = map.x0_nm;
  j["y0_nm"] = map.y0_nm;
  j["pixel_nm"] = map.pixel_nm;
  j["nx"] = map.nx;
  j["ny"] = map.ny;
  j["psf_fwhm_nm"] = map.psf_fwhm_nm;
  j["longpass_nm"] = map.longpass_nm;
  return j.dump(2) + "\n";
}

}  // namespace fibsim
