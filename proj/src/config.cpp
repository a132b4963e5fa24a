#include "fibsim/config.hpp"

#include <cstdio>
#include <cstdlib>

#include "fibsim/elements.hpp"
#include "fibsim/io.hpp"
#include "json.hpp"

namespace fibsim {

namespace {

using nlohmann::json;

// strict object reader: every key must be consumed, leftovers are collected
// with their full path for one aggregate error
class ObjReader {
 public:
  ObjReader(const json& j, std::string path, std::vector<std::string>& unknown)
      : j_(j), path_(std::move(path)), unknown_(unknown) {
    if (!j_.is_object())
      throw ConfigError("config: " + path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.push_back(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: " + path_ + "." + key + ": wrong type");
    }
  }

  const json* sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.push_back(key);
    return &j_.at(key);
  }

  ~ObjReader() {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      bool ok = false;
      for (const auto& s : seen_)
        if (s == key) {
          ok = true;
          break;
        }
      if (!ok) unknown_.push_back(path_ + "." + key);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& unknown_;
  std::vector<std::string> seen_;
};

void read_species(const json& j, const std::string& path,
                  std::vector<std::string>& unknown, std::vector<IonSpecies>& out) {
  if (!j.is_array()) throw ConfigError("config: " + path + ": expected an array");
  int i = 0;
  for (const auto& e : j) {
    ObjReader r(e, path + "[" + std::to_string(i) + "]", unknown);
    IonSpecies s;
    r.get("label", s.label);
    r.get("element", s.element);
    r.get("atom_count", s.atom_count);
    r.get("charge", s.charge);
    r.get("relative_intensity", s.relative_intensity);
    s.mass_amu = 0;
    r.get("mass_amu", s.mass_amu);
    if (s.label.empty() || s.element.empty())
      throw ConfigError("config: " + path + "[" + std::to_string(i) +
                        "]: label and element are required");
    if (s.mass_amu == 0) s.mass_amu = s.atom_count * element(s.element).mass_amu;
    out.push_back(std::move(s));
    ++i;
  }
}

void read_spectrum_model(const json& j, const std::string& path,
                         std::vector<std::string>& unknown,
                         EmitterSpectrumModel& m) {
  ObjReader r(j, path, unknown);
  r.get("zpl_wavelength_nm", m.zpl_wavelength_nm);
  r.get("zpl_linewidth_nm", m.zpl_linewidth_nm);
  r.get("debye_waller", m.debye_waller);
  r.get("psb_center_offset_nm", m.psb_center_offset_nm);
  r.get("psb_width_nm", m.psb_width_nm);
  r.get("e_line_wavelength_nm", m.e_line_wavelength_nm);
  r.get("e_line_intensity", m.e_line_intensity);
  r.get("e_line_width_nm", m.e_line_width_nm);
}

ProtocolStep read_step(const json& j, const std::string& path,
                       std::vector<std::string>& unknown) {
  ObjReader r(j, path, unknown);
  ProtocolStep s;
  r.get("op", s.op);
  if (s.op == "implant_broad") {
    r.get("species", s.species);
    r.get("energy_kev", s.energy_kev);
    r.get("fluence_cm2", s.fluence_cm2);
  } else if (s.op == "anneal") {
    r.get("temperature_c", s.temperature_c);
    r.get("duration_h", s.duration_h);
  } else if (s.op == "implant_spots") {
    r.get("energy_kev", s.energy_kev);
  } else if (s.op == "activate") {
    // no parameters
  } else if (s.op == "spectrum" || s.op == "scan") {
    r.get("out", s.out);
  } else {
    throw ConfigError("config: " + path + ".op: unknown operation '" + s.op + "'");
  }
  return s;
}

}  // namespace

std::string RunConfig::resolved_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv("FIBSIM_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

RunConfig parse_config(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: not valid JSON");
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  RunConfig cfg;
  cfg.config_hash = fnv1a64(text);
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  cfg.config_hex = hex;

  std::vector<std::string> unknown;
  {
    ObjReader top(j, "$", unknown);
    top.get("seed", cfg.seed);
    top.get("output_dir", cfg.output_dir);

    if (const json* s = top.sub("source")) {
      ObjReader r(*s, "source", unknown);
      r.get("total_emission_a", cfg.source.total_emission_a);
      r.get("peak_width_amu", cfg.source.peak_width_amu);
      if (const json* sp = r.sub("species"))
        read_species(*sp, "source.species", unknown, cfg.source.species);
    }
    if (const json* b = top.sub("beamline")) {
      ObjReader r(*b, "beamline", unknown);
      r.get("select_label", cfg.beamline.select_label);
      r.get("window_amu", cfg.beamline.window_amu);
      r.get("collimation", cfg.beamline.collimation);
      r.get("potential_kv", cfg.beamline.potential_kv);
      r.get("spot_fwhm_nm", cfg.beamline.spot_fwhm_nm);
      r.get("current_override_a", cfg.beamline.current_override_a);
    }
    if (const json* t = top.sub("transport")) {
      ObjReader r(*t, "transport", unknown);
      r.get("cutoff_ev", cfg.transport.settings.cutoff_ev);
      r.get("electronic_stopping_scale",
            cfg.transport.settings.electronic_stopping_scale);
      r.get("depth_bin_nm", cfg.transport.settings.depth_bin_nm);
      r.get("full_cascade", cfg.transport.settings.full_cascade);
      r.get("threads", cfg.transport.settings.threads);
      r.get("histories", cfg.transport.histories);
    }
    if (const json* s = top.sub("sample")) {
      ObjReader r(*s, "sample", unknown);
      r.get("residual_carbon_cm3", cfg.sample.residual_carbon_cm3);
      std::string mode;
      r.get("sampling", mode);
      if (!mode.empty()) {
        if (mode == "poisson")
          cfg.sample.sampling = SamplingMode::poisson;
        else if (mode == "expected")
          cfg.sample.sampling = SamplingMode::expected;
        else
          throw ConfigError("config: sample.sampling must be poisson or expected");
      }
      if (const json* a = r.sub("activation")) {
        ObjReader ra(*a, "sample.activation", unknown);
        auto& m = cfg.sample.activation;
        ra.get("yield_single", m.yield_single);
        ra.get("k_two_step", m.k_two_step);
        ra.get("alpha_two_step", m.alpha_two_step);
        ra.get("gate_single_ions", m.gate_single_ions);
        ra.get("w_gate_ions", m.w_gate_ions);
        ra.get("w_yield", m.w_yield);
        ra.get("w_two_step_factor", m.w_two_step_factor);
        ra.get("residual_g_yield", m.residual_g_yield);
        ra.get("residual_carbon_ref_cm3", m.residual_carbon_ref_cm3);
        ra.get("rate_w_cps", m.rate_w_cps);
        ra.get("rate_g_cps", m.rate_g_cps);
        ra.get("noise_floor_cps", m.noise_floor_cps);
        ra.get("pair_efficiency", m.pair_efficiency);
        ra.get("broad_site_area_nm2", m.broad_site_area_nm2);
      }
    }
    if (const json* o = top.sub("optics")) {
      ObjReader r(*o, "optics", unknown);
      if (const json* w = r.sub("w")) read_spectrum_model(*w, "optics.w", unknown, cfg.optics.w);
      if (const json* g = r.sub("g")) read_spectrum_model(*g, "optics.g", unknown, cfg.optics.g);
      r.get("noise_floor_cps_per_nm", cfg.optics.noise_floor_cps_per_nm);
      r.get("spectrum_longpass_nm", cfg.optics.spectrum_longpass_nm);
      if (const json* m = r.sub("map")) {
        ObjReader rm(*m, "optics.map", unknown);
        rm.get("psf_fwhm_nm", cfg.optics.map.psf_fwhm_nm);
        rm.get("pixel_nm", cfg.optics.map.pixel_nm);
        rm.get("longpass_nm", cfg.optics.map.longpass_nm);
        rm.get("background_cps", cfg.optics.map.background_cps);
        rm.get("integration_s", cfg.optics.map.integration_s);
        rm.get("margin_nm", cfg.optics.map.margin_nm);
      }
    }
    if (const json* p = top.sub("photonstats")) {
      ObjReader r(*p, "photonstats", unknown);
      r.get("n_emitters", cfg.photonstats.hbt.n_emitters);
      r.get("emission_rate_cps", cfg.photonstats.hbt.emission_rate_cps);
      r.get("lifetime_ns", cfg.photonstats.hbt.lifetime_ns);
      r.get("background_rate_cps", cfg.photonstats.hbt.background_rate_cps);
      r.get("duration_s", cfg.photonstats.hbt.duration_s);
      r.get("jitter_ps", cfg.photonstats.hbt.jitter_ps);
      r.get("bin_ns", cfg.photonstats.bin_ns);
      r.get("window_ns", cfg.photonstats.window_ns);
      r.get("rho", cfg.photonstats.rho);
      std::string mode;
      r.get("mode", mode);
      if (!mode.empty()) {
        if (mode == "full")
          cfg.photonstats.mode = CorrelationMode::full;
        else if (mode == "start_stop")
          cfg.photonstats.mode = CorrelationMode::start_stop;
        else
          throw ConfigError("config: photonstats.mode must be full or start_stop");
      }
    }
    if (const json* p = top.sub("patterning")) {
      ObjReader r(*p, "patterning", unknown);
      r.get("pitch_nm", cfg.patterning.pitch_nm);
      r.get("cols", cfg.patterning.cols);
      r.get("rows_n_bar", cfg.patterning.rows_n_bar);
      r.get("placement_jitter_nm", cfg.patterning.placement_jitter_nm);
      r.get("created", cfg.patterning.created);
    }
    if (const json* p = top.sub("protocol")) {
      if (!p->is_array()) throw ConfigError("config: protocol: expected an array");
      int i = 0;
      for (const auto& e : *p)
        cfg.protocol.push_back(
            read_step(e, "protocol[" + std::to_string(i++) + "]", unknown));
    }
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  if (cfg.source.species.empty()) cfg.source.species = default_source_table();
  if (cfg.transport.histories == 0)
    throw ConfigError("config: transport.histories must be > 0");
  if (cfg.patterning.pitch_nm <= 0 || cfg.patterning.cols < 1)
    throw ConfigError("config: patterning pitch/cols invalid");
  if (!(cfg.photonstats.rho > 0) || cfg.photonstats.rho > 1)
    throw ConfigError("config: photonstats.rho outside (0, 1]");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(text);
}

std::string metadata_line(const std::string& config_hex, uint64_t seed) {
  return "# config=" + config_hex + " seed=" + std::to_string(seed) + "\n";
}

}  // namespace fibsim
