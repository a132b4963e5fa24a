#include "fibsim/pipeline.hpp"

#include <map>
#include <stdexcept>

#include "fibsim/elements.hpp"
#include "fibsim/io.hpp"
#include "fibsim/patterning.hpp"
#include "json.hpp"

namespace fibsim {

FilteredBeam beam_from_config(const RunConfig& cfg) {
  MassSpectrum spec = build_spectrum(cfg.source.species, cfg.source.peak_width_amu);
  const IonSpecies* sel = nullptr;
  for (const auto& s : cfg.source.species)
    if (s.label == cfg.beamline.select_label) {
      sel = &s;
      break;
    }
  if (!sel)
    throw ConfigError("config: beamline.select_label '" + cfg.beamline.select_label +
                      "' not in the source table");
  TransmissionResult tr =
      select_species(spec, sel->m_over_q(), cfg.beamline.window_amu);
  double current = cfg.beamline.current_override_a;
  if (current <= 0)
    current = beam_current(cfg.source.total_emission_a, *sel,
                           tr.transmission_of(sel->label), cfg.beamline.collimation);
  return make_beam(*sel, cfg.beamline.potential_kv, current,
                   cfg.beamline.spot_fwhm_nm);
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult res;
  const std::string dir = cfg.resolved_output_dir();
  const std::string meta = metadata_line(cfg.config_hex, cfg.seed);

  auto emit_csv = [&](const std::string& name, const std::string& body) {
    std::string path = dir + "/" + name;
    write_file_atomic(path, meta + body);
    res.written.push_back(path);
  };
  auto emit_json = [&](const std::string& name, nlohmann::json j) {
    j["config"] = cfg.config_hex;
    j["seed"] = cfg.seed;
    std::string path = dir + "/" + name;
    write_file_atomic(path, j.dump(2) + "\n");
    res.written.push_back(path);
  };

  FilteredBeam beam = beam_from_config(cfg);
  TargetMaterial target = TargetMaterial::silicon();

  // one transport ensemble per (element, landing energy), reused across steps
  std::map<std::pair<std::string, double>, ImplantProfile> profiles;
  auto profile_for = [&](const std::string& symbol, double energy_kev)
      -> const ImplantProfile& {
    auto key = std::make_pair(symbol, energy_kev);
    auto it = profiles.find(key);
    if (it == profiles.end())
      it = profiles
               .emplace(key, simulate_ensemble(element(symbol), energy_kev, target,
                                               cfg.transport.histories, cfg.seed,
                                               cfg.transport.settings))
               .first;
    return it->second;
  };

  Wafer wafer;
  wafer.residual_carbon_cm3 = cfg.sample.residual_carbon_cm3;
  wafer.depth_bin_nm = cfg.transport.settings.depth_bin_nm;
  const ActivationModel& model = cfg.sample.activation;
  bool expected = cfg.sample.sampling == SamplingMode::expected;
  EmitterField field;

  int k = 0;
  for (const auto& step : cfg.protocol) {
    ++k;
    std::string prefix = "step" + std::to_string(k) + "_";

    if (step.op == "implant_broad") {
      const auto& profile = profile_for(step.species, step.energy_kev);
      wafer = implant_broad(wafer, step.species, step.energy_kev, step.fluence_cm2,
                            profile);
    } else if (step.op == "anneal") {
      wafer = anneal(wafer, step.temperature_c, step.duration_h,
                     model.pair_efficiency);
      if (!wafer.anneals.back().calibrated)
        res.warnings.push_back("step " + std::to_string(k) +
                               ": anneal outside the calibrated 500 C / 2 h point; "
                               "extrapolating the calibrated rule");
      field = EmitterField{};  // emitters erased with the damage
    } else if (step.op == "implant_spots") {
      if (cfg.patterning.rows_n_bar.empty())
        throw std::runtime_error("implant_spots: patterning.rows_n_bar is empty");
      double energy =
          step.energy_kev > 0 ? step.energy_kev : beam.landing_energy_kev;
      FilteredBeam b = beam;
      b.landing_energy_kev = energy;
      ExposurePlan plan =
          plan_grid(cfg.patterning.rows_n_bar, cfg.patterning.cols,
                    cfg.patterning.pitch_nm, b, cfg.seed, cfg.patterning.created);
      plan.header.config = cfg.config_hex;
      {
        std::string path = dir + "/" + prefix + "plan.csv";
        write_plan(path, plan);
        res.written.push_back(path);
      }
      const auto& profile = profile_for(beam.species.element, energy);
      Rng rng(cfg.seed, 0xA000u + static_cast<uint64_t>(k));
      double jitter = cfg.patterning.placement_jitter_nm;
      for (const auto& spot : plan.spots) {
        double x = spot.x_nm, y = spot.y_nm;
        if (!expected && jitter > 0) {
          x += rng.normal() * jitter;
          y += rng.normal() * jitter;
        }
        wafer = implant_spot(wafer, x, y, beam.species.element, energy,
                             spot.expected_ions, rng, &profile, cfg.sample.sampling);
      }
    } else if (step.op == "activate") {
      field = activate_emitters(wafer, model,
                                cfg.seed ^ (0xac7156a7e0000000ull + k),
                                cfg.sample.sampling);
      emit_csv(prefix + "emitters.csv", emitter_field_csv(field));
    } else if (step.op == "spectrum") {
      EmitterSite agg;
      for (const auto& s : field.sites) {
        agg.n_w += s.n_w;
        agg.n_g += s.n_g;
      }
      Spectrum sp = compose_spectrum(agg, cfg.optics.w, cfg.optics.g,
                                     model.rate_w_cps, model.rate_g_cps,
                                     cfg.optics.spectrum_longpass_nm,
                                     cfg.optics.noise_floor_cps_per_nm);
      emit_csv(step.out.empty() ? prefix + "spectrum.csv" : step.out,
               spectrum_csv(sp));
    } else if (step.op == "scan") {
      PLMap map = confocal_scan(field, cfg.optics.w, cfg.optics.g, model.rate_w_cps,
                                model.rate_g_cps, cfg.optics.map,
                                cfg.seed ^ (0x5ca40000ull + k));
      emit_csv(step.out.empty() ? prefix + "map.csv" : step.out, map_csv(map));
      emit_json(prefix + "map_meta.json",
                nlohmann::json::parse(map_metadata_json(map)));
    } else {
      throw std::runtime_error("pipeline: unknown op '" + step.op + "'");
    }
    emit_json(prefix + "wafer.json", nlohmann::json::parse(wafer_json(wafer)));
  }
  return res;
}

}  // namespace fibsim
