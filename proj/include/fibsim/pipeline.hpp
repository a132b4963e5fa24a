#pragma once
#include <string>
#include <vector>

#include "fibsim/config.hpp"

// Executes the protocol steps from a RunConfig in order, writing per-step
// artifacts (plan, wafer state, emitter lists, spectra, maps).
namespace fibsim {

struct PipelineResult {
  std::vector<std::string> written;   // paths in write order
  std::vector<std::string> warnings;  // e.g. anneal outside the calibrated point
};

PipelineResult run_pipeline(const RunConfig& cfg);

// Beam assembled from the source + beamline sections (or the measured-current
// override).
FilteredBeam beam_from_config(const RunConfig& cfg);

}  // namespace fibsim
