#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "qread/pipeline.hpp"
#include "qread/sim.hpp"
#include "qread/trace.hpp"

namespace qread {

/// Everything an experiment needs: simulator, split, and fitting settings.
/// Read from a YAML file with sections sim / qubits / crosstalk / split /
/// train / pipeline; absent keys keep the defaults below.
struct ExperimentConfig {
  SimConfig sim;
  NoiseModel noise;
  SplitRatios split;
  std::uint64_t split_seed = 0;
  pipeline::FitConfig fit;
};

/// Throws FileNotFound or InvalidConfig.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);

/// Canonical YAML rendering; load(emit(c)) == c.
std::string emit_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical rendering, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// The frozen three-qubit reference experiment (also shipped as
/// configs/ref3q.yaml).
ExperimentConfig reference_config();

}  // namespace qread
