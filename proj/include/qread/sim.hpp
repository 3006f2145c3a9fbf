#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "qread/trace.hpp"

namespace qread {

/// Readout response of one qubit's resonator.
struct QubitModel {
  IQPoint steady_state_0{};
  IQPoint steady_state_1{1.0, 0.0};
  double ring_up_tau_ns = 50.0;
  double t1_ns = std::numeric_limits<double>::infinity();
  double if_freq_mhz = 0.0;
  double noise_sigma = 0.0;      ///< per-sample, per-channel Gaussian std
  double excitation_prob = 0.0;  ///< probability of a 0->1 flip inside the window
};

struct NoiseModel {
  std::vector<QubitModel> qubits;
  /// crosstalk[q][p]: weight of qubit p's envelope in qubit q's channel.
  /// Empty means identity.
  std::vector<std::vector<double>> crosstalk;

  double alpha(std::size_t q, std::size_t p) const {
    if (crosstalk.empty()) return q == p ? 1.0 : 0.0;
    return crosstalk[q][p];
  }
};

struct SimConfig {
  int num_qubits = 1;
  double duration_ns = 1000.0;
  double dt_ns = 2.0;
  std::size_t shots_per_basis_state = 1000;
  std::uint64_t seed = 0;
  Layout mode = Layout::demultiplexed;

  std::size_t num_bins() const;
};

/// Throws DegenerateModel, FrequencyCollision or InvalidConfig.
void validate(const SimConfig& config, const NoiseModel& noise);

/// Noiseless single-qubit envelope for a prepared state with an optional
/// in-window transition. Written into `env_i` / `env_q` at t_k = k * dt.
void qubit_envelope(const QubitModel& qubit, int prepared_bit, const TransitionEvent& event, double dt_ns,
                    std::span<double> env_i, std::span<double> env_q);

/// Synthetic labeled dataset, shots ordered by basis state then shot index.
/// Every random draw comes from a stream keyed by (state, shot, qubit,
/// purpose), so shot k of state s is the same whatever the shot count.
LabeledDataset generate(const SimConfig& config, const NoiseModel& noise);

/// Mixes per-qubit envelopes through the crosstalk matrix and sums them on
/// their IF tones: composite(t) = sum_q m_q(t) exp(i 2 pi f_q t).
Trace compose_multiplexed(std::span<const Trace> per_qubit, const NoiseModel& noise);

/// Applies the crosstalk matrix only (the demultiplexed-layout observation).
std::vector<Trace> mix_crosstalk(std::span<const Trace> per_qubit, const NoiseModel& noise);

}  // namespace qread
