#include "qread/sim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qread/error.hpp"
#include "qread/rng.hpp"

namespace qread {

namespace {

enum Purpose : std::uint64_t { kEventStream = 1, kNoiseStream = 2 };

void check_lengths(std::span<const Trace> traces) {
  if (traces.empty()) throw Error(ErrorCode::LengthMismatch, "no traces to combine");
  for (const auto& tr : traces) {
    if (tr.i.size() != traces[0].size() || tr.q.size() != traces[0].size())
      throw Error(ErrorCode::LengthMismatch, "per-qubit traces differ in length");
    if (tr.dt_ns != traces[0].dt_ns) throw Error(ErrorCode::LengthMismatch, "per-qubit traces differ in dt");
  }
}

double phase(double f_mhz, double t_ns) { return 2.0 * std::numbers::pi * f_mhz * t_ns * 1e-3; }

}  // namespace

std::size_t SimConfig::num_bins() const { return static_cast<std::size_t>(std::llround(duration_ns / dt_ns)); }

void validate(const SimConfig& config, const NoiseModel& noise) {
  const auto n = static_cast<std::size_t>(config.num_qubits);
  if (config.num_qubits < 1 || config.num_qubits > 16)
    throw Error(ErrorCode::InvalidConfig, "num_qubits must be in [1, 16]");
  if (!(config.dt_ns > 0.0) || !(config.duration_ns > 0.0))
    throw Error(ErrorCode::InvalidConfig, "duration_ns and dt_ns must be positive");
  const double ratio = config.duration_ns / config.dt_ns;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw Error(ErrorCode::InvalidConfig, "duration_ns must be a multiple of dt_ns");
  if (config.shots_per_basis_state < 1) throw Error(ErrorCode::InvalidConfig, "shots_per_basis_state must be >= 1");
  if (noise.qubits.size() != n) throw Error(ErrorCode::InvalidConfig, "noise model must describe every qubit");

  for (std::size_t q = 0; q < n; ++q) {
    const auto& m = noise.qubits[q];
    const std::string who = "qubit " + std::to_string(q + 1);
    if (m.steady_state_0.i == m.steady_state_1.i && m.steady_state_0.q == m.steady_state_1.q)
      throw Error(ErrorCode::DegenerateModel, who + " has identical steady states");
    if (!(m.t1_ns > 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": t1 must be positive");
    if (!(m.ring_up_tau_ns > 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": ring_up_tau must be positive");
    if (!(m.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, who + ": noise_sigma must be >= 0");
    if (!(m.excitation_prob >= 0.0 && m.excitation_prob < 0.5))
      throw Error(ErrorCode::InvalidConfig, who + ": excitation_prob must be in [0, 0.5)");
  }

  if (!noise.crosstalk.empty()) {
    if (noise.crosstalk.size() != n) throw Error(ErrorCode::InvalidConfig, "crosstalk must be N x N");
    for (std::size_t q = 0; q < n; ++q) {
      if (noise.crosstalk[q].size() != n) throw Error(ErrorCode::InvalidConfig, "crosstalk must be N x N");
      if (noise.crosstalk[q][q] != 1.0) throw Error(ErrorCode::InvalidConfig, "crosstalk diagonal must be 1");
      for (double a : noise.crosstalk[q])
        if (!(std::abs(a) <= 1.0)) throw Error(ErrorCode::InvalidConfig, "crosstalk entries must satisfy |a| <= 1");
    }
  }

  if (config.mode == Layout::composite) {
    const double min_spacing = 2000.0 / config.duration_ns;  // 2 / duration, in MHz
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (std::abs(noise.qubits[a].if_freq_mhz - noise.qubits[b].if_freq_mhz) < min_spacing)
          throw Error(ErrorCode::FrequencyCollision, "qubits " + std::to_string(a + 1) + " and " +
                                                         std::to_string(b + 1) + " have IF tones closer than " +
                                                         std::to_string(min_spacing) + " MHz");
  }
}

void qubit_envelope(const QubitModel& qubit, int prepared_bit, const TransitionEvent& event, double dt_ns,
                    std::span<double> env_i, std::span<double> env_q) {
  const IQPoint from = prepared_bit ? qubit.steady_state_1 : qubit.steady_state_0;
  const IQPoint to = prepared_bit ? qubit.steady_state_0 : qubit.steady_state_1;
  const double tau = qubit.ring_up_tau_ns;
  const bool flips = event.kind != EventKind::none;

  // Offset between the two ring-up trajectories at the flip instant; it then
  // decays onto the destination trajectory with the same time constant.
  double gap_i = 0.0;
  double gap_q = 0.0;
  if (flips) {
    const double rise = 1.0 - std::exp(-event.time_ns / tau);
    gap_i = (from.i - to.i) * rise;
    gap_q = (from.q - to.q) * rise;
  }

  for (std::size_t k = 0; k < env_i.size(); ++k) {
    const double t = static_cast<double>(k) * dt_ns;
    const double rise = 1.0 - std::exp(-t / tau);
    if (flips && t >= event.time_ns) {
      const double fall = std::exp(-(t - event.time_ns) / tau);
      env_i[k] = to.i * rise + gap_i * fall;
      env_q[k] = to.q * rise + gap_q * fall;
    } else {
      env_i[k] = from.i * rise;
      env_q[k] = from.q * rise;
    }
  }
}

std::vector<Trace> mix_crosstalk(std::span<const Trace> per_qubit, const NoiseModel& noise) {
  check_lengths(per_qubit);
  const std::size_t n = per_qubit.size();
  const std::size_t bins = per_qubit[0].size();
  std::vector<Trace> mixed(n, Trace(bins, per_qubit[0].dt_ns));
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t p = 0; p < n; ++p) {
      const double a = noise.alpha(q, p);
      if (a == 0.0) continue;
      for (std::size_t k = 0; k < bins; ++k) {
        mixed[q].i[k] += a * per_qubit[p].i[k];
        mixed[q].q[k] += a * per_qubit[p].q[k];
      }
    }
  return mixed;
}

Trace compose_multiplexed(std::span<const Trace> per_qubit, const NoiseModel& noise) {
  const auto mixed = mix_crosstalk(per_qubit, noise);
  const std::size_t bins = mixed[0].size();
  const double dt = mixed[0].dt_ns;
  Trace out(bins, dt);
  for (std::size_t q = 0; q < mixed.size(); ++q) {
    const double f = q < noise.qubits.size() ? noise.qubits[q].if_freq_mhz : 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double ph = phase(f, static_cast<double>(k) * dt);
      const double c = std::cos(ph);
      const double s = std::sin(ph);
      out.i[k] += mixed[q].i[k] * c - mixed[q].q[k] * s;
      out.q[k] += mixed[q].i[k] * s + mixed[q].q[k] * c;
    }
  }
  return out;
}

LabeledDataset generate(const SimConfig& config, const NoiseModel& noise) {
  validate(config, noise);
  const auto n = static_cast<std::size_t>(config.num_qubits);
  const std::size_t bins = config.num_bins();
  const std::size_t num_states = std::size_t{1} << n;
  const std::size_t shots = config.shots_per_basis_state;
  const std::size_t total = num_states * shots;
  const bool composite = config.mode == Layout::composite;
  const std::size_t traces_per_shot = composite ? 1 : n;
  const std::size_t shot_stride = traces_per_shot * 2 * bins;

  std::vector<std::uint32_t> states(total);
  std::vector<float> samples(total * shot_stride);
  std::vector<TransitionEvent> truth(total * n);
  std::vector<Trace> envelopes(n, Trace(bins, config.dt_ns));

  double composite_sigma = 0.0;
  for (const auto& qm : noise.qubits) composite_sigma += qm.noise_sigma * qm.noise_sigma;
  composite_sigma = std::sqrt(composite_sigma);

  for (std::size_t s = 0; s < num_states; ++s) {
    for (std::size_t k = 0; k < shots; ++k) {
      const std::size_t shot = s * shots + k;
      states[shot] = static_cast<std::uint32_t>(s);

      for (std::size_t q = 0; q < n; ++q) {
        const auto& qm = noise.qubits[q];
        const int bit = static_cast<int>((s >> q) & 1u);
        SplitMix64 events(derive_seed(config.seed, {s, k, q, kEventStream}));
        TransitionEvent ev;
        if (bit == 1 && std::isfinite(qm.t1_ns)) {
          const double t = -qm.t1_ns * std::log(events.uniform_open0());
          if (t < config.duration_ns) ev = {EventKind::relaxation, t};
        } else if (bit == 0 && qm.excitation_prob > 0.0) {
          const double u = events.uniform();
          const double when = events.uniform() * config.duration_ns;
          if (u < qm.excitation_prob) ev = {EventKind::excitation, when};
        }
        truth[shot * n + q] = ev;
        qubit_envelope(qm, bit, ev, config.dt_ns, envelopes[q].i, envelopes[q].q);
      }

      float* dst = samples.data() + shot * shot_stride;
      if (composite) {
        const Trace line = compose_multiplexed(envelopes, noise);
        SplitMix64 rng(derive_seed(config.seed, {s, k, n, kNoiseStream}));
        for (std::size_t t = 0; t < bins; ++t) dst[t] = static_cast<float>(line.i[t] + composite_sigma * rng.normal());
        for (std::size_t t = 0; t < bins; ++t)
          dst[bins + t] = static_cast<float>(line.q[t] + composite_sigma * rng.normal());
      } else {
        const auto mixed = mix_crosstalk(envelopes, noise);
        for (std::size_t q = 0; q < n; ++q) {
          const double sigma = noise.qubits[q].noise_sigma;
          SplitMix64 rng(derive_seed(config.seed, {s, k, q, kNoiseStream}));
          float* tr = dst + q * 2 * bins;
          for (std::size_t t = 0; t < bins; ++t) tr[t] = static_cast<float>(mixed[q].i[t] + sigma * rng.normal());
          for (std::size_t t = 0; t < bins; ++t)
            tr[bins + t] = static_cast<float>(mixed[q].q[t] + sigma * rng.normal());
        }
      }
    }
  }

  std::vector<double> if_freq;
  if (composite)
    for (const auto& qm : noise.qubits) if_freq.push_back(qm.if_freq_mhz);
  return LabeledDataset(config.num_qubits, config.mode, bins, config.dt_ns, std::move(states), std::move(samples),
                        std::move(truth), std::move(if_freq));
}

}  // namespace qread
