#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "qread/dsp.hpp"
#include "qread/sim.hpp"

using namespace qread;
using testing::code;
using testing::thrown_code;

TEST_CASE("noiseless traces settle on the steady states") {
  QubitModel q;
  q.steady_state_0 = {0.5, -0.25};
  q.steady_state_1 = {-0.75, 1.5};
  q.ring_up_tau_ns = 1.0;
  NoiseModel noise{{q}, {}};
  SimConfig cfg;
  cfg.duration_ns = 200;
  cfg.dt_ns = 2;
  cfg.shots_per_basis_state = 3;
  const auto ds = generate(cfg, noise);
  REQUIRE(ds.num_shots() == 6);
  for (std::size_t shot = 0; shot < ds.num_shots(); ++shot) {
    const auto t = ds.trace(shot, 0);
    const IQPoint s = ds.prepared_bit(shot, 0) ? q.steady_state_1 : q.steady_state_0;
    CHECK(t.i[0] == 0.0);
    CHECK(t.q[0] == 0.0);
    // (1 - e^-60) rounds to 1, and these steady states are exact in float32
    for (std::size_t k = 30; k < t.size(); ++k) {
      CHECK(t.i[k] == s.i);
      CHECK(t.q[k] == s.q);
    }
  }
}

TEST_CASE("ring-up and transition envelope against the closed form") {
  QubitModel q;
  q.steady_state_0 = {0.2, 0.1};
  q.steady_state_1 = {1.0, -0.4};
  q.ring_up_tau_ns = 30.0;
  const double dt = 2.0, T = 101.0;
  std::vector<double> ei(200), eq(200);
  qubit_envelope(q, 1, {EventKind::relaxation, T}, dt, ei, eq);
  for (std::size_t k = 0; k < ei.size(); ++k) {
    const double t = k * dt;
    double want_i, want_q;
    if (t < T) {
      want_i = 1.0 * (1 - std::exp(-t / 30));
      want_q = -0.4 * (1 - std::exp(-t / 30));
    } else {
      // solve dz/dt = (S0 - z) / tau from z(T) on the state-1 trajectory
      const double zi = 1.0 * (1 - std::exp(-T / 30)), zq = -0.4 * (1 - std::exp(-T / 30));
      const double ai = 0.2 * (1 - std::exp(-T / 30)), aq = 0.1 * (1 - std::exp(-T / 30));
      const double d = std::exp(-(t - T) / 30);
      want_i = 0.2 * (1 - std::exp(-t / 30)) + (zi - ai) * d;
      want_q = 0.1 * (1 - std::exp(-t / 30)) + (zq - aq) * d;
    }
    CHECK(ei[k] == doctest::Approx(want_i).epsilon(1e-12));
    CHECK(eq[k] == doctest::Approx(want_q).epsilon(1e-12));
  }
  // long after the flip the trace sits on the ground trajectory
  CHECK(ei.back() == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("relaxation fraction follows the exponential law") {
  // t1 equal to the window: P(relax in window) = 1 - 1/e
  auto noise = testing::one_qubit(0.0, 500.0);
  SimConfig cfg;
  cfg.duration_ns = 500;
  cfg.dt_ns = 5;
  cfg.shots_per_basis_state = 4000;
  cfg.seed = 77;
  const auto ds = generate(cfg, noise);
  std::size_t excited = 0, relaxed = 0;
  for (std::size_t s = 0; s < ds.num_shots(); ++s) {
    const auto& ev = ds.ground_truth(s, 0);
    if (ds.prepared_bit(s, 0) == 0) {
      CHECK(ev.kind == EventKind::none);
      continue;
    }
    ++excited;
    if (ev.kind == EventKind::relaxation) {
      ++relaxed;
      CHECK(ev.time_ns >= 0.0);
      CHECK(ev.time_ns < 500.0);
    }
  }
  const double p = 1.0 - std::exp(-1.0);
  const double sd = std::sqrt(p * (1 - p) / excited);
  CHECK(std::abs(static_cast<double>(relaxed) / excited - p) < 4 * sd);
}

TEST_CASE("generation is deterministic and shot-stable") {
  auto noise = testing::two_qubits(0.3, 2000.0);
  SimConfig cfg;
  cfg.num_qubits = 2;
  cfg.duration_ns = 100;
  cfg.shots_per_basis_state = 20;
  cfg.seed = 9;
  const auto a = generate(cfg, noise);
  const auto b = generate(cfg, noise);
  CHECK(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin(), b.samples().end()));
  CHECK(a.ground_truth_table() == b.ground_truth_table());

  cfg.shots_per_basis_state = 10;
  const auto c = generate(cfg, noise);
  for (std::uint32_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 10; ++k)
      for (std::size_t q = 0; q < 2; ++q) {
        const auto x = a.trace(s * 20 + k, q), y = c.trace(s * 10 + k, q);
        CHECK(x.i == y.i);
        CHECK(x.q == y.q);
      }

  cfg.seed = 10;
  const auto d = generate(cfg, noise);
  CHECK_FALSE(std::equal(c.samples().begin(), c.samples().end(), d.samples().begin()));
}

TEST_CASE("noise has the configured spread") {
  SimConfig cfg;
  cfg.duration_ns = 400;
  cfg.dt_ns = 2;
  cfg.shots_per_basis_state = 50;
  cfg.seed = 5;
  auto noisy = testing::one_qubit(0.7);
  auto clean = testing::one_qubit(0.0);
  const auto a = generate(cfg, noisy), b = generate(cfg, clean);
  double ss = 0;
  for (std::size_t k = 0; k < a.samples().size(); ++k) {
    const double d = a.samples()[k] - b.samples()[k];
    ss += d * d;
  }
  const double sd = std::sqrt(ss / a.samples().size());
  CHECK(sd == doctest::Approx(0.7).epsilon(0.03));

  // composite: one white-noise source with the per-qubit variances summed
  auto two = testing::two_qubits(0.3);
  two.qubits[1].noise_sigma = 0.4;
  auto two_clean = testing::two_qubits(0.0);
  cfg.num_qubits = 2;
  cfg.mode = Layout::composite;
  const auto c = generate(cfg, two), d = generate(cfg, two_clean);
  ss = 0;
  for (std::size_t k = 0; k < c.samples().size(); ++k) {
    const double x = c.samples()[k] - d.samples()[k];
    ss += x * x;
  }
  CHECK(std::sqrt(ss / c.samples().size()) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("crosstalk adds a scaled copy of the neighbour") {
  auto noise = testing::two_qubits(0.0);
  noise.crosstalk = {{1.0, 0.1}, {0.0, 1.0}};
  SplitMix64 rng(1);
  std::vector<Trace> env{testing::random_trace(rng, 16), testing::random_trace(rng, 16)};
  const auto mixed = mix_crosstalk(env, noise);
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(mixed[0].i[k] == doctest::Approx(env[0].i[k] + 0.1 * env[1].i[k]).epsilon(1e-14));
    CHECK(mixed[0].q[k] == doctest::Approx(env[0].q[k] + 0.1 * env[1].q[k]).epsilon(1e-14));
    CHECK(mixed[1].i[k] == env[1].i[k]);
  }
}

TEST_CASE("multiplexing then demultiplexing recovers each envelope") {
  auto noise = testing::two_qubits(0.0);
  const double dt = 2.0;
  const std::size_t bins = 500, box = 10;  // 50 MHz spacing is one full cycle per box
  std::vector<Trace> env(2, Trace(bins, dt));
  qubit_envelope(noise.qubits[0], 1, {}, dt, env[0].i, env[0].q);
  qubit_envelope(noise.qubits[1], 1, {EventKind::relaxation, 700.0}, dt, env[1].i, env[1].q);
  const auto line = compose_multiplexed(env, noise);
  // While an envelope is ringing the other tone is not fully rejected, so
  // amplitudes are compared once both envelopes have settled (t >= 8 tau),
  // up to the flip on qubit 2.
  const std::size_t from = 160, to = 350;
  for (std::size_t q = 0; q < 2; ++q) {
    const auto got = dsp::demultiplex(line, noise.qubits[q].if_freq_mhz, box);
    double err = 0, ref = 0;
    for (std::size_t k = from; k < to; ++k) {
      err += std::pow(got.i[k] - env[q].i[k], 2) + std::pow(got.q[k] - env[q].q[k], 2);
      ref += env[q].i[k] * env[q].i[k] + env[q].q[k] * env[q].q[k];
    }
    CHECK(std::sqrt(err / ref) < 0.01);
  }

  // constant amplitudes come back exactly once the box is full
  std::vector<Trace> flat(2, Trace(bins, dt));
  std::fill(flat[0].i.begin(), flat[0].i.end(), 0.6);
  std::fill(flat[1].q.begin(), flat[1].q.end(), -0.9);
  const auto flat_line = compose_multiplexed(flat, noise);
  const auto a = dsp::demultiplex(flat_line, 25.0, box), b = dsp::demultiplex(flat_line, 75.0, box);
  for (std::size_t k = box - 1; k < bins; ++k) {
    CHECK(a.i[k] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(std::abs(a.q[k]) < 1e-9);
    CHECK(std::abs(b.i[k]) < 1e-9);
    CHECK(b.q[k] == doctest::Approx(-0.9).epsilon(1e-9));
  }
}

TEST_CASE("model validation") {
  SimConfig cfg;
  cfg.num_qubits = 2;
  cfg.mode = Layout::composite;
  auto noise = testing::two_qubits(0.1);
  CHECK_NOTHROW(validate(cfg, noise));
  noise.qubits[1].if_freq_mhz = noise.qubits[0].if_freq_mhz + 1.0;  // closer than 2 MHz for a 1 us window
  CHECK(thrown_code([&] { validate(cfg, noise); }) == code(ErrorCode::FrequencyCollision));
  cfg.mode = Layout::demultiplexed;
  CHECK_NOTHROW(validate(cfg, noise));
  noise.qubits[0].steady_state_1 = noise.qubits[0].steady_state_0;
  CHECK(thrown_code([&] { validate(cfg, noise); }) == code(ErrorCode::DegenerateModel));
  auto ok = testing::two_qubits(0.1);
  ok.crosstalk = {{1.0, 0.1}};
  CHECK(thrown_code([&] { validate(cfg, ok); }) == code(ErrorCode::InvalidConfig));
}
