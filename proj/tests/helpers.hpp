#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qread/error.hpp"
#include "qread/rng.hpp"
#include "qread/sim.hpp"
#include "qread/trace.hpp"

namespace testing {

inline qread::Trace random_trace(qread::SplitMix64& rng, std::size_t bins, double scale = 1.0, double dt = 2.0) {
  qread::Trace t(bins, dt);
  for (std::size_t k = 0; k < bins; ++k) {
    t.i[k] = scale * (2.0 * rng.uniform() - 1.0);
    t.q[k] = scale * (2.0 * rng.uniform() - 1.0);
  }
  return t;
}

inline std::vector<qread::TraceView> views(const std::vector<qread::Trace>& ts) {
  return std::vector<qread::TraceView>(ts.begin(), ts.end());
}

inline double rel_err(double a, double b) {
  const double d = std::abs(a - b);
  const double s = std::max({std::abs(a), std::abs(b), 1e-300});
  return d / s;
}

// Error code thrown by `f`, or -1 if it returns normally.
template <typename F>
int thrown_code(F&& f) {
  try {
    f();
  } catch (const qread::Error& e) {
    return static_cast<int>(e.code());
  }
  return -1;
}

inline int code(qread::ErrorCode c) { return static_cast<int>(c); }

// Small two-state, one-qubit model with well separated levels.
inline qread::NoiseModel one_qubit(double sigma, double t1 = std::numeric_limits<double>::infinity()) {
  qread::QubitModel q;
  q.steady_state_0 = {0.0, 0.0};
  q.steady_state_1 = {1.0, 0.5};
  q.ring_up_tau_ns = 40.0;
  q.t1_ns = t1;
  q.if_freq_mhz = 50.0;
  q.noise_sigma = sigma;
  return {{q}, {}};
}

// Two qubits on separate tones, used for multiplexing tests.
inline qread::NoiseModel two_qubits(double sigma, double t1 = std::numeric_limits<double>::infinity()) {
  qread::QubitModel a;
  a.steady_state_0 = {0.0, 0.0};
  a.steady_state_1 = {1.0, 0.0};
  a.ring_up_tau_ns = 40.0;
  a.t1_ns = t1;
  a.if_freq_mhz = 25.0;
  a.noise_sigma = sigma;
  qread::QubitModel b = a;
  b.steady_state_0 = {0.25, 0.0};
  b.steady_state_1 = {0.0, 1.0};
  b.if_freq_mhz = 75.0;
  return {{a, b}, {}};
}

}  // namespace testing
