// Acceptance run on the frozen reference experiment. One line per criterion;
// exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "qread/config.hpp"
#include "qread/dsp.hpp"
#include "qread/metrics.hpp"
#include "qread/neural.hpp"
#include "qread/pipeline.hpp"
#include "qread/relaxation.hpp"
#include "qread/rng.hpp"
#include "qread/sim.hpp"

using namespace qread;
using pipeline::Kind;
using nlohmann::json;

namespace {

int failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Recipe {
  LabeledDataset ds;
  DatasetSplit split;
  std::vector<pipeline::Pipeline> pipes;  // mf, mf_nn, mf_rmf_nn
  json metrics;
};

// generate -> split -> fit the three feature pipelines -> evaluate at full,
// 75% and 50% of the window in float and 16-bit fixed point.
Recipe run_recipe(const ExperimentConfig& cfg) {
  Recipe r;
  r.ds = generate(cfg.sim, cfg.noise);
  r.split = split_dataset(r.ds, cfg.split, cfg.split_seed);
  const std::size_t full = r.ds.num_bins();
  const std::vector<std::size_t> windows{full, full * 3 / 4, full / 2};
  r.metrics = json::object();
  r.metrics["config_hash"] = config_hash(cfg);
  r.metrics["seed"] = cfg.sim.seed;
  for (Kind k : {Kind::mf, Kind::mf_nn, Kind::mf_rmf_nn}) {
    auto p = pipeline::fit(k, r.ds, r.split, cfg.fit);
    json rows = json::array();
    for (std::size_t w : windows) rows.push_back(metrics::to_json(metrics::evaluate(p, r.ds, r.split.test, w)));
    if (p.quantized)
      rows.push_back(metrics::to_json(
          metrics::evaluate(p, r.ds, r.split.test, full, {pipeline::Precision::fixed_point, 1})));
    r.metrics[std::string(pipeline::kind_name(k))] = rows;
    r.pipes.push_back(std::move(p));
  }
  return r;
}

double cumulative(const json& rows, std::size_t idx) { return rows.at(idx).at("cumulative").get<double>(); }

}  // namespace

int main() {
  const auto t_start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = reference_config();
  const int n = cfg.sim.num_qubits;

  // A1
  {
    const std::vector<double> f{0.985, 0.754, 0.966, 0.962, 0.989};
    const double got = metrics::cumulative_accuracy(f);
    report("A1", std::abs(got - 0.9266) <= 1e-3, fmt("F_5Q = %.6f, expected 0.9266 +- 1e-3", got));
  }

  // A2
  const auto t_recipe = std::chrono::steady_clock::now();
  Recipe first = run_recipe(cfg);
  const double recipe_s = seconds_since(t_recipe);
  const auto& ds = first.ds;
  const auto& split = first.split;
  {
    bool fractions_ok = true;
    std::string fr;
    for (int q = 0; q < n; ++q) {
      std::size_t excited = 0, relaxed = 0;
      for (std::size_t s = 0; s < ds.num_shots(); ++s)
        if (ds.prepared_bit(s, q)) {
          ++excited;
          relaxed += ds.ground_truth(s, q).kind == EventKind::relaxation;
        }
      const double frac = static_cast<double>(relaxed) / excited;
      fractions_ok = fractions_ok && frac >= 0.08 && frac <= 0.12;
      fr += fmt("%s%.4f", q ? "/" : "", frac);
    }
    double max_xt = 0;
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < n; ++p)
        if (p != q) max_xt = std::max(max_xt, std::abs(cfg.noise.alpha(q, p)));
    const double mf = cumulative(first.metrics["mf"], 0);
    const double nn = cumulative(first.metrics["mf_nn"], 0);
    const double rmf = cumulative(first.metrics["mf_rmf_nn"], 0);
    const bool rmf_active = first.pipes[2].kind == Kind::mf_rmf_nn;
    const bool ok = fractions_ok && split.test.size() >= 20000 && max_xt <= 0.2 && rmf_active && mf <= nn &&
                    nn <= rmf && rmf - nn >= 0.005;
    report("A2", ok,
           fmt("MF %.4f <= MF-NN %.4f <= MF-RMF-NN %.4f, gain %.2fpp (>= 0.5pp); relax fraction %s (8-12%%); "
               "test shots %zu; max crosstalk %.2f; recipe %.1fs",
               mf, nn, rmf, 100 * (rmf - nn), fr.c_str(), split.test.size(), max_xt, recipe_s));
  }

  // A3
  {
    bool ok = true;
    std::string detail;
    const double horizon = cfg.sim.duration_ns / 2;
    for (int q = 0; q < n; ++q) {
      std::vector<Trace> t0, t1;
      std::vector<TransitionEvent> truth;
      for (std::size_t s : split.train) {
        auto tr = pipeline::qubit_traces(ds, s, cfg.fit.demux_boxcar);
        if (ds.prepared_bit(s, q)) {
          t1.push_back(std::move(tr[q]));
          truth.push_back(ds.ground_truth(s, q));
        } else {
          t0.push_back(std::move(tr[q]));
        }
      }
      const std::vector<TraceView> v0(t0.begin(), t0.end()), v1(t1.begin(), t1.end());
      const auto rep = relax::label_relaxations(v0, v1);
      const auto lq = relax::score_labels(rep, truth, horizon);
      ok = ok && lq.recall >= 0.7 && lq.precision >= 0.7;
      detail += fmt("q%d recall %.3f precision %.3f (%zu flagged, %zu true); ", q + 1, lq.recall, lq.precision,
                    lq.flagged, lq.true_events);
    }
    report("A3", ok, detail + "thresholds 0.7/0.7, events in first 50% of window");
  }

  // A4
  {
    const auto& p = first.pipes[2];
    const std::size_t full = p.trained_bins;
    const auto before = nn::training_invocations();
    const double f100 = metrics::evaluate(p, ds, split.test, full).cumulative;
    const double f75 = metrics::evaluate(p, ds, split.test, full * 3 / 4).cumulative;
    const double f50 = metrics::evaluate(p, ds, split.test, full / 2).cumulative;
    const bool untouched = nn::training_invocations() == before;
    report("A4", untouched && f100 - f75 <= 0.015 && f50 < f75,
           fmt("full %.4f -> 75%% %.4f (loss %.2fpp <= 1.5pp) -> 50%% %.4f (< 75%%); training calls during "
               "inference: %llu",
               f100, f75, 100 * (f100 - f75), f50,
               static_cast<unsigned long long>(nn::training_invocations() - before)));
  }

  // A5
  {
    SplitMix64 rng(5);
    auto m = nn::build(nn::NetworkSpec{4, {6, 8}, 4}, 17);
    for (auto& l : m.layers)
      for (auto& b : l.bias) b = 0.1 * rng.normal();
    nn::FeatureMatrix x(24, 4);
    std::vector<std::uint32_t> y(24);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < 4; ++c) x.at(r, c) = rng.normal();
      y[r] = static_cast<std::uint32_t>(rng.below(4));
    }
    nn::Gradients g;
    nn::loss_and_gradient(m, x, y, g);
    const double eps = 1e-5;
    double worst = 0;
    auto probe = [&](double& w, double analytic) {
      const double keep = w;
      w = keep + eps;
      const double up = nn::cross_entropy(m, x, y);
      w = keep - eps;
      const double down = nn::cross_entropy(m, x, y);
      w = keep;
      const double numeric = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    };
    std::size_t params = 0;
    for (std::size_t l = 0; l < 3; ++l) {
      for (std::size_t k = 0; k < m.layers[l].weights.size(); ++k, ++params) probe(m.layers[l].weights[k], g.weights[l][k]);
      for (std::size_t k = 0; k < m.layers[l].bias.size(); ++k, ++params) probe(m.layers[l].bias[k], g.bias[l][k]);
    }
    report("A5", worst <= 1e-4, fmt("max relative error %.3g over %zu parameters (<= 1e-4)", worst, params));
  }

  // A6. Qubit 1 alone, noisy enough to sit near 96%. The filter estimates
  // 1000 coefficients from the training traces, so it needs far more of
  // them than the two-parameter MTV axis; 10k traces per class keeps that
  // estimation noise well below the comparison margin.
  {
    ExperimentConfig g = cfg;
    g.sim.num_qubits = 1;
    g.sim.mode = Layout::demultiplexed;
    g.sim.shots_per_basis_state = 20000;
    g.sim.seed = 606;
    g.noise.qubits = {cfg.noise.qubits[0]};
    g.noise.qubits[0].t1_ns = std::numeric_limits<double>::infinity();
    g.noise.qubits[0].noise_sigma = 6.0;
    g.noise.crosstalk.clear();
    const auto gds = generate(g.sim, g.noise);
    const auto gsplit = split_dataset(gds, {0.5, 0.0001, 0.4999}, 1);
    std::vector<Trace> t0, t1;
    for (std::size_t s : gsplit.train) (gds.prepared_bit(s, 0) ? t1 : t0).push_back(gds.trace(s, 0));
    const std::vector<TraceView> v0(t0.begin(), t0.end()), v1(t1.begin(), t1.end());
    const auto mf = dsp::train_mf(v0, v1);
    // MTV baseline: project the mean trace value on the centroid axis and
    // choose its cut the same way as the filter's
    const auto cd = dsp::train_centroid(v0, v1);
    const IQPoint axis{cd.centroid_1.i - cd.centroid_0.i, cd.centroid_1.q - cd.centroid_0.q};
    auto mtv_score = [&](TraceView t) {
      const auto m = mean_trace_value(t);
      return m.i * axis.i + m.q * axis.q;
    };
    std::vector<double> s0, s1;
    for (const auto& t : v0) s0.push_back(mtv_score(t));
    for (const auto& t : v1) s1.push_back(mtv_score(t));
    const double mtv_cut = dsp::select_threshold(s0, s1);
    std::size_t ok_mf = 0, ok_mtv = 0;
    for (std::size_t s : gsplit.test) {
      const auto t = gds.trace(s, 0);
      const int bit = gds.prepared_bit(s, 0);
      ok_mf += (dsp::apply_mf(mf, t) > mf.threshold) == (bit == 1);
      ok_mtv += (mtv_score(t) > mtv_cut) == (bit == 1);
    }
    const double a_mf = static_cast<double>(ok_mf) / gsplit.test.size();
    const double a_mtv = static_cast<double>(ok_mtv) / gsplit.test.size();
    report("A6", gds.num_shots() >= 10000 && a_mf >= a_mtv - 0.002,
           fmt("MF %.4f vs MTV %.4f on %zu test shots (%zu total, Gaussian, no transitions)", a_mf, a_mtv,
               gsplit.test.size(), gds.num_shots()));
  }

  // A7
  {
    const auto second = run_recipe(cfg);
    const std::string a = first.metrics.dump(), b = second.metrics.dump();
    report("A7", a == b, fmt("metrics JSON %zu bytes, runs %s", a.size(), a == b ? "byte-identical" : "differ"));
  }

  // A8
  {
    bool ok = true;
    std::string detail;
    for (const char* k : {"mf_nn", "mf_rmf_nn"}) {
      const auto& rows = first.metrics[k];
      const double f = cumulative(rows, 0), q = cumulative(rows, 3);
      ok = ok && std::abs(f - q) <= 0.002;
      detail += fmt("%s float %.4f fixed16 %.4f (|d| %.3fpp); ", k, f, q, 100 * std::abs(f - q));
    }
    report("A8", ok, detail + "limit 0.2pp");
  }

  // A9
  {
    ExperimentConfig c = cfg;
    c.sim.shots_per_basis_state = 40;
    for (auto& q : c.noise.qubits) {
      q.noise_sigma = 0;
      q.t1_ns = std::numeric_limits<double>::infinity();
    }
    const auto cds = generate(c.sim, c.noise);
    const auto csplit = split_dataset(cds, c.split, c.split_seed);
    bool ok = true;
    std::string detail;
    for (Kind k : {Kind::mf, Kind::mf_nn, Kind::mf_rmf_nn, Kind::raw_fnn}) {
      const auto p = pipeline::fit(k, cds, csplit, c.fit);
      const double f = metrics::evaluate(p, cds, csplit.test, p.trained_bins).cumulative;
      ok = ok && f == 1.0;
      detail += fmt("%s %.4f; ", std::string(pipeline::kind_name(k)).c_str(), f);
    }
    report("A9", ok, detail + "noiseless, relaxation-free");
  }

  // A10
  {
    SplitMix64 rng(1010);
    double worst_mf = 0, worst_box = 0, worst_mtv = 0;
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t len = 1 + rng.below(600);
      Trace e(len, 2.0), x(len, 2.0);
      for (std::size_t k = 0; k < len; ++k) {
        e.i[k] = rng.normal();
        e.q[k] = rng.normal();
        x.i[k] = 3 * rng.normal() + 1;
        x.q[k] = 3 * rng.normal() - 1;
      }
      const dsp::MatchedFilter mf{e.i, e.q, 0.0, dsp::FilterKind::state};
      const std::size_t use = 1 + rng.below(len);
      worst_mf = std::max(worst_mf, oracle::rel_err(dsp::apply_mf(mf, x, use),
                                                    oracle::mf_output(e.i, e.q, x.i, x.q, use)));
      const std::size_t k = 1 + rng.below(std::min<std::size_t>(len, 64));
      const auto b = dsp::boxcar(x, k, false);
      worst_box = std::max({worst_box, oracle::rel_err_norm(b.i, oracle::boxcar(x.i, k)),
                            oracle::rel_err_norm(b.q, oracle::boxcar(x.q, k))});
      const auto m = mean_trace_value(x), want = oracle::mtv(x.i, x.q);
      worst_mtv = std::max({worst_mtv, oracle::rel_err(m.i, want.i), oracle::rel_err(m.q, want.q)});
    }
    report("A10", worst_mf <= 1e-12 && worst_box <= 1e-12 && worst_mtv <= 1e-12,
           fmt("max relative error apply_mf %.2g, boxcar %.2g, mean_trace_value %.2g over 100 inputs (<= 1e-12)",
               worst_mf, worst_box, worst_mtv));
  }

  std::printf("%d of 10 criteria failed; total %.1fs\n", failures, seconds_since(t_start));
  return failures;
}
