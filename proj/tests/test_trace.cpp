#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "qread/trace.hpp"

using namespace qread;
using testing::code;
using testing::thrown_code;

namespace {

LabeledDataset tiny_dataset(int n, std::size_t shots_per_state, std::size_t bins = 4) {
  std::vector<std::uint32_t> states;
  for (std::uint32_t s = 0; s < (1u << n); ++s)
    for (std::size_t k = 0; k < shots_per_state; ++k) states.push_back(s);
  std::vector<float> samples(states.size() * static_cast<std::size_t>(n) * 2 * bins);
  for (std::size_t k = 0; k < samples.size(); ++k) samples[k] = static_cast<float>(k % 97) * 0.25f;
  return LabeledDataset(n, Layout::demultiplexed, bins, 2.0, states, samples);
}

}  // namespace

TEST_CASE("mean trace value of a hand-computed trace") {
  Trace t({1.0, 2.0, 3.0}, {0.0, 0.0, 3.0}, 2.0);
  const auto m = mean_trace_value(t);
  CHECK(m.i == doctest::Approx(2.0));
  CHECK(m.q == doctest::Approx(1.0));
}

TEST_CASE("mean trace value rejects empty and ragged traces") {
  Trace empty;
  CHECK(thrown_code([&] { mean_trace_value(empty); }) == code(ErrorCode::EmptyTrace));
  Trace ragged({1.0, 2.0}, {1.0}, 1.0);
  CHECK(thrown_code([&] { mean_trace_value(ragged); }) == code(ErrorCode::LengthMismatch));
}

TEST_CASE("mean trace value is translation equivariant") {
  SplitMix64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto t = testing::random_trace(rng, 37);
    const auto base = mean_trace_value(t);
    const double di = rng.uniform() * 4 - 2, dq = rng.uniform() * 4 - 2;
    for (auto& v : t.i) v += di;
    for (auto& v : t.q) v += dq;
    const auto shifted = mean_trace_value(t);
    CHECK(shifted.i == doctest::Approx(base.i + di).epsilon(1e-12));
    CHECK(shifted.q == doctest::Approx(base.q + dq).epsilon(1e-12));
  }
}

TEST_CASE("apportion uses largest remainders") {
  using A = std::array<std::size_t, 3>;
  CHECK(apportion(50000, {}) == A{9750, 5250, 35000});
  CHECK(apportion(10, {0.5, 0.2, 0.3}) == A{5, 2, 3});
  // 1.95 / 1.05 / 7.0: floors give 9, the largest remainder goes to train
  CHECK(apportion(10, {}) == A{2, 1, 7});
  CHECK(apportion(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == A{1, 1, 1});
  for (std::size_t n : {0u, 1u, 7u, 99u, 1001u, 12345u}) {
    const auto a = apportion(n, {});
    CHECK(a[0] + a[1] + a[2] == n);
  }
}

TEST_CASE("split is stratified, disjoint, sorted and deterministic") {
  const auto ds = tiny_dataset(2, 50);
  const auto sp = split_dataset(ds, {}, 5);
  REQUIRE(sp.per_state_counts.size() == 4);
  for (const auto& c : sp.per_state_counts) {
    CHECK(c[0] + c[1] + c[2] == 50);
    CHECK(c == apportion(50, {}));
  }
  std::set<std::size_t> all;
  for (const auto* part : {&sp.train, &sp.validation, &sp.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == ds.num_shots());
  CHECK(sp.train.size() + sp.validation.size() + sp.test.size() == ds.num_shots());

  // per-state membership
  for (std::uint32_t s = 0; s < 4; ++s) {
    const auto in_state = [&](std::size_t i) { return ds.state(i) == s; };
    CHECK(static_cast<std::size_t>(std::count_if(sp.train.begin(), sp.train.end(), in_state)) ==
          sp.per_state_counts[s][0]);
    CHECK(static_cast<std::size_t>(std::count_if(sp.test.begin(), sp.test.end(), in_state)) ==
          sp.per_state_counts[s][2]);
  }

  const auto again = split_dataset(ds, {}, 5);
  CHECK(again.train == sp.train);
  CHECK(again.validation == sp.validation);
  CHECK(again.test == sp.test);
  const auto other = split_dataset(ds, {}, 6);
  CHECK(other.train != sp.train);
}

TEST_CASE("split errors") {
  const auto ds = tiny_dataset(1, 10);
  CHECK(thrown_code([&] { split_dataset(ds, {0.5, 0.5, 0.5}, 0); }) == code(ErrorCode::InvalidRatios));
  CHECK(thrown_code([&] { split_dataset(ds, {-0.1, 0.6, 0.5}, 0); }) == code(ErrorCode::InvalidRatios));
  const auto small = tiny_dataset(1, 2);
  CHECK(thrown_code([&] { split_dataset(small, {}, 0); }) == code(ErrorCode::InsufficientData));
}

TEST_CASE("dataset accessors follow the blob order") {
  const std::size_t bins = 3;
  std::vector<float> samples(2 * 2 * 2 * bins);
  std::iota(samples.begin(), samples.end(), 0.0f);
  LabeledDataset ds(2, Layout::demultiplexed, bins, 1.0, {1, 2}, samples);
  // shot 1, trace 1: offset (1 * 2 + 1) * 2 * bins = 18
  const auto t = ds.trace(1, 1);
  CHECK(t.i == std::vector<double>{18, 19, 20});
  CHECK(t.q == std::vector<double>{21, 22, 23});
  CHECK(ds.prepared_bit(0, 0) == 1);
  CHECK(ds.prepared_bit(0, 1) == 0);
  CHECK(ds.prepared_bit(1, 1) == 1);

  samples.pop_back();
  CHECK(thrown_code([&] { LabeledDataset(2, Layout::demultiplexed, bins, 1.0, {1, 2}, samples); }) ==
        code(ErrorCode::PayloadTruncated));
}

TEST_CASE("SplitMix64 matches its reference stream") {
  // first outputs for seed 1234567 from the published reference implementation
  SplitMix64 rng(1234567);
  CHECK(rng.next() == 6457827717110365317ULL);
  CHECK(rng.next() == 3203168211198807973ULL);
  CHECK(rng.next() == 9817491932198370423ULL);
}
