#include "qread/quantized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qread/error.hpp"

namespace qread::nn {

namespace {

std::int64_t max_code(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

// Largest f such that round(max_abs * 2^f) fits the signed range.
int frac_bits_for(double max_abs, int bits) {
  const std::int64_t limit = max_code(bits);
  if (!(max_abs > 0.0)) return bits - 1;
  int f = bits - 1 - static_cast<int>(std::ceil(std::log2(max_abs)));
  while (std::llround(std::ldexp(max_abs, f)) > limit) --f;
  while (f < 62 && std::llround(std::ldexp(max_abs, f + 1)) <= limit) ++f;
  return f;
}

std::int64_t to_fixed(double v, int frac, int bits) {
  const std::int64_t limit = max_code(bits);
  const double scaled = std::round(std::ldexp(v, frac));
  return static_cast<std::int64_t>(std::clamp(scaled, -static_cast<double>(limit), static_cast<double>(limit)));
}

// Shift an accumulator at `from` fractional bits to `to`, rounding half up.
std::int64_t rescale(std::int64_t v, int from, int to) {
  if (from == to) return v;
  if (from > to) {
    const int s = from - to;
    if (s >= 63) return 0;
    return (v + (std::int64_t{1} << (s - 1))) >> s;
  }
  const int s = to - from;
  if (s >= 63 || std::abs(v) > (std::numeric_limits<std::int64_t>::max() >> s))
    throw Error(ErrorCode::AccumulatorOverflow, "requantization shift overflows int64");
  return v * (std::int64_t{1} << s);
}

}  // namespace

int QuantizedModel::accumulator_bits(std::size_t layer) const {
  const auto fan_in = static_cast<double>(layers.at(layer).in);
  return 2 * bits + static_cast<int>(std::ceil(std::log2(fan_in + 1.0)));
}

QuantizedModel quantize(const NetworkModel& model, int bits, const FeatureMatrix& calibration) {
  if (bits < 8 || bits > 32) throw Error(ErrorCode::InvalidArgument, "bits must be in [8, 32]");
  QuantizedModel q;
  q.spec = model.spec;
  q.standardizer = model.standardizer;
  q.bits = bits;

  // Largest |input| seen by each layer.
  std::array<double, 3> input_peak{16.0, 16.0, 16.0};
  if (calibration.rows > 0) {
    if (calibration.cols != model.spec.input_size)
      throw Error(ErrorCode::FeatureShapeError, "calibration width does not match the network input");
    input_peak = {0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < calibration.rows; ++r) {
      std::vector<double> a(model.spec.input_size);
      model.standardizer.apply(calibration.row(r), a);
      for (std::size_t l = 0; l < 3; ++l) {
        for (double v : a) input_peak[l] = std::max(input_peak[l], std::abs(v));
        if (l == 2) break;
        const Layer& layer = model.layers[l];
        std::vector<double> next(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
          double acc = layer.bias[o];
          for (std::size_t k = 0; k < layer.in; ++k) acc += layer.weights[o * layer.in + k] * a[k];
          next[o] = std::max(0.0, acc);
        }
        a = std::move(next);
      }
    }
  }

  for (std::size_t l = 0; l < 3; ++l) {
    const Layer& src = model.layers[l];
    QuantizedLayer dst;
    dst.in = src.in;
    dst.out = src.out;
    double wmax = 0.0;
    for (double w : src.weights) wmax = std::max(wmax, std::abs(w));
    dst.weight_frac_bits = frac_bits_for(wmax, bits);
    dst.input_frac_bits = frac_bits_for(input_peak[l], bits);
    dst.weights.reserve(src.weights.size());
    for (double w : src.weights) dst.weights.push_back(to_fixed(w, dst.weight_frac_bits, bits));
    const int acc_frac = dst.weight_frac_bits + dst.input_frac_bits;
    for (double b : src.bias) {
      const double scaled = std::round(std::ldexp(b, acc_frac));
      if (std::abs(scaled) > 9.0e18) throw Error(ErrorCode::AccumulatorOverflow, "bias does not fit the accumulator");
      dst.bias.push_back(static_cast<std::int64_t>(scaled));
    }
    q.layers.push_back(std::move(dst));
  }
  return q;
}

std::vector<double> forward_q(const QuantizedModel& model, std::span<const double> features) {
  if (features.size() != model.spec.input_size)
    throw Error(ErrorCode::FeatureShapeError, "expected " + std::to_string(model.spec.input_size) +
                                                  " features, got " + std::to_string(features.size()));
  std::vector<double> standardized(features.size());
  model.standardizer.apply(features, standardized);
  std::vector<std::int64_t> a(features.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    a[k] = to_fixed(standardized[k], model.layers[0].input_frac_bits, model.bits);

  std::vector<double> out_logits;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const QuantizedLayer& layer = model.layers[l];
    std::vector<std::int64_t> acc(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      std::int64_t sum = layer.bias[o];
      const std::int64_t* w = layer.weights.data() + o * layer.in;
      for (std::size_t k = 0; k < layer.in; ++k) {
        std::int64_t prod;
        if (__builtin_mul_overflow(w[k], a[k], &prod) || __builtin_add_overflow(sum, prod, &sum))
          throw Error(ErrorCode::AccumulatorOverflow, "int64 accumulator overflow in layer " + std::to_string(l));
      }
      acc[o] = sum;
    }
    const int acc_frac = layer.weight_frac_bits + layer.input_frac_bits;
    if (l + 1 == model.layers.size()) {
      out_logits.resize(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) out_logits[o] = std::ldexp(static_cast<double>(acc[o]), -acc_frac);
      break;
    }
    const int next_frac = model.layers[l + 1].input_frac_bits;
    const std::int64_t limit = max_code(model.bits);
    a.assign(layer.out, 0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      if (acc[o] <= 0) continue;
      a[o] = std::min(rescale(acc[o], acc_frac, next_frac), limit);
    }
  }
  return softmax(out_logits);
}

nlohmann::json to_json(const QuantizedModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    layers.push_back({{"in", layer.in},
                      {"out", layer.out},
                      {"weight_frac_bits", layer.weight_frac_bits},
                      {"input_frac_bits", layer.input_frac_bits},
                      {"accumulator_bits", model.accumulator_bits(l)},
                      {"weights", layer.weights},
                      {"bias", layer.bias}});
  }
  return {{"bits", model.bits},
          {"scale_kind", "power_of_two"},
          {"spec",
           {{"input_size", model.spec.input_size},
            {"hidden", model.spec.hidden},
            {"output_size", model.spec.output_size}}},
          {"standardizer", {{"mean", model.standardizer.mean}, {"stddev", model.standardizer.stddev}}},
          {"layers", layers}};
}

QuantizedModel quantized_from_json(const nlohmann::json& j) {
  try {
    QuantizedModel q;
    q.bits = j.at("bits").get<int>();
    const auto& spec = j.at("spec");
    q.spec.input_size = spec.at("input_size").get<std::size_t>();
    q.spec.hidden = spec.at("hidden").get<std::array<std::size_t, 2>>();
    q.spec.output_size = spec.at("output_size").get<std::size_t>();
    q.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    q.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    for (const auto& lj : j.at("layers")) {
      QuantizedLayer layer;
      layer.in = lj.at("in").get<std::size_t>();
      layer.out = lj.at("out").get<std::size_t>();
      layer.weight_frac_bits = lj.at("weight_frac_bits").get<int>();
      layer.input_frac_bits = lj.at("input_frac_bits").get<int>();
      layer.weights = lj.at("weights").get<std::vector<std::int64_t>>();
      layer.bias = lj.at("bias").get<std::vector<std::int64_t>>();
      if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
        throw Error(ErrorCode::FormatError, "quantized layer shape inconsistent");
      q.layers.push_back(std::move(layer));
    }
    if (q.layers.size() != 3) throw Error(ErrorCode::FormatError, "expected 3 quantized layers");
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("quantized model JSON: ") + e.what());
  }
}

}  // namespace qread::nn
