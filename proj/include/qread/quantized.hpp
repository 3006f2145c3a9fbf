#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "qread/neural.hpp"

namespace qread::nn {

/// Integer layer. A real value v is stored as round(v * 2^frac_bits).
/// Accumulation runs in int64 at 2^(weight_frac_bits + input_frac_bits);
/// hidden outputs are rectified, shifted to the next layer's input format
/// and saturated to the signed `bits` range.
struct QuantizedLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<std::int64_t> weights;  ///< out x in, row-major
  std::vector<std::int64_t> bias;     ///< at the accumulator scale
  int weight_frac_bits = 0;
  int input_frac_bits = 0;
};

struct QuantizedModel {
  NetworkSpec spec;
  Standardizer standardizer;
  int bits = 16;
  std::vector<QuantizedLayer> layers;

  /// Worst-case accumulator width for layer l: 2 * bits + ceil(log2(fan_in + 1)).
  int accumulator_bits(std::size_t layer) const;
};

/// Symmetric per-tensor quantization with power-of-two scales. Weight formats
/// come from each tensor's largest magnitude. Activation formats come from
/// the largest activation seen when running `calibration` through the float
/// model; with no calibration rows each input format assumes |a| < 16.
/// Requires 8 <= bits <= 32.
QuantizedModel quantize(const NetworkModel& model, int bits, const FeatureMatrix& calibration = {});

/// Integer inference; softmax over the dequantized logits.
/// Throws AccumulatorOverflow if an int64 accumulation overflows.
std::vector<double> forward_q(const QuantizedModel& model, std::span<const double> features);

nlohmann::json to_json(const QuantizedModel& model);
QuantizedModel quantized_from_json(const nlohmann::json& j);

}  // namespace qread::nn
