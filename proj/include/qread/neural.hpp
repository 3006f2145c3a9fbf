#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace qread::nn {

/// Row-major feature table.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// input -> hidden[0] -> hidden[1] -> output, rectifier hidden units and a
/// softmax output over 2^N basis states.
struct NetworkSpec {
  std::size_t input_size = 1;
  std::array<std::size_t, 2> hidden{2, 4};
  std::size_t output_size = 2;

  static NetworkSpec mf_nn(int num_qubits);
  static NetworkSpec mf_rmf_nn(int num_qubits);
  /// Stand-in for the large raw-trace network: inputs -> 250 -> 64 -> 2^N.
  static NetworkSpec raw_fnn(std::size_t inputs, int num_qubits);

  std::array<std::size_t, 4> layer_sizes() const { return {input_size, hidden[0], hidden[1], output_size}; }
  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  ///< out x in, row-major
  std::vector<double> bias;
};

/// Per-feature affine map fitted on training features.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer identity(std::size_t n);
  static Standardizer fit(const FeatureMatrix& x);
  void apply(std::span<const double> in, std::span<double> out) const;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
};

struct NetworkModel {
  NetworkSpec spec;
  std::vector<Layer> layers;
  Standardizer standardizer;
  TrainingInfo info;
};

struct TrainHyper {
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
};

/// Fan-in scaled uniform initialization U(-sqrt(6/fan_in), sqrt(6/fan_in)),
/// zero biases, identity standardizer.
NetworkModel build(const NetworkSpec& spec, std::uint64_t seed);

/// Class probabilities for raw (unstandardized) features.
/// Throws FeatureShapeError on a length mismatch.
std::vector<double> forward(const NetworkModel& model, std::span<const double> features);

/// Pre-softmax outputs.
std::vector<double> logits(const NetworkModel& model, std::span<const double> features);

/// Numerically stable softmax (max logit subtracted first).
std::vector<double> softmax(std::span<const double> logits);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// Mean cross-entropy over the rows of `x` and its gradient with respect to
/// every weight and bias.
double loss_and_gradient(const NetworkModel& model, const FeatureMatrix& x, std::span<const std::uint32_t> labels,
                         Gradients& grad);

double cross_entropy(const NetworkModel& model, const FeatureMatrix& x, std::span<const std::uint32_t> labels);

/// Mini-batch SGD with momentum and early stopping on validation loss.
/// Fits the standardizer on `train_x`, returns the best-validation snapshot.
/// A zero epoch budget returns `model` unchanged.
NetworkModel train(const NetworkModel& model, const FeatureMatrix& train_x, std::span<const std::uint32_t> train_y,
                   const FeatureMatrix& val_x, std::span<const std::uint32_t> val_y, const TrainHyper& hyper);

/// Number of times any training routine has run in this process. Inference
/// paths never touch it.
std::uint64_t training_invocations() noexcept;
void note_training_invocation() noexcept;

std::size_t argmax(std::span<const double> v);

nlohmann::json to_json(const NetworkModel& model);
NetworkModel network_from_json(const nlohmann::json& j);

}  // namespace qread::nn
