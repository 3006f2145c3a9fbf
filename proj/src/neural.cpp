#include "qread/neural.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "qread/error.hpp"
#include "qread/rng.hpp"

namespace qread::nn {

namespace {

std::atomic<std::uint64_t> g_training_runs{0};

// Scratch for one forward/backward pass.
struct Activations {
  std::array<std::vector<double>, 4> a;  // a[0] standardized input, a[3] probabilities
  std::array<std::vector<double>, 4> z;  // pre-activations, z[0] unused
  std::array<std::vector<double>, 4> delta;

  explicit Activations(const NetworkSpec& spec) {
    const auto sizes = spec.layer_sizes();
    for (std::size_t l = 0; l < 4; ++l) {
      a[l].assign(sizes[l], 0.0);
      z[l].assign(sizes[l], 0.0);
      delta[l].assign(sizes[l], 0.0);
    }
  }
};

void check_features(const NetworkModel& model, std::size_t n) {
  if (n != model.spec.input_size)
    throw Error(ErrorCode::FeatureShapeError, "expected " + std::to_string(model.spec.input_size) +
                                                  " features, got " + std::to_string(n));
}

// Runs layers on an already-standardized input held in act.a[0].
void forward_standardized(const NetworkModel& model, Activations& act) {
  for (std::size_t l = 0; l < 3; ++l) {
    const Layer& layer = model.layers[l];
    const double* in = act.a[l].data();
    double* z = act.z[l + 1].data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      double acc = layer.bias[o];
      for (std::size_t k = 0; k < layer.in; ++k) acc += w[k] * in[k];
      z[o] = acc;
    }
    if (l < 2) {
      for (std::size_t o = 0; o < layer.out; ++o) act.a[l + 1][o] = std::max(0.0, z[o]);
    } else {
      act.a[3] = softmax(act.z[3]);
    }
  }
}

double sample_loss(const Activations& act, std::uint32_t label) {
  return -std::log(std::max(act.a[3][label], 1e-300));
}

// Accumulates d(loss)/d(params) for one sample into grad.
void backward(const NetworkModel& model, Activations& act, std::uint32_t label, Gradients& grad) {
  auto& d3 = act.delta[3];
  for (std::size_t o = 0; o < d3.size(); ++o) d3[o] = act.a[3][o] - (o == label ? 1.0 : 0.0);
  for (std::size_t l = 3; l-- > 0;) {
    const Layer& layer = model.layers[l];
    const auto& dout = act.delta[l + 1];
    const auto& in = act.a[l];
    double* gw = grad.weights[l].data();
    double* gb = grad.bias[l].data();
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = dout[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* row = gw + o * layer.in;
      for (std::size_t k = 0; k < layer.in; ++k) row[k] += d * in[k];
    }
    if (l == 0) break;
    auto& din = act.delta[l];
    std::fill(din.begin(), din.end(), 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = dout[o];
      if (d == 0.0) continue;
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t k = 0; k < layer.in; ++k) din[k] += w[k] * d;
    }
    for (std::size_t k = 0; k < din.size(); ++k)
      if (act.z[l][k] <= 0.0) din[k] = 0.0;
  }
}

Gradients zero_gradients(const NetworkModel& model) {
  Gradients g;
  for (const auto& layer : model.layers) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

FeatureMatrix standardize_all(const Standardizer& s, const FeatureMatrix& x) {
  FeatureMatrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) s.apply(x.row(r), out.row(r));
  return out;
}

double mean_loss_standardized(const NetworkModel& model, const FeatureMatrix& xs,
                              std::span<const std::uint32_t> labels) {
  Activations act(model.spec);
  double total = 0.0;
  for (std::size_t r = 0; r < xs.rows; ++r) {
    std::copy(xs.row(r).begin(), xs.row(r).end(), act.a[0].begin());
    forward_standardized(model, act);
    total += sample_loss(act, labels[r]);
  }
  return xs.rows ? total / static_cast<double>(xs.rows) : 0.0;
}

void check_labels(const NetworkModel& model, const FeatureMatrix& x, std::span<const std::uint32_t> y) {
  check_features(model, x.cols);
  if (x.rows != y.size()) throw Error(ErrorCode::FeatureShapeError, "feature rows and labels differ in count");
  for (auto label : y)
    if (label >= model.spec.output_size)
      throw Error(ErrorCode::FeatureShapeError, "label " + std::to_string(label) + " out of range");
}

}  // namespace

NetworkSpec NetworkSpec::mf_nn(int n) {
  const auto un = static_cast<std::size_t>(n);
  return {un, {2 * un, 4 * un}, std::size_t{1} << un};
}

NetworkSpec NetworkSpec::mf_rmf_nn(int n) {
  const auto un = static_cast<std::size_t>(n);
  return {2 * un, {2 * un, 4 * un}, std::size_t{1} << un};
}

NetworkSpec NetworkSpec::raw_fnn(std::size_t inputs, int n) {
  return {inputs, {250, 64}, std::size_t{1} << static_cast<std::size_t>(n)};
}

void NetworkSpec::validate() const {
  if (input_size == 0 || hidden[0] == 0 || hidden[1] == 0 || output_size < 2)
    throw Error(ErrorCode::InvalidArgument, "network layer sizes must be positive with at least 2 outputs");
}

Standardizer Standardizer::identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

Standardizer Standardizer::fit(const FeatureMatrix& x) {
  Standardizer s = identity(x.cols);
  if (x.rows == 0) return s;
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) s.mean[c] += x.at(r, c);
  for (auto& m : s.mean) m /= static_cast<double>(x.rows);
  std::vector<double> var(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x.at(r, c) - s.mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(x.rows));
    // Constant features (e.g. a disabled relaxation filter) keep unit scale.
    s.stddev[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> in, std::span<double> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = (in[c] - mean[c]) / stddev[c];
}

NetworkModel build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkModel model;
  model.spec = spec;
  model.standardizer = Standardizer::identity(spec.input_size);
  model.info.seed = seed;
  const auto sizes = spec.layer_sizes();
  SplitMix64 rng(derive_seed(seed, {0x494E4954u}));
  for (std::size_t l = 0; l < 3; ++l) {
    Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = (2.0 * rng.uniform() - 1.0) * bound;
    layer.bias.assign(layer.out, 0.0);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.size());
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - peak);
    sum += p[k];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> logits(const NetworkModel& model, std::span<const double> features) {
  check_features(model, features.size());
  Activations act(model.spec);
  model.standardizer.apply(features, act.a[0]);
  forward_standardized(model, act);
  return act.z[3];
}

std::vector<double> forward(const NetworkModel& model, std::span<const double> features) {
  return softmax(logits(model, features));
}

double loss_and_gradient(const NetworkModel& model, const FeatureMatrix& x, std::span<const std::uint32_t> labels,
                         Gradients& grad) {
  check_labels(model, x, labels);
  grad = zero_gradients(model);
  Activations act(model.spec);
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    model.standardizer.apply(x.row(r), act.a[0]);
    forward_standardized(model, act);
    total += sample_loss(act, labels[r]);
    backward(model, act, labels[r], grad);
  }
  const double inv = x.rows ? 1.0 / static_cast<double>(x.rows) : 0.0;
  for (auto& g : grad.weights)
    for (auto& v : g) v *= inv;
  for (auto& g : grad.bias)
    for (auto& v : g) v *= inv;
  return total * inv;
}

double cross_entropy(const NetworkModel& model, const FeatureMatrix& x, std::span<const std::uint32_t> labels) {
  check_labels(model, x, labels);
  return mean_loss_standardized(model, standardize_all(model.standardizer, x), labels);
}

NetworkModel train(const NetworkModel& model, const FeatureMatrix& train_x, std::span<const std::uint32_t> train_y,
                   const FeatureMatrix& val_x, std::span<const std::uint32_t> val_y, const TrainHyper& hyper) {
  note_training_invocation();
  if (hyper.max_epochs == 0) return model;
  check_labels(model, train_x, train_y);
  check_labels(model, val_x, val_y);
  if (train_x.rows == 0) throw Error(ErrorCode::InsufficientData, "empty training set");
  if (hyper.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");

  NetworkModel m = model;
  m.standardizer = Standardizer::fit(train_x);
  // Layers see standardized inputs; keep an identity-standardized working
  // copy so the inner loop skips the affine map.
  const FeatureMatrix xs = standardize_all(m.standardizer, train_x);
  const bool has_val = val_x.rows > 0;
  const FeatureMatrix vs = has_val ? standardize_all(m.standardizer, val_x) : FeatureMatrix{};
  auto monitor_loss = [&](const NetworkModel& net) {
    return has_val ? mean_loss_standardized(net, vs, val_y) : mean_loss_standardized(net, xs, train_y);
  };

  NetworkModel best = m;
  double best_loss = monitor_loss(m);
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t stale = 0;

  Gradients velocity = zero_gradients(m);
  Gradients grad = zero_gradients(m);
  Activations act(m.spec);
  std::vector<std::size_t> order(xs.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    SplitMix64 rng(derive_seed(hyper.seed, {0x45504F43u, epoch}));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      for (auto& g : grad.weights) std::fill(g.begin(), g.end(), 0.0);
      for (auto& g : grad.bias) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto row = xs.row(order[b]);
        std::copy(row.begin(), row.end(), act.a[0].begin());
        forward_standardized(m, act);
        backward(m, act, train_y[order[b]], grad);
      }
      const double step = hyper.learning_rate / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& w = m.layers[l].weights;
        auto& vw = velocity.weights[l];
        for (std::size_t k = 0; k < w.size(); ++k) {
          vw[k] = hyper.momentum * vw[k] - step * grad.weights[l][k];
          w[k] += vw[k];
        }
        auto& bias = m.layers[l].bias;
        auto& vb = velocity.bias[l];
        for (std::size_t k = 0; k < bias.size(); ++k) {
          vb[k] = hyper.momentum * vb[k] - step * grad.bias[l][k];
          bias[k] += vb[k];
        }
      }
    }
    epochs_run = epoch;
    const double loss = monitor_loss(m);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::DivergedTraining, "loss became non-finite at epoch " + std::to_string(epoch));
    if (loss < best_loss) {
      best = m;
      best_loss = loss;
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hyper.patience) {
      break;
    }
  }

  best.info = {hyper.seed, epochs_run, best_epoch, best_loss};
  return best;
}

std::uint64_t training_invocations() noexcept { return g_training_runs.load(); }
void note_training_invocation() noexcept { ++g_training_runs; }

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

nlohmann::json to_json(const NetworkModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers)
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
  return {{"spec",
           {{"input_size", model.spec.input_size},
            {"hidden", model.spec.hidden},
            {"output_size", model.spec.output_size},
            {"hidden_activation", "relu"},
            {"output_activation", "softmax"}}},
          {"standardizer", {{"mean", model.standardizer.mean}, {"stddev", model.standardizer.stddev}}},
          {"layers", layers},
          {"training",
           {{"seed", model.info.seed},
            {"epochs_run", model.info.epochs_run},
            {"best_epoch", model.info.best_epoch},
            {"best_validation_loss", model.info.best_validation_loss}}}};
}

NetworkModel network_from_json(const nlohmann::json& j) {
  try {
    NetworkModel m;
    const auto& spec = j.at("spec");
    m.spec.input_size = spec.at("input_size").get<std::size_t>();
    m.spec.hidden = spec.at("hidden").get<std::array<std::size_t, 2>>();
    m.spec.output_size = spec.at("output_size").get<std::size_t>();
    m.spec.validate();
    m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
    if (m.standardizer.mean.size() != m.spec.input_size || m.standardizer.stddev.size() != m.spec.input_size)
      throw Error(ErrorCode::FormatError, "standardizer size does not match input_size");
    const auto sizes = m.spec.layer_sizes();
    const auto& layers = j.at("layers");
    if (layers.size() != 3) throw Error(ErrorCode::FormatError, "expected 3 layers");
    for (std::size_t l = 0; l < 3; ++l) {
      Layer layer;
      layer.in = layers[l].at("in").get<std::size_t>();
      layer.out = layers[l].at("out").get<std::size_t>();
      layer.weights = layers[l].at("weights").get<std::vector<double>>();
      layer.bias = layers[l].at("bias").get<std::vector<double>>();
      if (layer.in != sizes[l] || layer.out != sizes[l + 1] || layer.weights.size() != layer.in * layer.out ||
          layer.bias.size() != layer.out)
        throw Error(ErrorCode::FormatError, "layer " + std::to_string(l) + " shape inconsistent with spec");
      m.layers.push_back(std::move(layer));
    }
    const auto& info = j.at("training");
    m.info = {info.at("seed").get<std::uint64_t>(), info.at("epochs_run").get<std::size_t>(),
              info.at("best_epoch").get<std::size_t>(), info.at("best_validation_loss").get<double>()};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("network JSON: ") + e.what());
  }
}

}  // namespace qread::nn
