#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qread/dsp.hpp"
#include "qread/neural.hpp"
#include "qread/quantized.hpp"
#include "qread/trace.hpp"

namespace qread::pipeline {

enum class Kind { mf, mf_nn, mf_rmf_nn, raw_fnn };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);

struct FitConfig {
  nn::TrainHyper hyper;
  std::size_t demux_boxcar = 10;  ///< boxcar length used when demultiplexing composite traces
  std::size_t min_relax = 20;
  int quant_bits = 16;  ///< 0 disables the fixed-point model
};

enum class Precision { floating, fixed_point };

/// A trained discriminator. Inference is const; nothing here retrains.
struct Pipeline {
  Kind kind = Kind::mf;
  int num_qubits = 1;
  std::size_t trained_bins = 0;
  double dt_ns = 1.0;
  Layout layout = Layout::demultiplexed;
  std::vector<double> if_freq_mhz;
  std::size_t demux_boxcar = 1;

  std::vector<dsp::MatchedFilter> mfs;
  /// Empty entries are qubits whose relaxation filter could not be trained;
  /// their feature column is held at zero.
  std::vector<std::optional<dsp::MatchedFilter>> rmfs;
  std::optional<nn::NetworkModel> network;
  std::optional<nn::QuantizedModel> quantized;

  std::vector<std::string> notices;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t feature_count() const;
};

/// Per-qubit traces of one shot at full length; composite shots are
/// demultiplexed with the pipeline's stored parameters.
std::vector<Trace> qubit_traces(const Pipeline& p, const LabeledDataset& ds, std::size_t shot);
std::vector<Trace> qubit_traces(const LabeledDataset& ds, std::size_t shot, std::size_t demux_boxcar);

/// Network input for one shot. `use_bins` holds one window per qubit.
std::vector<double> extract_features(const Pipeline& p, std::span<const Trace> traces,
                                     std::span<const std::size_t> use_bins);

/// Basis-state index (qubit k is bit k, qubit 0 least significant).
std::uint32_t discriminate_state(const Pipeline& p, std::span<const Trace> traces,
                                 std::span<const std::size_t> use_bins, Precision precision = Precision::floating);
std::uint32_t discriminate_state(const Pipeline& p, std::span<const Trace> traces, std::size_t use_bins,
                                 Precision precision = Precision::floating);

/// Per-qubit bits of the decided basis state.
std::vector<int> discriminate(const Pipeline& p, std::span<const Trace> traces, std::size_t use_bins,
                              Precision precision = Precision::floating);

std::vector<int> decode_bits(std::uint32_t state, int num_qubits);
std::uint32_t encode_bits(std::span<const int> bits);

/// Trains every component on `split.train` (early stopping on
/// `split.validation`) using the full readout window.
Pipeline fit(Kind kind, const LabeledDataset& ds, const DatasetSplit& split, const FitConfig& config);

/// Same, with an explicit training subset.
Pipeline fit(Kind kind, const LabeledDataset& ds, std::span<const std::size_t> train,
             std::span<const std::size_t> validation, const FitConfig& config);

/// Bundle layout: manifest.json plus one JSON file per component.
void save_pipeline(const Pipeline& p, const std::filesystem::path& dir);
Pipeline load_pipeline(const std::filesystem::path& dir);

}  // namespace qread::pipeline
