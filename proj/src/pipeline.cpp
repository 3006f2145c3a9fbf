#include "qread/pipeline.hpp"

#include <fstream>

#include "qread/error.hpp"
#include "qread/relaxation.hpp"

namespace qread::pipeline {

namespace {

constexpr std::string_view kPipelineFormat = "qread-pipeline-1";

using TraceSet = std::vector<std::vector<Trace>>;  // [shot][qubit]

TraceSet gather(const LabeledDataset& ds, std::span<const std::size_t> shots, std::size_t boxcar) {
  TraceSet out;
  out.reserve(shots.size());
  for (std::size_t shot : shots) out.push_back(qubit_traces(ds, shot, boxcar));
  return out;
}

nn::FeatureMatrix feature_matrix(const Pipeline& p, const TraceSet& traces) {
  const std::vector<std::size_t> full(static_cast<std::size_t>(p.num_qubits), p.trained_bins);
  nn::FeatureMatrix x(traces.size(), p.feature_count());
  for (std::size_t r = 0; r < traces.size(); ++r) {
    const auto f = extract_features(p, traces[r], full);
    std::copy(f.begin(), f.end(), x.row(r).begin());
  }
  return x;
}

std::vector<std::uint32_t> labels_of(const LabeledDataset& ds, std::span<const std::size_t> shots) {
  std::vector<std::uint32_t> y;
  y.reserve(shots.size());
  for (std::size_t s : shots) y.push_back(ds.state(s));
  return y;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

}  // namespace

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::mf: return "mf";
    case Kind::mf_nn: return "mf_nn";
    case Kind::mf_rmf_nn: return "mf_rmf_nn";
    case Kind::raw_fnn: return "raw_fnn";
  }
  return "mf";
}

Kind parse_kind(std::string_view name) {
  for (Kind k : {Kind::mf, Kind::mf_nn, Kind::mf_rmf_nn, Kind::raw_fnn})
    if (kind_name(k) == name) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown pipeline kind '" + std::string(name) + "'");
}

std::size_t Pipeline::feature_count() const {
  const auto n = static_cast<std::size_t>(num_qubits);
  switch (kind) {
    case Kind::mf:
    case Kind::mf_nn: return n;
    case Kind::mf_rmf_nn: return 2 * n;
    case Kind::raw_fnn: return 2 * n * trained_bins;
  }
  return n;
}

std::vector<Trace> qubit_traces(const LabeledDataset& ds, std::size_t shot, std::size_t demux_boxcar) {
  std::vector<Trace> out;
  const auto n = static_cast<std::size_t>(ds.num_qubits());
  out.reserve(n);
  if (ds.layout() == Layout::demultiplexed) {
    for (std::size_t q = 0; q < n; ++q) out.push_back(ds.trace(shot, q));
  } else {
    const Trace line = ds.trace(shot, 0);
    for (std::size_t q = 0; q < n; ++q) out.push_back(dsp::demultiplex(line, ds.if_freq_mhz()[q], demux_boxcar));
  }
  return out;
}

std::vector<Trace> qubit_traces(const Pipeline& p, const LabeledDataset& ds, std::size_t shot) {
  if (ds.num_qubits() != p.num_qubits || ds.num_bins() < p.trained_bins || ds.layout() != p.layout)
    throw Error(ErrorCode::FeatureShapeError, "dataset shape does not match the pipeline");
  return qubit_traces(ds, shot, p.demux_boxcar);
}

std::vector<double> extract_features(const Pipeline& p, std::span<const Trace> traces,
                                     std::span<const std::size_t> use_bins) {
  const auto n = static_cast<std::size_t>(p.num_qubits);
  if (traces.size() != n || use_bins.size() != n)
    throw Error(ErrorCode::FeatureShapeError, "expected one trace and one window per qubit");
  std::vector<double> f;
  f.reserve(p.feature_count());
  if (p.kind == Kind::raw_fnn) {
    for (std::size_t q = 0; q < n; ++q) {
      if (use_bins[q] != p.trained_bins)
        throw Error(ErrorCode::UnsupportedTruncation, "raw-trace network needs the full training window");
      if (traces[q].size() < p.trained_bins) throw Error(ErrorCode::FeatureShapeError, "trace shorter than window");
      f.insert(f.end(), traces[q].i.begin(), traces[q].i.begin() + static_cast<std::ptrdiff_t>(p.trained_bins));
      f.insert(f.end(), traces[q].q.begin(), traces[q].q.begin() + static_cast<std::ptrdiff_t>(p.trained_bins));
    }
    return f;
  }
  for (std::size_t q = 0; q < n; ++q) f.push_back(dsp::apply_mf(p.mfs[q], traces[q], use_bins[q]));
  if (p.kind == Kind::mf_rmf_nn)
    for (std::size_t q = 0; q < n; ++q)
      f.push_back(p.rmfs[q] ? dsp::apply_mf(*p.rmfs[q], traces[q], use_bins[q]) : 0.0);
  return f;
}

std::uint32_t discriminate_state(const Pipeline& p, std::span<const Trace> traces,
                                 std::span<const std::size_t> use_bins, Precision precision) {
  for (std::size_t b : use_bins)
    if (b < 1 || b > p.trained_bins)
      throw Error(ErrorCode::InvalidWindow, "use_bins " + std::to_string(b) + " outside [1, " +
                                                std::to_string(p.trained_bins) + "]");
  const auto features = extract_features(p, traces, use_bins);
  if (p.kind == Kind::mf) {
    std::uint32_t state = 0;
    for (std::size_t q = 0; q < features.size(); ++q)
      if (features[q] > p.mfs[q].threshold) state |= 1u << q;
    return state;
  }
  if (precision == Precision::fixed_point) {
    if (!p.quantized) throw Error(ErrorCode::InvalidArgument, "pipeline carries no fixed-point model");
    return static_cast<std::uint32_t>(nn::argmax(nn::forward_q(*p.quantized, features)));
  }
  return static_cast<std::uint32_t>(nn::argmax(nn::logits(*p.network, features)));
}

std::uint32_t discriminate_state(const Pipeline& p, std::span<const Trace> traces, std::size_t use_bins,
                                 Precision precision) {
  const std::vector<std::size_t> windows(static_cast<std::size_t>(p.num_qubits), use_bins);
  return discriminate_state(p, traces, windows, precision);
}

std::vector<int> discriminate(const Pipeline& p, std::span<const Trace> traces, std::size_t use_bins,
                              Precision precision) {
  return decode_bits(discriminate_state(p, traces, use_bins, precision), p.num_qubits);
}

std::vector<int> decode_bits(std::uint32_t state, int num_qubits) {
  std::vector<int> bits(static_cast<std::size_t>(num_qubits));
  for (int k = 0; k < num_qubits; ++k) bits[static_cast<std::size_t>(k)] = static_cast<int>((state >> k) & 1u);
  return bits;
}

std::uint32_t encode_bits(std::span<const int> bits) {
  std::uint32_t state = 0;
  for (std::size_t k = 0; k < bits.size(); ++k)
    if (bits[k]) state |= 1u << k;
  return state;
}

Pipeline fit(Kind kind, const LabeledDataset& ds, const DatasetSplit& split, const FitConfig& config) {
  return fit(kind, ds, split.train, split.validation, config);
}

Pipeline fit(Kind kind, const LabeledDataset& ds, std::span<const std::size_t> train,
             std::span<const std::size_t> validation, const FitConfig& config) {
  Pipeline p;
  p.kind = kind;
  p.num_qubits = ds.num_qubits();
  p.trained_bins = ds.num_bins();
  p.dt_ns = ds.dt_ns();
  p.layout = ds.layout();
  p.if_freq_mhz = ds.if_freq_mhz();
  p.demux_boxcar = ds.layout() == Layout::composite ? config.demux_boxcar : 1;
  const auto n = static_cast<std::size_t>(p.num_qubits);

  const TraceSet train_traces = gather(ds, train, p.demux_boxcar);

  // Per-qubit class views of the training traces.
  std::vector<std::vector<TraceView>> class0(n), class1(n);
  for (std::size_t r = 0; r < train.size(); ++r)
    for (std::size_t q = 0; q < n; ++q)
      (ds.prepared_bit(train[r], static_cast<int>(q)) ? class1 : class0)[q].push_back(train_traces[r][q].view());

  if (kind != Kind::raw_fnn) {
    nn::note_training_invocation();
    for (std::size_t q = 0; q < n; ++q) p.mfs.push_back(dsp::train_mf(class0[q], class1[q]));
  }
  if (kind == Kind::mf) return p;

  if (kind == Kind::mf_rmf_nn) {
    std::size_t trained = 0;
    for (std::size_t q = 0; q < n; ++q) {
      try {
        const auto report = relax::label_relaxations(class0[q], class1[q]);
        p.rmfs.emplace_back(relax::train_rmf(class0[q], class1[q], report, config.min_relax));
        ++trained;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientRelaxations && e.code() != ErrorCode::DegenerateCentroids &&
            e.code() != ErrorCode::DegenerateClasses)
          throw;
        p.rmfs.emplace_back(std::nullopt);
        p.notices.push_back("qubit " + std::to_string(q + 1) + ": relaxation filter disabled (" + e.what() +
                            "); feature held at zero");
      }
    }
    if (trained == 0) {
      p.kind = Kind::mf_nn;
      p.rmfs.clear();
      p.notices.push_back("ExplicitDowngrade: no qubit yielded a relaxation filter; fitted as mf_nn");
    }
  }

  const nn::NetworkSpec spec = p.kind == Kind::raw_fnn   ? nn::NetworkSpec::raw_fnn(p.feature_count(), p.num_qubits)
                               : p.kind == Kind::mf_nn ? nn::NetworkSpec::mf_nn(p.num_qubits)
                                                         : nn::NetworkSpec::mf_rmf_nn(p.num_qubits);
  const nn::FeatureMatrix train_x = feature_matrix(p, train_traces);
  const nn::FeatureMatrix val_x = feature_matrix(p, gather(ds, validation, p.demux_boxcar));
  const auto train_y = labels_of(ds, train);
  const auto val_y = labels_of(ds, validation);

  p.network = nn::train(nn::build(spec, config.hyper.seed), train_x, train_y, val_x, val_y, config.hyper);
  if (config.quant_bits > 0) p.quantized = nn::quantize(*p.network, config.quant_bits, train_x);
  return p;
}

void save_pipeline(const Pipeline& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["format"] = kPipelineFormat;
  m["kind"] = kind_name(p.kind);
  m["num_qubits"] = p.num_qubits;
  m["trained_bins"] = p.trained_bins;
  m["dt_ns"] = p.dt_ns;
  m["layout"] = p.layout == Layout::composite ? "composite" : "demultiplexed";
  m["if_freq_mhz"] = p.if_freq_mhz;
  m["demux_boxcar"] = p.demux_boxcar;
  m["notices"] = p.notices;
  m["provenance"] = p.provenance;
  nlohmann::json files = nlohmann::json::object();
  nlohmann::json mf_files = nlohmann::json::array();
  for (std::size_t q = 0; q < p.mfs.size(); ++q) {
    const std::string name = "mf_q" + std::to_string(q + 1) + ".json";
    write_json(dir / name, dsp::to_json(p.mfs[q]));
    mf_files.push_back(name);
  }
  files["mf"] = mf_files;
  nlohmann::json rmf_files = nlohmann::json::array();
  for (std::size_t q = 0; q < p.rmfs.size(); ++q) {
    if (!p.rmfs[q]) {
      rmf_files.push_back(nullptr);
      continue;
    }
    const std::string name = "rmf_q" + std::to_string(q + 1) + ".json";
    write_json(dir / name, dsp::to_json(*p.rmfs[q]));
    rmf_files.push_back(name);
  }
  files["rmf"] = rmf_files;
  if (p.network) {
    write_json(dir / "network.json", nn::to_json(*p.network));
    files["network"] = "network.json";
  }
  if (p.quantized) {
    const std::string name = "network_q" + std::to_string(p.quantized->bits) + ".json";
    write_json(dir / name, nn::to_json(*p.quantized));
    files["quantized"] = name;
  }
  m["files"] = files;
  write_json(dir / "manifest.json", m);
}

Pipeline load_pipeline(const std::filesystem::path& dir) {
  const auto m = read_json(dir / "manifest.json");
  try {
    if (m.at("format").get<std::string>() != kPipelineFormat)
      throw Error(ErrorCode::FormatError, "pipeline manifest format is not " + std::string(kPipelineFormat));
    Pipeline p;
    p.kind = parse_kind(m.at("kind").get<std::string>());
    p.num_qubits = m.at("num_qubits").get<int>();
    p.trained_bins = m.at("trained_bins").get<std::size_t>();
    p.dt_ns = m.at("dt_ns").get<double>();
    p.layout = m.at("layout").get<std::string>() == "composite" ? Layout::composite : Layout::demultiplexed;
    p.if_freq_mhz = m.at("if_freq_mhz").get<std::vector<double>>();
    p.demux_boxcar = m.at("demux_boxcar").get<std::size_t>();
    p.notices = m.at("notices").get<std::vector<std::string>>();
    p.provenance = m.value("provenance", nlohmann::json::object());
    const auto& files = m.at("files");
    for (const auto& name : files.at("mf")) p.mfs.push_back(dsp::matched_filter_from_json(read_json(dir / name)));
    for (const auto& name : files.at("rmf")) {
      if (name.is_null())
        p.rmfs.emplace_back(std::nullopt);
      else
        p.rmfs.emplace_back(dsp::matched_filter_from_json(read_json(dir / name.get<std::string>())));
    }
    if (files.contains("network")) p.network = nn::network_from_json(read_json(dir / files["network"].get<std::string>()));
    if (files.contains("quantized"))
      p.quantized = nn::quantized_from_json(read_json(dir / files["quantized"].get<std::string>()));
    const auto n = static_cast<std::size_t>(p.num_qubits);
    const bool needs_mf = p.kind != Kind::raw_fnn;
    if ((needs_mf && p.mfs.size() != n) || (p.kind == Kind::mf_rmf_nn && p.rmfs.size() != n) ||
        (p.kind != Kind::mf && !p.network))
      throw Error(ErrorCode::FormatError, "pipeline components inconsistent with kind");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("pipeline manifest: ") + e.what());
  }
}

}  // namespace qread::pipeline
