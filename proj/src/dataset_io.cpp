#include "qread/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "qread/error.hpp"

namespace qread {

namespace {

using nlohmann::json;

std::string_view layout_name(Layout l) { return l == Layout::composite ? "composite" : "demultiplexed"; }

std::string_view event_name(EventKind k) {
  switch (k) {
    case EventKind::relaxation: return "relaxation";
    case EventKind::excitation: return "excitation";
    case EventKind::none: break;
  }
  return "none";
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::FormatError, "manifest field '" + field + "': " + why);
}

template <typename T>
T require(const json& m, const std::string& field) {
  if (!m.contains(field)) bad_field(field, "missing");
  try {
    return m.at(field).get<T>();
  } catch (const json::exception& e) {
    bad_field(field, e.what());
  }
}

void write_le_floats(std::ofstream& out, std::span<const float> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(values[k]);
    buf[4 * k + 0] = static_cast<unsigned char>(bits);
    buf[4 * k + 1] = static_cast<unsigned char>(bits >> 8);
    buf[4 * k + 2] = static_cast<unsigned char>(bits >> 16);
    buf[4 * k + 3] = static_cast<unsigned char>(bits >> 24);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json m;
  m["format"] = kDatasetFormat;
  m["num_qubits"] = ds.num_qubits();
  m["layout"] = layout_name(ds.layout());
  m["num_bins"] = ds.num_bins();
  m["dt_ns"] = ds.dt_ns();
  m["num_shots"] = ds.num_shots();
  m["traces_per_shot"] = ds.traces_per_shot();
  m["sample_encoding"] = "float32-le";
  m["sample_order"] = "shot,trace,channel(I,Q),time";
  m["blob"] = kBlobFile;
  m["if_freq_mhz"] = ds.if_freq_mhz();
  m["states"] = ds.states();
  if (ds.has_ground_truth()) {
    json table = json::array();
    const auto n = static_cast<std::size_t>(ds.num_qubits());
    for (std::size_t shot = 0; shot < ds.num_shots(); ++shot) {
      json row = json::array();
      for (std::size_t q = 0; q < n; ++q) {
        const auto& ev = ds.ground_truth_table()[shot * n + q];
        if (ev.kind == EventKind::none)
          row.push_back(nullptr);
        else
          row.push_back({{"kind", event_name(ev.kind)}, {"time_ns", ev.time_ns}});
      }
      table.push_back(std::move(row));
    }
    m["ground_truth"] = std::move(table);
  } else {
    m["ground_truth"] = nullptr;
  }

  std::ofstream mf(dir / kManifestFile);
  if (!mf) throw Error(ErrorCode::FileNotFound, "cannot write " + (dir / kManifestFile).string());
  mf << m.dump(1) << '\n';

  std::ofstream blob(dir / kBlobFile, std::ios::binary);
  if (!blob) throw Error(ErrorCode::FileNotFound, "cannot write " + (dir / kBlobFile).string());
  write_le_floats(blob, ds.samples());
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  std::ifstream mf(manifest_path);
  if (!mf) throw Error(ErrorCode::FileNotFound, manifest_path.string());
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, "manifest is not valid JSON: " + std::string(e.what()));
  }

  if (require<std::string>(m, "format") != kDatasetFormat) bad_field("format", "expected rdfmt-1");
  const int num_qubits = require<int>(m, "num_qubits");
  if (num_qubits < 1 || num_qubits > 16) bad_field("num_qubits", "must be in [1, 16]");
  const auto layout_str = require<std::string>(m, "layout");
  Layout layout;
  if (layout_str == "demultiplexed")
    layout = Layout::demultiplexed;
  else if (layout_str == "composite")
    layout = Layout::composite;
  else
    bad_field("layout", "unknown layout '" + layout_str + "'");
  const auto num_bins = require<std::size_t>(m, "num_bins");
  if (num_bins == 0) bad_field("num_bins", "must be positive");
  const auto dt = require<double>(m, "dt_ns");
  if (!(dt > 0.0)) bad_field("dt_ns", "must be positive");
  const auto num_shots = require<std::size_t>(m, "num_shots");
  const auto traces_per_shot = require<std::size_t>(m, "traces_per_shot");
  const std::size_t expected_tps = layout == Layout::composite ? 1 : static_cast<std::size_t>(num_qubits);
  if (traces_per_shot != expected_tps) bad_field("traces_per_shot", "inconsistent with layout");
  if (require<std::string>(m, "sample_encoding") != "float32-le") bad_field("sample_encoding", "expected float32-le");
  auto states = require<std::vector<std::uint32_t>>(m, "states");
  if (states.size() != num_shots) bad_field("states", "length differs from num_shots");
  for (auto s : states)
    if (s >= (1u << num_qubits)) bad_field("states", "basis state out of range");
  auto if_freq = m.contains("if_freq_mhz") ? require<std::vector<double>>(m, "if_freq_mhz") : std::vector<double>{};

  std::vector<TransitionEvent> truth;
  if (m.contains("ground_truth") && !m["ground_truth"].is_null()) {
    const auto& table = m["ground_truth"];
    if (!table.is_array() || table.size() != num_shots) bad_field("ground_truth", "expected one row per shot");
    truth.reserve(num_shots * static_cast<std::size_t>(num_qubits));
    for (const auto& row : table) {
      if (!row.is_array() || row.size() != static_cast<std::size_t>(num_qubits))
        bad_field("ground_truth", "expected one entry per qubit");
      for (const auto& cell : row) {
        TransitionEvent ev;
        if (!cell.is_null()) {
          const auto kind = cell.value("kind", std::string{});
          if (kind == "relaxation")
            ev.kind = EventKind::relaxation;
          else if (kind == "excitation")
            ev.kind = EventKind::excitation;
          else
            bad_field("ground_truth", "unknown event kind '" + kind + "'");
          if (!cell.contains("time_ns") || !cell["time_ns"].is_number()) bad_field("ground_truth", "missing time_ns");
          ev.time_ns = cell["time_ns"].get<double>();
        }
        truth.push_back(ev);
      }
    }
  }

  const auto blob_name = m.value("blob", std::string(kBlobFile));
  std::ifstream blob(dir / blob_name, std::ios::binary);
  if (!blob) throw Error(ErrorCode::FileNotFound, (dir / blob_name).string());
  const std::size_t count = num_shots * traces_per_shot * 2 * num_bins;
  std::vector<unsigned char> bytes(count * 4);
  blob.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(blob.gcount()) != bytes.size())
    throw Error(ErrorCode::PayloadTruncated, "blob holds " + std::to_string(blob.gcount()) + " bytes, expected " +
                                                 std::to_string(bytes.size()));
  std::vector<float> samples(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * k]) |
                               (static_cast<std::uint32_t>(bytes[4 * k + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * k + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * k + 3]) << 24);
    samples[k] = std::bit_cast<float>(bits);
  }

  return LabeledDataset(num_qubits, layout, num_bins, dt, std::move(states), std::move(samples), std::move(truth),
                        std::move(if_freq));
}

}  // namespace qread
