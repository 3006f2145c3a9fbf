#pragma once

#include <filesystem>
#include <string_view>

#include "qread/trace.hpp"

namespace qread {

inline constexpr std::string_view kDatasetFormat = "rdfmt-1";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kBlobFile = "samples.bin";

/// Writes `dir/manifest.json` and `dir/samples.bin` (little-endian float32,
/// shot-major, trace-major, I then Q, time-minor). Creates `dir` if needed.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

/// Throws FileNotFound, FormatError (naming the offending manifest field) or
/// PayloadTruncated.
LabeledDataset load_dataset(const std::filesystem::path& dir);

}  // namespace qread
