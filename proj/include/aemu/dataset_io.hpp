#pragma once

#include <filesystem>

#include "aemu/dataset.hpp"

namespace aemu {

// Dataset container formats. Binary layout (all little-endian):
//   magic "AEMU1" | u32 version | u64 schema hash | u64 row count |
//   u32 meta length | meta JSON bytes | rows x 60 f64 (32 inputs, 28 outputs)
// The CSV form starts with an optional "#meta <json>" line, then the
// canonical 60-column header (byte-exact), then one row per line with
// round-trip-exact decimal formatting. Files written by external tools load
// as long as the header matches.
inline constexpr int kDatasetVersion = 1;

// Chooses the format by extension: ".csv" writes CSV, anything else binary.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

void save_dataset_binary(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_binary(const std::filesystem::path& path);
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

} // namespace aemu
