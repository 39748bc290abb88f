#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/fixture.hpp"

namespace cavsense {

inline constexpr std::string_view kManifestName = "manifest.csv";
inline constexpr std::string_view kFixtureLeftName = "fixture_left.s2p";
inline constexpr std::string_view kFixtureRightName = "fixture_right.s2p";

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::string> filenames;  // parallel to samples
    std::optional<FixturePair> fixtures;
};

// sample_000.s2p, sample_001.s2p, ... (width grows past 1000 samples).
std::vector<std::string> sample_filenames(std::size_t count);

// filename,fraction,provenance,parent_lo,parent_hi,seed; absent optionals
// are empty cells, reals use %.17g.
std::string manifest_csv(std::span<const LabeledSample> samples, std::span<const std::string> filenames);

struct ManifestRow {
    std::string filename;
    double fraction = 0.0;
    Provenance provenance = Provenance::synthetic;
    std::optional<double> parent_lo;
    std::optional<double> parent_hi;
    std::optional<std::uint64_t> seed;
};

// parse_error (with line number) on malformed rows or a wrong header.
std::vector<ManifestRow> parse_manifest(std::string_view text);

// Writes the .s2p files, manifest.csv and, when given, both fixture files.
// The directory is created if needed.
void write_dataset(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                   const std::optional<FixturePair>& fixtures = std::nullopt);

// Reads manifest.csv and every listed file. Fixtures are loaded when both
// fixture files exist.
Dataset read_dataset(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace cavsense
