#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "arim/radar_sim.hpp"
#include "arim/spectral.hpp"

namespace arim {

inline constexpr std::uint32_t kManifestVersion = 1;
inline constexpr std::uint32_t kRecordVersion = 1;

struct DatasetManifest {
    std::uint32_t version = kManifestVersion;
    GenerationConfig generation;  // includes the radar configuration
    StftConfig stft;
    std::uint64_t base_seed = 0;
    std::size_t sample_count = 0;
    double test_fraction = 1.0 / 6.0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    // Directory holding the manifest and records; not serialized.
    std::filesystem::path root;

    const RadarConfig& radar() const { return generation.radar; }
    std::filesystem::path record_path(std::size_t index) const;

    // Throws ConfigError unless the splits are disjoint and cover every index.
    void validate_split() const;

    KeyValueConfig to_config() const;
    static DatasetManifest from_config(const KeyValueConfig& kv);
    void save(const std::filesystem::path& path) const;
    // Loads a manifest; `path` may name the file or its directory.
    static DatasetManifest load(const std::filesystem::path& path);
};

inline constexpr const char* kManifestFileName = "manifest.cfg";

std::string record_file_name(std::size_t index);

// Record layout: "ARIM2", u32 version, u32 length, clean then interfered as
// interleaved f32 (re, im), u32 target count + (distance, amplitude, phase)
// f32, u32 interferer count + (slope_ratio, sir_db, center_time_s, phase) f32,
// f32 snr_db. All little-endian.
void write_sample(const std::filesystem::path& path, const ScenarioSample& sample);
ScenarioSample read_sample_file(const std::filesystem::path& path);

// Rounds every stored field through float32, i.e. what a record round-trip yields.
ScenarioSample quantize_sample(const ScenarioSample& sample);

// Regenerates sample `index` from the manifest's configuration and seed.
ScenarioSample regenerate_sample(const DatasetManifest& manifest, std::size_t index);

// Writes records for every index plus the manifest (train/test split 5:1 by
// default, test indices last). Existing records are overwritten.
DatasetManifest generate_dataset(DatasetManifest manifest, const std::filesystem::path& out_dir);

// Moves a seeded shuffled fraction of the training indices to validation.
DatasetManifest split_dataset(DatasetManifest manifest, double validation_fraction, std::uint64_t seed);

ScenarioSample read_sample(const DatasetManifest& manifest, std::size_t index);
std::vector<ScenarioSample> read_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices);

inline constexpr std::size_t kDefaultOodCount = 2400;

// Out-of-distribution test set: every sample is a test sample whose
// interferer count is drawn from `interferer_counts`.
DatasetManifest generate_ood_testset(DatasetManifest manifest, const std::vector<int>& interferer_counts,
                                     std::size_t count, const std::filesystem::path& out_dir);

} // namespace arim
