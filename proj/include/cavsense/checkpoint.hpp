#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cavsense/cavity_sim.hpp"
#include "cavsense/neuralnet.hpp"

namespace cavsense {

// A trained model plus what is needed to use and check it: the frequency grid
// its inputs were sampled on, the seed it was initialised from, and one probe
// input with the prediction it produced when saved.
struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    FrequencyGrid grid;
    FeatureTensor probe_input;
    double probe_prediction = 0.0;
};

// Runs the model on probe to fill probe_prediction.
Checkpoint make_checkpoint(const ModelParams& params, std::uint64_t seed, const FrequencyGrid& grid,
                           const FeatureTensor& probe);

// Binary container, little-endian: magic "CAVSNN01", architecture, seed,
// grid, the eight parameter blocks by name in declaration order, probe input
// and prediction, then an FNV-1a 64 checksum of everything before it.
std::string serialize_checkpoint(const Checkpoint& c);

// Throws format_error on bad magic, truncation, checksum mismatch, block
// mismatch, or when the stored probe prediction is not reproduced within 1e-12.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cavsense
