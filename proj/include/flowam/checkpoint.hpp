#pragma once

#include "flowam/nnet.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace flowam {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    std::uint64_t seed = 0;
    int iteration = 0;
    std::vector<std::string> labels;  // names of the condition labels, if any
};

struct Checkpoint {
    VelocityField model;
    CheckpointMeta meta;
};

// One JSON header line (format, format_version, architecture, n_params, seed, iteration, labels)
// followed by the flat parameter vector as little-endian doubles. Written atomically.
void save_checkpoint(const std::filesystem::path& path, const VelocityField& model, const CheckpointMeta& meta);
// IoError on malformed files; NonFiniteError if any stored parameter is NaN/Inf.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const VelocityField& model, const CheckpointMeta& meta);
Checkpoint parse_checkpoint(std::string_view bytes);

}  // namespace flowam
