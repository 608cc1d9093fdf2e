#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ptbox/model.hpp"

namespace ptbox {

// Optional sidecar content written next to the binary file as "<path>.meta",
// a small key=value text block. Vocabulary hashes let a later load refuse a
// mismatched dataset; extra lines (e.g. the resolved run config) pass through.
struct CheckpointMeta {
    std::uint64_t entities_hash = 0;
    std::uint64_t relations_hash = 0;
    std::uint32_t num_entities = 0;
    std::uint32_t num_relations = 0;
    std::string extra;  // appended verbatim
};

// Binary snapshot of every tensor plus the shape/config fields needed to
// rebuild the model without the original config file. Little-endian, fixed
// section order, no compression.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& m,
                     const CheckpointMeta* meta = nullptr);

// Throws DataError on missing file, bad magic/version, or truncation.
// Fills *meta from the sidecar when present (hashes stay 0 otherwise).
ModelParams load_checkpoint(const std::filesystem::path& path,
                            CheckpointMeta* meta = nullptr);

// Throws DataError unless the sidecar hashes match the vocabulary (checkpoints
// saved without a sidecar pass, with a warning left to the caller).
void check_vocab_compatible(const CheckpointMeta& meta, const Vocab& vocab);

}  // namespace ptbox
