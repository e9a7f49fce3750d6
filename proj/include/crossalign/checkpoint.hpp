#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crossalign/model.hpp"
#include "crossalign/training.hpp"

namespace crossalign::ckpt {

// One named float64 array in the container.
struct TensorEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
};

// On-disk layout: a text manifest (format line, scalar fields, config
// key=value lines, one line per tensor with name/shape/count) terminated by
// "end", followed by the raw little-endian float64 blobs in manifest order.
// Bit-exact round-trip over compactness.
struct CheckpointFile {
    int epoch = 0;
    long step = 0;
    std::uint64_t vocab_hash = 0;
    std::string rng_state;                                   // serialized engine stream
    std::vector<std::pair<std::string, std::string>> config; // ordered snapshot
    std::vector<TensorEntry> tensors;

    const TensorEntry* find(const std::string& name) const;
    std::string config_value(const std::string& key, const std::string& fallback = "") const;
};

void write_checkpoint(const std::string& path, const CheckpointFile& f);
CheckpointFile read_checkpoint(const std::string& path);        // throws IoError

// -- model / optimizer bridges -----------------------------------------------

// Append every model tensor (stable names) to the container.
void pack_params(CheckpointFile& f, const model::ModelParams& p);

// Copy tensors back by name; shapes must match. Throws IoError on a missing
// name or shape mismatch.
void unpack_params(const CheckpointFile& f, model::ModelParams& p);

// Append optimizer moments as rank-1 entries ("adam.m.*" / "adam.v." / "adam.t.").
void pack_adam(CheckpointFile& f, const training::Adam& opt, const model::ModelParams& p);

// Restore moments for every tensor that has entries in the container.
void unpack_adam(const CheckpointFile& f, training::Adam& opt, const model::ModelParams& p);

// Reconstruct layer sizes recorded by pack_params' config duties — the caller
// stores d_emb/d_y/d_z/n_filters/vocab in `config`; this parses them back.
model::Dims dims_from_config(const CheckpointFile& f);
int vocab_size_from_config(const CheckpointFile& f);

}  // namespace crossalign::ckpt
