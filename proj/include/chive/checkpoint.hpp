#pragma once

#include <cstdint>
#include <string>

#include "chive/model.hpp"
#include "chive/params.hpp"

namespace chive {

// Versioned binary container of named parameter tensors: little-endian
// 64-bit values, shape table, CRC-32 over the payload. The header carries
// the model kind, its config, the training step, and optionally the
// optimizer moments so training can resume bit-exactly.
struct Checkpoint {
    std::string kind;  // "chive" | "baseline"
    ModelConfig config;
    std::uint64_t step = 0;
    ParameterStore params;
    std::vector<double> adam_m, adam_v;  // empty when absent
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the right model type and copies the stored values into it.
std::unique_ptr<ProsodyModel> model_from_checkpoint(const Checkpoint& checkpoint);
std::unique_ptr<ProsodyModel> load_model(const std::string& path);

}  // namespace chive
