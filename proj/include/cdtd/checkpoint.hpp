#pragma once

#include <cstdint>
#include <string>

#include "cdtd/model.hpp"

namespace cdtd {

// Self-describing binary checkpoint: "CDTD" magic, u32 format version,
// schema JSON, preprocessing state (float64), schedule registry (float64),
// network config, named float32 tensors (live, EMA, normalizer), train
// metadata. Little-endian. save(load(x)) is byte-identical to save(x).
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace cdtd
