#pragma once

#include <string>

#include "elbnn/graph.hpp"

namespace elbnn {

// ELBN checkpoint: magic "ELBN", u32 version, then a count-prefixed table of
// (name-length, name bytes, rank, dims, raw float32 payload), all
// little-endian. Byte layout documented in docs/checkpoint_format.md.
// Round-trips are bit-exact.
void save_checkpoint(LayerGraph& graph, const std::string& path);

// Loads into a graph of identical parameter names/shapes; throws on any
// mismatch (missing, extra, or mis-shaped entries).
void load_checkpoint(LayerGraph& graph, const std::string& path);

}  // namespace elbnn
