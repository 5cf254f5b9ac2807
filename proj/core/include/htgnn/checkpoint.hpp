#pragma once

// Checkpoint file layout:
//   8 bytes   magic "HTGNNCKP"
//   8 bytes   header length n, unsigned little-endian
//   n bytes   JSON header: format version, schema, model config, and the
//             parameter table [{name, shape}] in registration order
//   rest      every parameter's values as little-endian IEEE-754 doubles,
//             concatenated in registration order

#include <filesystem>

#include "htgnn/params.hpp"

namespace htgnn {

void save_checkpoint(const HTGNNParams& params, const std::filesystem::path& path);
/// Rebuilds the parameter set; a malformed file raises ParseError.
HTGNNParams load_checkpoint(const std::filesystem::path& path);

}  // namespace htgnn
