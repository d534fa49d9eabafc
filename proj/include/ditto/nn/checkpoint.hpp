/// Checkpoint container: a JSON manifest (config echo, parameter name/shape
/// table, payload checksum) followed by the raw little-endian float32
/// parameter payload. Format version pinned; corrupt payloads fail the
/// checksum on load.
#pragma once

#include <filesystem>
#include <memory>

#include "ditto/nn/model.hpp"

namespace ditto::nn {

void save_model(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

}  // namespace ditto::nn
