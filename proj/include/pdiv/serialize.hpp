#pragma once

#include "pdiv/alignment.hpp"
#include "pdiv/subspace.hpp"

#include <filesystem>
#include <string>

namespace pdiv {

/// JSON documents with a metadata block and row-major matrices as number
/// arrays. Doubles are written in shortest round-trip form, so loading
/// reproduces every matrix bit-exactly.
std::string pipeline_to_json(const ProjectionPipeline& pipeline);
ProjectionPipeline pipeline_from_json(const std::string& text);
void save_pipeline(const std::filesystem::path& path, const ProjectionPipeline& pipeline);
ProjectionPipeline load_pipeline(const std::filesystem::path& path);

std::string adapter_to_json(const TrainedAdapter& adapter);
TrainedAdapter adapter_from_json(const std::string& text);
void save_adapter(const std::filesystem::path& path, const TrainedAdapter& adapter);
TrainedAdapter load_adapter(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pdiv
