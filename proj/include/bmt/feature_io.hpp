#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bmt/features.hpp"

namespace bmt {

// Binary feature container ("BMF1"):
//   magic[4]="BMF1", version u32, n_frames u32, dim u32, window_s f32,
//   shift_s f32, then n_frames*dim row-major float32. Little-endian.
// Embeddings reuse the same container with dim=64.
void write_feature_file(const std::filesystem::path& path, const FrameSequence& seq);

FrameSequence read_feature_file(const std::filesystem::path& path);

// CSV export with a column-name header; first column is t_start_s.
void write_feature_csv(const std::filesystem::path& path, const FrameSequence& seq,
                       const std::vector<std::string>& column_names);

// All .bmf files in a directory, source_id = file stem, sorted by id.
std::vector<FrameSequence> read_feature_dir(const std::filesystem::path& dir);

extern const char* const kFeatureFileExt;  // ".bmf"

}  // namespace bmt
