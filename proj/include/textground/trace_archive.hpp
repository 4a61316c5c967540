#pragma once

#include <filesystem>

#include "textground/trace.hpp"

namespace textground {

inline constexpr int kTraceFormatVersion = 1;

// Writes `trace` as a directory archive: manifest.json plus one little-endian,
// row-major float32 `.f32` file per tensor. The archive is assembled in a
// sibling temporary directory and renamed into place. An existing archive (or
// empty directory) at `path` is replaced; any other existing path is an error.
void write_trace(const MultimodalTrace& trace, const std::filesystem::path& path);

// Reads and validates an archive written by write_trace.
MultimodalTrace read_trace(const std::filesystem::path& path);

}  // namespace textground
