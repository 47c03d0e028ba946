#pragma once

#include <filesystem>
#include <iosfwd>

#include "clapper/compressors.hpp"

namespace clapper::compress {

// Binary container, little-endian:
//   magic "CLPK", u32 version,
//   u32 metadata count, then (string key, string value) pairs,
//   u32 array count, then per array: string name, u32 rank, u64 dims[rank],
//   f64 values[product(dims)].
// Strings are a u32 byte length followed by the bytes. Arrays are written in
// name order, so equal parameters always produce equal bytes.
void write_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace clapper::compress
