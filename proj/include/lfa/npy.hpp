// Minimal NPY (v1.0) support for 2-D little-endian float arrays.
#pragma once

#include "lfa/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace lfa::npy {

enum class Dtype { f4, f8 };

/// Serialized bytes of a C-contiguous 2-D array: magic, version 1.0, header
/// dict padded with spaces to a 64-byte boundary and terminated by '\n', then
/// the payload. Values are narrowed to float for Dtype::f4.
std::string encode(const Matrix& m, Dtype dtype);

/// Parses bytes produced by any NPY writer for a 2-D '<f4' or '<f8' C-order
/// array. Errors: BadMagic, HeaderParse, UnsupportedDtype, ShapeMismatch.
Matrix decode(const std::string& bytes);

/// Throws IoFailure when the file cannot be written.
void save(const std::filesystem::path& path, const Matrix& m, Dtype dtype);
/// Throws ArchiveNotFound when the file does not exist.
Matrix load(const std::filesystem::path& path);

}  // namespace lfa::npy
