#pragma once

#include "levybsde/field.hpp"
#include "levybsde/sde.hpp"

#include <string>

namespace levybsde {

// Versioned little-endian binary container shared by path bundles and value
// fields (magic "LBSD", format version, type tag, flat column-major arrays).

void write_bundle(const std::string& path, const PathBundle& bundle);
PathBundle read_bundle(const std::string& path);

void write_field(const std::string& path, const ValueField& field);
ValueField read_field(const std::string& path);

/// FNV-1a hash of a byte string; used for content-addressed artifact caching.
std::uint64_t content_hash(const std::string& bytes);

} // namespace levybsde
