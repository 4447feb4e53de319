#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace nnlab {

// FNV-1a, used for config and artifact content hashes.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
std::uint64_t fnv1a_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

} // namespace nnlab
