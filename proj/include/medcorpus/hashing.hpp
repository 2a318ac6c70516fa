#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace medcorpus {

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& file);

/// First 32 hex chars (128 bits) of SHA-256; the id format for records,
/// requests and samples.
std::string digest32(std::string_view data);

/// Joins identity fields with the ASCII unit separator before hashing so
/// that ("ab","c") and ("a","bc") never collide.
std::string digest_fields(std::initializer_list<std::string_view> fields);

/// Named sub-seed: every random stream in a run derives from the root
/// seed and a stable name.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

std::string base64_encode(std::span<const unsigned char> bytes);

}  // namespace medcorpus
