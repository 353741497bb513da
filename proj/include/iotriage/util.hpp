#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace iotriage {

// Stable 64-bit FNV-1a; used wherever a hash must be identical across platforms.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view text,
                                              std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Lower-case hex SHA-256 digest.
[[nodiscard]] std::string sha256_hex(std::string_view data);

/// Fixed-point rendering, e.g. format_fixed(0.71428, 4) == "0.7143".
[[nodiscard]] std::string format_fixed(double value, int digits);

[[nodiscard]] std::string to_lower(std::string_view text);
[[nodiscard]] std::string trim(std::string_view text);
/// "Password Cracking" -> "password-cracking".
[[nodiscard]] std::string slugify(std::string_view text);

[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically via a temporary sibling file; creates parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF, embedded newlines.
[[nodiscard]] std::vector<std::vector<std::string>> parse_csv(std::string_view text);
[[nodiscard]] std::string csv_escape(std::string_view field);

}  // namespace iotriage
