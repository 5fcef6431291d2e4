#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace trendlens {

/// FNV-1a over raw bytes. Stable across platforms and runs.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer; used to derive well-spread seeds and hash parameters.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stable 64-bit string hash (FNV-1a followed by a mixing step).
constexpr std::uint64_t stable_hash(std::string_view s) noexcept { return mix64(fnv1a64(s)); }

/// Named seed derivation: the same global seed fans out to independent component seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) noexcept {
    return mix64(seed ^ fnv1a64(component));
}

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const unsigned char> bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view s);

/// printf-style "%.*g".
std::string format_g(double value, int significant = 6);

}  // namespace trendlens
