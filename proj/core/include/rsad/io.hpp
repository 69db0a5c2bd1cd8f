#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rsad/image.hpp"

namespace rsad {

/// Decodes a PNG/JPEG file; 3-channel results are RGB ordered.
Image read_image(const std::filesystem::path& path);

/// Decodes as single-channel grayscale.
Image read_image_gray(const std::filesystem::path& path);

/// Lossless PNG encode, written atomically (temp file + rename).
void write_png(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> encode_png(const Image& img);

void atomic_write_file(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& text);

std::string read_text(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Recursively lists image files (png/jpg/jpeg/bmp) as paths relative to
/// root, sorted lexicographically.
std::vector<std::filesystem::path> list_image_files(
    const std::filesystem::path& root);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string fnv1a64_hex(std::span<const std::uint8_t> bytes);

/// Fixed-format float for byte-stable reports: %.{digits}f.
std::string format_fixed(double value, int digits);

/// Round-trip-exact float formatting (%.17g).
std::string format_exact(double value);

}  // namespace rsad
