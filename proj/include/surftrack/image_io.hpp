#pragma once

#include <filesystem>
#include <string>

#include "surftrack/image.hpp"

namespace surftrack {

/// Loads an 8-bit PNG as a [0, 1] grayscale image. RGB(A) inputs are
/// converted with 0.299 R + 0.587 G + 0.114 B before scaling.
Image read_png_gray(const std::filesystem::path& path);

/// Writes values clamped to [0, 1] as 8-bit grayscale, rounding to nearest.
void write_png_gray(const std::filesystem::path& path, const Image& image);
void write_png_mask(const std::filesystem::path& path, const Mask& mask);
Mask read_png_mask(const std::filesystem::path& path);

/// Binary PGM (P5), values clamped to [0, 1] then scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Image& image);

/// Rounds every pixel to the nearest 8-bit level, so an in-memory frame
/// equals what a PNG round trip would produce.
Image quantize_8bit(const Image& image);

std::uint8_t to_byte(double v);

}  // namespace surftrack
