#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "maskmesh/mask.hpp"

namespace maskmesh {

/// 8-bit RGB image, height rows by 3*width interleaved columns.
struct RgbImage {
  int width = 0;
  int height = 0;
  Grid<std::uint8_t> rgb;

  static RgbImage filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void paint(const RleMask& mask, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// PNG bytes with their decoded dimensions.
struct EncodedImage {
  int width = 0;
  int height = 0;
  std::string png;

  bool operator==(const EncodedImage&) const = default;
};

EncodedImage encode_png(const RgbImage& image);
RgbImage decode_png(std::string_view png);

/// Reads only the header to fill in dimensions.
EncodedImage load_png_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace maskmesh
