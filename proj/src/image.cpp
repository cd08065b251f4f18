#include "maskmesh/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace maskmesh {

namespace {

struct ReadCursor {
  std::string_view data;
  std::size_t pos = 0;
};

[[noreturn]] void png_fail(png_structp, png_const_charp message) {
  throw Error(ErrorCode::InvalidInput, std::string("png: ") + message);
}

void png_warn(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + n > cur->data.size()) png_error(png, "truncated stream");
  std::memcpy(out, cur->data.data() + cur->pos, n);
  cur->pos += n;
}

void write_bytes(png_structp png, png_bytep in, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(in), n);
}

void flush_bytes(png_structp) {}

std::uint32_t be32(std::string_view s, std::size_t at) {
  return (std::uint32_t(std::uint8_t(s[at])) << 24) | (std::uint32_t(std::uint8_t(s[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(s[at + 2])) << 8) | std::uint32_t(std::uint8_t(s[at + 3]));
}

}  // namespace

RgbImage RgbImage::filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img;
  img.width = width;
  img.height = height;
  img.rgb.resize(height, 3 * width);
  for (int x = 0; x < width; ++x) {
    img.rgb.col(3 * x).setConstant(r);
    img.rgb.col(3 * x + 1).setConstant(g);
    img.rgb.col(3 * x + 2).setConstant(b);
  }
  return img;
}

void RgbImage::paint(const RleMask& mask, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (mask.width != width || mask.height != height) {
    throw Error(ErrorCode::DimensionMismatch, "paint mask size differs from image");
  }
  const Bitmap bits = rle_decode(mask);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!bits(y, x)) continue;
      rgb(y, 3 * x) = r;
      rgb(y, 3 * x + 1) = g;
      rgb(y, 3 * x + 2) = b;
    }
  }
}

EncodedImage encode_png(const RgbImage& image) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error(ErrorCode::InvalidInput, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_write_struct(png, info); }
  } cleanup{&png, &info};
  EncodedImage out;
  out.width = image.width;
  out.height = image.height;
  png_set_write_fn(png, &out.png, write_bytes, flush_bytes);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(3 * image.width));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < 3 * image.width; ++x) row[x] = image.rgb(y, x);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  return out;
}

RgbImage decode_png(std::string_view bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error(ErrorCode::InvalidInput, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  struct Cleanup {
    png_structp* png;
    png_infop* info;
    ~Cleanup() { png_destroy_read_struct(png, info, nullptr); }
  } cleanup{&png, &info};

  ReadCursor cursor{bytes};
  png_set_read_fn(png, &cursor, read_bytes);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  RgbImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.rgb.resize(img.height, 3 * img.width);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < 3 * img.width; ++x) img.rgb(y, x) = row[x];
  }
  return img;
}

EncodedImage load_png_file(const std::filesystem::path& path) {
  EncodedImage img;
  img.png = read_file(path);
  static constexpr char kSignature[] = "\x89PNG\r\n\x1a\n";
  if (img.png.size() < 24 || img.png.compare(0, 8, kSignature, 8) != 0 ||
      img.png.compare(12, 4, "IHDR") != 0) {
    throw Error(ErrorCode::InvalidInput, path.string() + " is not a PNG file");
  }
  img.width = static_cast<int>(be32(img.png, 16));
  img.height = static_cast<int>(be32(img.png, 20));
  return img;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::InvalidInput, "short write to " + path.string());
}

}  // namespace maskmesh
