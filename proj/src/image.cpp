#include "tineuvox/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace tnv {

namespace {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (file) std::fclose(file);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
  }
};

std::string temp_path_for(const std::string& path) { return path + ".tmp"; }

void rename_over(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw io_error("truncated file while reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Image load_png(const std::string& path, const Vec3<float>& background) {
  PngReadCloser ctx;
  ctx.file = std::fopen(path.c_str(), "rb");
  if (!ctx.file) throw io_error("cannot open image '" + path + "'");

  unsigned char header[8];
  if (std::fread(header, 1, 8, ctx.file) != 8 || png_sig_cmp(header, 0, 8))
    throw parse_error("'" + path + "' is not a PNG file");

  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw io_error("png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw io_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw parse_error("PNG decode error in '" + path + "'");

  png_init_io(ctx.png, ctx.file);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const int width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  const int color_type = png_get_color_type(ctx.png, ctx.info);

  // Normalize every variant to 8-bit RGBA rows.
  if (bit_depth == 16) png_set_strip_16(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(ctx.png);
  png_set_filler(ctx.png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(ctx.png, ctx.info);

  std::vector<unsigned char> data(static_cast<std::size_t>(width) * height * 4);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = data.data() + static_cast<std::size_t>(r) * width * 4;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Image img(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const unsigned char* px = data.data() + (static_cast<std::size_t>(r) * width + c) * 4;
      const float a = px[3] / 255.0f;
      for (int k = 0; k < 3; ++k)
        img.at(r, c, k) = a * (px[k] / 255.0f) + (1.0f - a) * background[k];
    }
  }
  return img;
}

void save_png(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0) throw invalid_input("save_png: empty image");
  const std::string tmp = temp_path_for(path);
  {
    PngWriteCloser ctx;
    ctx.file = std::fopen(tmp.c_str(), "wb");
    if (!ctx.file) throw io_error("cannot open '" + tmp + "' for writing");
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw io_error("png_create_write_struct failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw io_error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw io_error("PNG encode error for '" + path + "'");

    png_init_io(ctx.png, ctx.file);
    png_set_IHDR(ctx.png, ctx.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c)
        for (int k = 0; k < 3; ++k) {
          const float v = std::fmin(std::fmax(img.at(r, c, k), 0.0f), 1.0f);
          row[static_cast<std::size_t>(c) * 3 + k] =
              static_cast<unsigned char>(std::lround(v * 255.0f));
        }
      png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
  }
  rename_over(tmp, path);
}

void save_raw(const Image& img, const std::string& path) {
  const std::string tmp = temp_path_for(path);
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw io_error("cannot open '" + tmp + "' for writing");
    os.write("TNVR", 4);
    write_u32(os, 1u);
    write_u32(os, static_cast<std::uint32_t>(img.width));
    write_u32(os, static_cast<std::uint32_t>(img.height));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(img.rgb.data()),
             static_cast<std::streamsize>(img.rgb.size() * sizeof(float)));
    if (!os) throw io_error("write failed for '" + tmp + "'");
  }
  rename_over(tmp, path);
}

Image load_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TNVR", 4) != 0)
    throw parse_error("'" + path + "' is not a raw image dump (bad magic)");
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw parse_error("unsupported raw image version " + std::to_string(version));
  const int width = static_cast<int>(read_u32(is));
  const int height = static_cast<int>(read_u32(is));
  if (width <= 0 || height <= 0) throw parse_error("invalid raw image dimensions");
  Image img(width, height);
  is.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size() * sizeof(float)));
  if (!is) throw io_error("truncated raw image '" + path + "'");
  return img;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = temp_path_for(path);
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw io_error("cannot open '" + tmp + "' for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw io_error("write failed for '" + tmp + "'");
  }
  rename_over(tmp, path);
}

}  // namespace tnv
