#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>

#include <zlib.h>

#include "textground/error.hpp"
#include "textground/zoomtext.hpp"

namespace textground {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char* type, const std::vector<unsigned char>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = ::crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<unsigned char> encode_png_rgb(std::size_t width, std::size_t height, const std::vector<unsigned char>& rgb) {
  std::vector<unsigned char> raw;
  raw.reserve(height * (1 + 3 * width));
  for (std::size_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + y * 3 * width, rgb.begin() + (y + 1) * 3 * width);
  }
  uLongf zsize = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> z(zsize);
  if (compress2(z.data(), &zsize, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw IoError("heatmap: zlib compression failed");
  }
  z.resize(zsize);

  std::vector<unsigned char> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<unsigned char> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", z);
  put_chunk(png, "IEND", {});
  return png;
}

}  // namespace

void write_heatmap_png(const std::filesystem::path& path, const TokenLayout& layout, const ZoomTextResult& result,
                       std::size_t cell_px) {
  if (layout.n_image_tokens == 0 || cell_px < 3) throw ValidationError("heatmap: nothing to render");
  const std::size_t width = layout.grid_w * cell_px, height = layout.grid_h * cell_px;
  const double peak = *std::max_element(result.map.scores.begin(), result.map.scores.end());
  const std::set<std::size_t> kept(result.selection.indices.begin(), result.selection.indices.end());

  std::vector<unsigned char> rgb(width * height * 3);
  for (std::size_t j = 0; j < layout.n_image_tokens; ++j) {
    const std::size_t row = j / layout.grid_w, col = j % layout.grid_w;
    const double level = peak > 0.0 ? result.map.scores[j] / peak : 0.0;
    const auto gray = static_cast<unsigned char>(std::clamp(level, 0.0, 1.0) * 255.0 + 0.5);
    const bool outlined = kept.count(layout.image_token_range.begin + j) > 0;
    for (std::size_t dy = 0; dy < cell_px; ++dy) {
      for (std::size_t dx = 0; dx < cell_px; ++dx) {
        const bool border = dx == 0 || dy == 0 || dx + 1 == cell_px || dy + 1 == cell_px;
        unsigned char* px = &rgb[((row * cell_px + dy) * width + col * cell_px + dx) * 3];
        if (outlined && border) {
          px[0] = 255;
          px[1] = 0;
          px[2] = 0;
        } else {
          px[0] = px[1] = px[2] = gray;
        }
      }
    }
  }

  const auto png = encode_png_rgb(width, height, rgb);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace textground
