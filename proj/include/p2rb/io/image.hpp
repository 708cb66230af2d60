// SPDX-License-Identifier: Apache-2.0
//
// Image files: 8-bit PNG and PGM input, 8-bit grayscale output, 16-bit PGM
// label maps and a color rendering of label maps.
#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "p2rb/error.hpp"
#include "p2rb/grid.hpp"
#include "p2rb/io/text.hpp"

namespace p2rb::io {

/// RGB bytes, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bytes;
};

namespace detail {

class PgmReader {
 public:
  explicit PgmReader(std::string_view d) : d_(d) {}

  std::string_view token() {
    for (;;) {
      while (pos_ < d_.size() && std::isspace(static_cast<unsigned char>(d_[pos_]))) ++pos_;
      if (pos_ < d_.size() && d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < d_.size() && !std::isspace(static_cast<unsigned char>(d_[pos_]))) ++pos_;
    if (start == pos_) throw Error(ErrorKind::Parse, "pgm: truncated header");
    return d_.substr(start, pos_ - start);
  }

  long long integer() {
    long long v = 0;
    if (!parse_int(token(), v)) throw Error(ErrorKind::Parse, "pgm: bad header field");
    return v;
  }

  /// Skips the single whitespace byte that ends a binary header.
  std::size_t raster_start() { return pos_ + 1; }

 private:
  std::string_view d_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Samples divided by maxval.
inline Image decode_pgm(std::string_view data) {
  detail::PgmReader r(data);
  const std::string_view magic = r.token();
  if (magic != "P5" && magic != "P2") throw Error(ErrorKind::Parse, "pgm: unsupported magic number");
  const long long w = r.integer();
  const long long h = r.integer();
  const long long maxval = r.integer();
  if (w <= 0 || h <= 0 || w > 65535 || h > 65535) throw Error(ErrorKind::Parse, "pgm: bad dimensions");
  if (maxval <= 0 || maxval > 65535) throw Error(ErrorKind::Parse, "pgm: bad maxval");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const double scale = static_cast<double>(maxval);
  if (magic == "P2") {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const long long v = r.integer();
      if (v < 0 || v > maxval) throw Error(ErrorKind::Parse, "pgm: sample out of range");
      img[i] = static_cast<double>(v) / scale;
    }
    return img;
  }
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t start = r.raster_start();
  if (data.size() < start + img.size() * bps) throw Error(ErrorKind::Parse, "pgm: truncated raster");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data()) + start;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned v = bps == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
    img[i] = static_cast<double>(std::min<unsigned>(v, static_cast<unsigned>(maxval))) / scale;
  }
  return img;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::string encode_pgm8(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (double v : img.data()) out.push_back(static_cast<char>(to_byte(v)));
  return out;
}

/// 16-bit big-endian PGM of raw integer values.
inline std::string encode_pgm16(const Grid<std::uint16_t>& g) {
  std::string out = "P5\n" + std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n65535\n";
  for (std::uint16_t v : g.data()) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

inline Grid<std::uint16_t> decode_pgm16(std::string_view data) {
  const Image img = decode_pgm(data);
  Grid<std::uint16_t> g(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) g[i] = static_cast<std::uint16_t>(std::lround(img[i] * 65535.0));
  return g;
}

/// Decodes PNG (any color type, converted to 8-bit luminance) or PGM by signature.
inline Image decode_image(std::string_view data) {
  if (data.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(data.data()), 0, 8) == 0) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&im, data.data(), data.size()))
      throw Error(ErrorKind::Parse, std::string("png: ") + im.message);
    im.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
      png_image_free(&im);
      throw Error(ErrorKind::Parse, std::string("png: ") + im.message);
    }
    Image img(static_cast<int>(im.width), static_cast<int>(im.height));
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = buf[i] / 255.0;
    return img;
  }
  if (data.size() >= 2 && data[0] == 'P' && (data[1] == '5' || data[1] == '2')) return decode_pgm(data);
  throw Error(ErrorKind::Parse, "unrecognized image format (expected PNG or PGM)");
}

inline Image read_image(const std::string& path) {
  try {
    return decode_image(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) throw Error(ErrorKind::Parse, path + ": " + e.what());
    throw;
  }
}

namespace detail {

inline std::string png_encode(const void* pixels, int width, int height, png_uint_32 format) {
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(width);
  im.height = static_cast<png_uint_32>(height);
  im.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&im, nullptr, &size, 0, pixels, 0, nullptr))
    throw Error(ErrorKind::Io, std::string("png: ") + im.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&im, out.data(), &size, 0, pixels, 0, nullptr))
    throw Error(ErrorKind::Io, std::string("png: ") + im.message);
  out.resize(size);
  return out;
}

}  // namespace detail

inline std::string encode_png8(const Image& img) {
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) px[i] = to_byte(img[i]);
  return detail::png_encode(px.data(), img.width(), img.height(), PNG_FORMAT_GRAY);
}

inline std::string encode_png_rgb(const RgbImage& img) {
  if (img.bytes.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw Error(ErrorKind::Config, "rgb image buffer size mismatch");
  return detail::png_encode(img.bytes.data(), img.width, img.height, PNG_FORMAT_RGB);
}

/// Writes PNG when the path ends in ".png", 8-bit PGM otherwise.
inline void write_image(const std::string& path, const Image& img) {
  const bool png = path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0;
  write_file(path, png ? encode_png8(img) : encode_pgm8(img));
}

/// Label-map storage: label l >= 0 is stored as l + 1, 0 means unassigned,
/// 65535 a barrier pixel and 65534 background.
inline std::uint16_t encode_label(int label) {
  if (label == -2) return 65535;
  if (label == -3) return 65534;
  if (label < 0) return 0;
  if (label >= 65533) throw Error(ErrorKind::Config, "label map: too many labels for 16 bits");
  return static_cast<std::uint16_t>(label + 1);
}

inline int decode_label(std::uint16_t v) {
  if (v == 65535) return -2;
  if (v == 65534) return -3;
  return static_cast<int>(v) - 1;
}

template <class T>
Grid<std::uint16_t> encode_labels(const Grid<T>& labels) {
  Grid<std::uint16_t> g(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) g[i] = encode_label(static_cast<int>(labels[i]));
  return g;
}

/// Deterministic pseudo-random color per label; negative labels map to fixed grays.
inline std::array<std::uint8_t, 3> label_color(int label) {
  if (label == -2) return {255, 255, 255};
  if (label < 0) return {0, 0, 0};
  std::uint32_t h = static_cast<std::uint32_t>(label) * 2654435761u;
  h ^= h >> 15;
  return {static_cast<std::uint8_t>(64 + (h & 0xbf)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xbf)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xbf))};
}

template <class T>
RgbImage colorize_labels(const Grid<T>& labels) {
  RgbImage out{labels.width(), labels.height(), std::vector<std::uint8_t>(labels.size() * 3)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = label_color(static_cast<int>(labels[i]));
    std::copy(c.begin(), c.end(), out.bytes.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

}  // namespace p2rb::io
