#include <png.h>

#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "impactbench/core/error.hpp"
#include "impactbench/data/dataset.hpp"

namespace impactbench::data {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open image {}", path.string()));
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

// Reads the next whitespace-delimited header integer, skipping # comments.
int next_header_int(const std::vector<unsigned char>& bytes, std::size_t& pos, const std::string& what) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  long value = 0;
  const std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1'000'000) throw IoError(fmt::format("{}: header value too large", what));
    ++pos;
  }
  if (pos == start) throw IoError(fmt::format("{}: malformed PPM header", what));
  return static_cast<int>(value);
}

Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& what) {
  const int channels = bytes[1] == '6' ? 3 : 1;
  std::size_t pos = 2;
  const int width = next_header_int(bytes, pos, what);
  const int height = next_header_int(bytes, pos, what);
  const int maxval = next_header_int(bytes, pos, what);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError(fmt::format("{}: invalid PPM dimensions or maxval", what));
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(fmt::format("{}: malformed PPM header", what));
  ++pos;
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const std::size_t samples = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < samples * sample_bytes) throw IoError(fmt::format("{}: PPM data truncated", what));

  const Shape shape{channels, height, width};
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < samples; ++i) {
    unsigned value = bytes[pos + i * sample_bytes];
    if (sample_bytes == 2) value = (value << 8) | bytes[pos + i * 2 + 1];
    if (value > static_cast<unsigned>(maxval)) throw IoError(fmt::format("{}: sample exceeds maxval", what));
    // PPM interleaves channels per pixel; images are channel-major.
    const std::size_t pixel = i / channels;
    const std::size_t channel = i % channels;
    data[channel * shape.pixels() + pixel] = static_cast<double>(value) / maxval;
  }
  return Image::create(shape, std::move(data));
}

Image decode_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError(fmt::format("{}: cannot decode PNG: {}", path.string(), png.message));
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png), 0);
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError(fmt::format("{}: cannot decode PNG: {}", path.string(), message));
  }
  const Shape shape{channels, static_cast<int>(png.height), static_cast<int>(png.width)};
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    data[(i % channels) * shape.pixels() + i / channels] = buffer[i] / 255.0;
  }
  return Image::create(shape, std::move(data));
}

std::vector<unsigned char> interleave_8bit(const Image& image) {
  const std::size_t plane = image.shape().pixels();
  std::vector<unsigned char> out(image.shape().size());
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < image.channels(); ++c) {
      out[p * image.channels() + c] =
          static_cast<unsigned char>(std::lround(image.data()[static_cast<std::size_t>(c) * plane + p] * 255.0));
    }
  }
  return out;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  const std::string what = path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_ppm(bytes, what);
  static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return decode_png(path);
  throw IoError(fmt::format("{}: unsupported image format (expected binary PPM or PNG)", what));
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) throw ShapeError("PPM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << (image.channels() == 3 ? "P6" : "P5") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
  const std::vector<unsigned char> bytes = interleave_8bit(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) throw ShapeError("PNG output needs 1 or 3 channels");
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::vector<unsigned char> bytes = interleave_8bit(image);
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError(fmt::format("cannot write PNG {}: {}", path.string(), png.message));
  }
}

}  // namespace impactbench::data
