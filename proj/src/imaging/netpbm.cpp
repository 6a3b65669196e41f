#include "mcseg/imaging/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace mcseg::imaging {

namespace {

struct Header {
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  Header header(const char* magic) {
    if (bytes_.size() < 2 || bytes_[0] != magic[0] || bytes_[1] != magic[1]) {
      fail(std::string("expected ") + magic + " magic");
    }
    pos_ = 2;
    Header h;
    h.width = number();
    h.height = number();
    h.maxval = static_cast<unsigned>(number());
    // Exactly one whitespace byte separates the header from the raster.
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) fail("malformed header");
    ++pos_;
    if (h.width == 0 || h.height == 0) fail("zero dimension");
    if (h.maxval == 0 || h.maxval > 65535) fail("maxval out of range");
    return h;
  }

  std::vector<unsigned> samples(std::size_t count, unsigned maxval) {
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    if (bytes_.size() - pos_ < count * bytes_per) fail("truncated raster");
    std::vector<unsigned> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = static_cast<unsigned char>(bytes_[pos_++]);
      if (bytes_per == 2) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_++]);
      if (v > maxval) fail("sample exceeds maxval");
      out[i] = v;
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ImageIoError(path_.string() + ": " + what); }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_++] - '0');
      if (++digits > 9) fail("header number too large");
    }
    if (digits == 0) fail("malformed header");
    return v;
  }

  std::filesystem::path path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw ImageIoError("write failed: " + path.string());
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path, double spacing_mm) {
  Reader reader(path);
  const Header h = reader.header("P5");
  const auto samples = reader.samples(h.width * h.height, h.maxval);
  const std::uint16_t depth = h.maxval > 255 ? 65535 : 255;
  GrayImage image(h.width, h.height, depth, spacing_mm);
  auto& px = image.pixels();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    px[i] = h.maxval == depth ? static_cast<std::uint16_t>(samples[i])
                              : static_cast<std::uint16_t>((samples[i] * depth + h.maxval / 2) / h.maxval);
  }
  return image;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << '\n' << image.max_value() << '\n';
  std::vector<char> raster;
  const bool wide = image.max_value() > 255;
  raster.reserve(image.pixel_count() * (wide ? 2 : 1));
  for (std::uint16_t v : image.pixels()) {
    if (wide) raster.push_back(static_cast<char>(v >> 8));
    raster.push_back(static_cast<char>(v & 0xFF));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  finish(out, path);
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  Reader reader(path);
  const Header h = reader.header("P5");
  const auto samples = reader.samples(h.width * h.height, h.maxval);
  BinaryMask mask(h.width, h.height);
  for (std::size_t y = 0; y < h.height; ++y) {
    for (std::size_t x = 0; x < h.width; ++x) mask.set(x, y, samples[y * h.width + x] != 0);
  }
  return mask;
}

void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::vector<char> raster(mask.bits().size());
  for (std::size_t i = 0; i < raster.size(); ++i) raster[i] = mask.bits()[i] ? static_cast<char>(255) : 0;
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  finish(out, path);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  Reader reader(path);
  const Header h = reader.header("P6");
  if (h.maxval != 255) throw ImageIoError(path.string() + ": only 8-bit PPM is supported");
  const auto samples = reader.samples(h.width * h.height * 3, h.maxval);
  RgbImage image(h.width, h.height);
  for (std::size_t y = 0; y < h.height; ++y) {
    for (std::size_t x = 0; x < h.width; ++x) {
      const std::size_t i = (y * h.width + x) * 3;
      image.at(x, y) = {static_cast<std::uint8_t>(samples[i]), static_cast<std::uint8_t>(samples[i + 1]),
                        static_cast<std::uint8_t>(samples[i + 2])};
    }
  }
  return image;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<char> raster;
  raster.reserve(image.pixels().size() * 3);
  for (const Rgb& p : image.pixels()) {
    raster.push_back(static_cast<char>(p.r));
    raster.push_back(static_cast<char>(p.g));
    raster.push_back(static_cast<char>(p.b));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  finish(out, path);
}

}  // namespace mcseg::imaging
