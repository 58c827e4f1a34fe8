#include "sls/pgm.hpp"

#include <cctype>
#include <fstream>

#include "sls/errors.hpp"

namespace sls {

namespace {

class HeaderScanner {
 public:
  HeaderScanner(const std::string& bytes, const std::string& origin)
      : bytes_(bytes), origin_(origin) {}

  // Whitespace and '#'-to-end-of-line comments separate header tokens.
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int next_int(const char* what) {
    skip_separators();
    if (pos_ >= bytes_.size())
      throw FormatError(origin_ + ": truncated header, expected " + std::string(what) +
                        " at offset " + std::to_string(pos_));
    if (!std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError(origin_ + ": expected " + std::string(what) + " at offset " +
                        std::to_string(pos_));
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000L)
        throw FormatError(origin_ + ": " + std::string(what) + " too large at offset " +
                          std::to_string(pos_));
      ++pos_;
    }
    return static_cast<int>(v);
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 2)
    throw FormatError(origin + ": truncated header at offset 0 (no magic)");
  if (bytes[0] != 'P')
    throw FormatError(origin + ": not a portable anymap, bad magic at offset 0");
  if (bytes[1] != '5') {
    if (bytes[1] >= '1' && bytes[1] <= '7')
      throw FormatError(origin + ": unsupported format P" + std::string(1, bytes[1]) +
                        " (only binary P5 is supported)");
    throw FormatError(origin + ": bad magic at offset 1");
  }

  HeaderScanner scan(bytes, origin);
  scan.advance(2);
  const int w = scan.next_int("width");
  const int h = scan.next_int("height");
  const int maxval = scan.next_int("maxval");
  if (w <= 0 || h <= 0)
    throw FormatError(origin + ": non-positive dimensions " + std::to_string(w) + "x" +
                      std::to_string(h));
  if (maxval != 255)
    throw FormatError(origin + ": unsupported maxval " + std::to_string(maxval) +
                      " (only 255 is supported)");
  // Exactly one whitespace byte separates the header from the payload.
  if (scan.pos() >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[scan.pos()])))
    throw FormatError(origin + ": missing payload separator at offset " +
                      std::to_string(scan.pos()));
  scan.advance(1);

  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t have = bytes.size() - scan.pos();
  if (have < need)
    throw FormatError(origin + ": truncated payload at offset " +
                      std::to_string(bytes.size()) + " (have " + std::to_string(have) +
                      " of " + std::to_string(need) + " bytes)");
  if (have > need)
    throw FormatError(origin + ": " + std::to_string(have - need) +
                      " trailing bytes after payload at offset " +
                      std::to_string(scan.pos() + need));

  GrayImage img;
  img.w = w;
  img.h = h;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(scan.pos()), bytes.end());
  return img;
}

std::string serialize_pgm(const GrayImage& img) {
  if (img.h <= 0 || img.w <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.h) * static_cast<std::size_t>(img.w))
    throw UsageError("serialize_pgm: inconsistent image " + std::to_string(img.w) + "x" +
                     std::to_string(img.h) + " with " + std::to_string(img.pixels.size()) +
                     " pixels");
  std::string out = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes, path);
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open image for writing: " + path);
  const std::string bytes = serialize_pgm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

}  // namespace sls
