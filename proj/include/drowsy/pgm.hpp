#pragma once

// Binary PGM (P5, maxval 255) and directory-of-frames input.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/imaging.hpp"

namespace drowsy {

namespace detail {

inline void skip_pgm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pgm_int(std::istream& in, const std::string& what) {
  skip_pgm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw FormatError("PGM: bad " + what);
  return v;
}

}  // namespace detail

inline GrayImage read_pgm(std::istream& in) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') throw FormatError("PGM: expected P5 magic");
  const int w = detail::read_pgm_int(in, "width");
  const int h = detail::read_pgm_int(in, "height");
  const int maxval = detail::read_pgm_int(in, "maxval");
  if (maxval != 255) throw FormatError("PGM: only maxval 255 is supported");
  if (w < 1 || h < 1) throw FormatError("PGM: empty image");
  if (!std::isspace(in.get())) throw FormatError("PGM: missing separator after header");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  if (!in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size())))
    throw FormatError("PGM: truncated pixel data");
  return GrayImage(w, h, std::move(px));
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return read_pgm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size()));
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_pgm(out, img);
  if (!out) throw FormatError("write failed for " + path.string());
}

/// PGM files of a directory in lexicographic filename order.
inline std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

/// Yields frames in order, checking that all share the first frame's size.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame or nullopt at end of stream.
  virtual std::optional<GrayImage> next() = 0;
  /// Index the next returned frame will carry.
  long long index() const { return index_; }

 protected:
  void check_size(const GrayImage& img) {
    if (width_ == 0) {
      width_ = img.width();
      height_ = img.height();
    } else if (img.width() != width_ || img.height() != height_) {
      throw FormatError("frame " + std::to_string(index_) + " is " + std::to_string(img.width()) + "x" +
                        std::to_string(img.height()) + ", expected " + std::to_string(width_) + "x" +
                        std::to_string(height_));
    }
  }
  long long index_ = 0;
  int width_ = 0;
  int height_ = 0;
};

class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(const std::filesystem::path& dir) : files_(list_pgm_files(dir)) {}

  std::size_t frame_count() const { return files_.size(); }
  const std::vector<std::filesystem::path>& files() const { return files_; }

  std::optional<GrayImage> next() override {
    if (static_cast<std::size_t>(index_) >= files_.size()) return std::nullopt;
    GrayImage img;
    try {
      img = read_pgm(files_[static_cast<std::size_t>(index_)]);
    } catch (const FormatError& e) {
      throw FormatError("frame " + std::to_string(index_) + ": " + e.what());
    }
    check_size(img);
    ++index_;
    return img;
  }

 private:
  std::vector<std::filesystem::path> files_;
};

/// Raw 8-bit frames of a fixed size back to back on a stream (e.g. piped from a decoder).
class RawStreamFrameSource : public FrameSource {
 public:
  RawStreamFrameSource(std::istream& in, int width, int height) : in_(in), w_(width), h_(height) {
    if (w_ < 1 || h_ < 1) throw InvalidArgument("raw frame size must be positive");
  }

  std::optional<GrayImage> next() override {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w_) * h_);
    in_.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    const auto got = in_.gcount();
    if (got == 0) return std::nullopt;
    if (got != static_cast<std::streamsize>(px.size()))
      throw FormatError("frame " + std::to_string(index_) + ": truncated raw frame");
    GrayImage img(w_, h_, std::move(px));
    check_size(img);
    ++index_;
    return img;
  }

 private:
  std::istream& in_;
  int w_;
  int h_;
};

}  // namespace drowsy
