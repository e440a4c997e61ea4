#pragma once

// File formats: 8-bit PGM images (P5 read/write, P2 read) and plain CSV with
// 17 significant digits.

#include "priorkryl/core.hpp"
#include "priorkryl/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace priorkryl::io {

/// Shortest text that reads back to the same double ("%.17g").
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes `text` to `path`, creating parent directories.
inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV builder: header row, then rows of integers and doubles.
class Csv {
 public:
  explicit Csv(const std::string& header) { text_ = header + "\n"; }

  template <class... Cols>
  void row(const Cols&... cols) {
    bool first = true;
    ((text_ += (first ? "" : ","), text_ += cell(cols), first = false), ...);
    text_ += "\n";
  }

  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text(path, text_); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(Index v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

  std::string text_;
};

/// Matrix as CSV with header c0,c1,... and one line per row.
inline std::string matrix_csv(const Matrix& m) {
  std::string s;
  for (Index j = 0; j < m.cols(); ++j) s += (j ? ",c" : "c") + std::to_string(j);
  s += "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) s += ",";
      s += fmt(m(i, j));
    }
    s += "\n";
  }
  return s;
}

struct PgmScaling {
  double min = 0.0;
  double max = 0.0;
};

/// Binary P5 with maxval 255. Values are mapped linearly from [lo, hi] to
/// [0, 255] and rounded; a flat image (hi == lo) is written as zeros.
/// Row 0 of `image` is the top line of the file.
inline PgmScaling write_pgm(const std::filesystem::path& path, const Matrix& image) {
  if (image.size() == 0) throw InputError("write_pgm: empty image");
  PgmScaling sc{image.minCoeff(), image.maxCoeff()};
  std::string data = "P5\n" + std::to_string(image.cols()) + " " +
                     std::to_string(image.rows()) + "\n255\n";
  const double span = sc.max - sc.min;
  for (Index i = 0; i < image.rows(); ++i) {
    for (Index j = 0; j < image.cols(); ++j) {
      double v = span > 0.0 ? (image(i, j) - sc.min) / span * 255.0 : 0.0;
      v = std::clamp(std::round(v), 0.0, 255.0);
      data.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
  }
  write_text(path, data);
  return sc;
}

/// Reads P5 or P2 with maxval 255; values scaled to [0, 1]. Row 0 is the top.
inline Matrix read_pgm(const std::filesystem::path& path) {
  const std::string s = read_text(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < s.size()) {
      if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else if (s[pos] == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos) throw InputError("read_pgm: truncated header in " + path.string());
    return s.substr(start, pos - start);
  };
  auto next_int = [&]() {
    const std::string t = next_token();
    for (char ch : t) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) {
        throw InputError("read_pgm: bad number '" + t + "' in " + path.string());
      }
    }
    return std::stol(t);
  };

  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") {
    throw InputError("read_pgm: " + path.string() + " is not a P5/P2 PGM");
  }
  const long w = next_int();
  const long h = next_int();
  const long maxval = next_int();
  if (w < 1 || h < 1) throw InputError("read_pgm: empty image in " + path.string());
  if (maxval != 255) {
    throw InputError("read_pgm: maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  Matrix img(h, w);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (s.size() < pos + static_cast<std::size_t>(w * h)) {
      throw InputError("read_pgm: truncated pixel data in " + path.string());
    }
    for (long i = 0; i < h; ++i) {
      for (long j = 0; j < w; ++j) {
        img(i, j) = static_cast<unsigned char>(s[pos++]) / 255.0;
      }
    }
  } else {
    for (long i = 0; i < h; ++i) {
      for (long j = 0; j < w; ++j) {
        const long v = next_int();
        if (v > 255) throw InputError("read_pgm: pixel value above maxval");
        img(i, j) = static_cast<double>(v) / 255.0;
      }
    }
  }
  return img;
}

/// Phantom pixels (iy from the bottom) as an image with the top row first.
inline Matrix phantom_image(Index n, const Vector& pixels) {
  detail::require_size(pixels.size(), n * n, "phantom_image");
  Matrix img(n, n);
  for (Index iy = 0; iy < n; ++iy) {
    for (Index ix = 0; ix < n; ++ix) img(n - 1 - iy, ix) = pixels[pixel_index(n, ix, iy)];
  }
  return img;
}

inline Phantom phantom_from_image(const Matrix& img) {
  if (img.rows() != img.cols()) {
    throw InputError("phantom image must be square, got " + std::to_string(img.rows()) + "x" +
                     std::to_string(img.cols()));
  }
  const Index n = img.rows();
  Vector v(n * n);
  for (Index iy = 0; iy < n; ++iy) {
    for (Index ix = 0; ix < n; ++ix) v[pixel_index(n, ix, iy)] = img(n - 1 - iy, ix);
  }
  return Phantom(n, std::move(v));
}

}  // namespace priorkryl::io
