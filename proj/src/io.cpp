#include "logsinkhorn/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace logsinkhorn {

namespace {

// Next whitespace-delimited header token, skipping '#' comments to end of line.
std::string next_header_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw Error(ErrorCode::kIo, "truncated PPM header");
  return tok;
}

std::size_t parse_size(const std::string& tok, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::kIo, std::string("bad PPM ") + what + " '" + tok + "'");
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return f;
}

}  // namespace

RgbImage read_ppm(std::istream& in) {
  if (next_header_token(in) != "P6") throw Error(ErrorCode::kIo, "not a binary PPM (P6)");
  const std::size_t width = parse_size(next_header_token(in), "width");
  const std::size_t height = parse_size(next_header_token(in), "height");
  const std::size_t maxval = parse_size(next_header_token(in), "maxval");
  if (maxval == 0 || maxval > 255) throw Error(ErrorCode::kIo, "only 8-bit PPM is supported");
  // next_header_token consumed exactly one whitespace byte after maxval.
  std::vector<unsigned char> raw(width * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw Error(ErrorCode::kIo, "truncated PPM pixel data");
  std::vector<std::array<double, 3>> px(width * height);
  for (std::size_t p = 0; p < px.size(); ++p) {
    for (std::size_t c = 0; c < 3; ++c) px[p][c] = static_cast<double>(raw[p * 3 + c]) / static_cast<double>(maxval);
  }
  return make_rgb_image(width, height, std::move(px));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::in | std::ios::binary);
  return read_ppm(f);
}

void write_ppm(std::ostream& out, const RgbImage& image) {
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixel_count() * 3);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(image.pixels[p][c], 0.0, 1.0);
      raw[p * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing PPM");
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream f(path, std::ios::out | std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_ppm(f, image);
}

PointCloud read_point_cloud(std::istream& in) {
  std::vector<double> coords;
  std::size_t dim = 0;
  std::size_t count = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::size_t cols = 0;
    double v;
    while (ls >> v) {
      coords.push_back(v);
      ++cols;
    }
    if (!ls.eof()) throw Error(ErrorCode::kIo, "unparsable value on line " + std::to_string(lineno));
    if (dim == 0) dim = cols;
    if (cols != dim) {
      throw Error(ErrorCode::kIo, "line " + std::to_string(lineno) + " has " + std::to_string(cols) +
                                      " columns, expected " + std::to_string(dim));
    }
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::kEmptyInput, "point cloud file has no points");
  return make_point_cloud(count, dim, std::move(coords));
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_point_cloud(f);
}

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  char buf[32];
  for (std::size_t i = 0; i < cloud.count; ++i) {
    for (std::size_t k = 0; k < cloud.dimension; ++k) {
      const auto r = std::to_chars(buf, buf + sizeof(buf), cloud.coordinates[i * cloud.dimension + k]);
      if (k) out << ' ';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
}

void write_correspondences(std::ostream& out, const std::vector<Correspondence>& matches) {
  char buf[32];
  for (const auto& c : matches) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), c.weight);
    out << c.source_index << ' ' << c.target_index << ' ';
    out.write(buf, r.ptr - buf);
    out << '\n';
  }
}

std::vector<Correspondence> read_correspondences(std::istream& in) {
  std::vector<Correspondence> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Correspondence c;
    if (!(ls >> c.source_index >> c.target_index >> c.weight)) throw Error(ErrorCode::kIo, "bad correspondence line");
    out.push_back(c);
  }
  return out;
}

}  // namespace logsinkhorn
