#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "logsinkhorn/applications.hpp"
#include "logsinkhorn/costs.hpp"

namespace logsinkhorn {

// Binary PPM (P6). Reading accepts '#' comments in the header and any maxval in
// [1, 255]; channels are scaled to [0, 1]. Writing emits
// "P6\n<w> <h>\n255\n" followed by raw RGB bytes (round(255 * c)).
RgbImage read_ppm(std::istream& in);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& out, const RgbImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Whitespace-separated text, one point per line; blank lines and lines whose
// first non-blank character is '#' are skipped. All rows must have the same
// number of columns.
PointCloud read_point_cloud(std::istream& in);
PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(std::ostream& out, const PointCloud& cloud);

// "i j weight" per line.
void write_correspondences(std::ostream& out, const std::vector<Correspondence>& matches);
std::vector<Correspondence> read_correspondences(std::istream& in);

}  // namespace logsinkhorn
