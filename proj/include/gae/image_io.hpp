#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gae {

// Binary PPM (P6) from planar [3,H,W] values; inputs are clamped to [0,1].
void write_ppm(const std::string& path, const std::vector<double>& chw, std::int64_t height, std::int64_t width);

// Binary PGM (P5), min-max normalized to 8 bit. Writes a "<path>.range.txt"
// sidecar recording the normalization range.
void write_pgm_normalized(const std::string& path, const std::vector<double>& values, std::int64_t height,
                          std::int64_t width);

std::vector<double> read_ppm(const std::string& path, std::int64_t& height, std::int64_t& width);

// Raw 8-bit values in [0,1] (no range un-normalization).
std::vector<double> read_pgm(const std::string& path, std::int64_t& height, std::int64_t& width);

} // namespace gae
