#pragma once

#include <filesystem>
#include <vector>

namespace pgwm {

// 8-bit grayscale PNG. Values quantized as round(p * 255) on write and
// mapped back as v / 255 on read.
void write_png_gray8(const std::filesystem::path &path, const std::vector<float> &pixels, int h,
                     int w);
std::vector<float> read_png_gray8(const std::filesystem::path &path, int &h, int &w);

// Raw little-endian float32, row-major, used for lossless storage.
void write_f32(const std::filesystem::path &path, const std::vector<float> &pixels);
std::vector<float> read_f32(const std::filesystem::path &path, size_t expected_count);

} // namespace pgwm
