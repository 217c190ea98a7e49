#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dc2/geometry.hpp"

namespace dc2 {

// Row-major interleaved RGB, 8 bits per channel.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<std::uint8_t> data; // size == w * h * 3

    Image() = default;
    Image(int width, int height, std::uint8_t fill = 0);

    bool empty() const { return w == 0 || h == 0; }
    std::uint8_t* px(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * w + x); }
    const std::uint8_t* px(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * w + x);
    }
    void fill_rect(const Region& r, std::uint8_t rr, std::uint8_t gg, std::uint8_t bb);

    friend bool operator==(const Image&, const Image&) = default;
};

Image crop(const Image& src, const Region& r);

// Center-aligned bilinear resize, half-up rounding to 8 bits.
Image bilinear_resize(const Image& src, int out_w, int out_h);

// Per-pixel arithmetic mean of equally sized images, half-up rounding.
Image average_images(const std::vector<Image>& images);

// Shrinks so the longest side is <= max_side, preserving aspect ratio.
// Images already within the bound are returned unchanged; never upscales.
Image downsample_to_max_side(const Image& src, int max_side);

// Raster file I/O and PNG wire encoding (OpenCV imgcodecs behind these).
Image load_image(const std::string& path);
void save_png(const Image& img, const std::string& path);
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_image(const std::vector<std::uint8_t>& bytes);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

} // namespace dc2
