#include "dc2/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "dc2/error.hpp"

namespace dc2 {

Image::Image(int width, int height, std::uint8_t fill)
    : w(width), h(height),
      data(static_cast<std::size_t>(width) * height * 3, fill) {}

void Image::fill_rect(const Region& r, std::uint8_t rr, std::uint8_t gg,
                      std::uint8_t bb) {
    const int x0 = std::max(0, r.x);
    const int y0 = std::max(0, r.y);
    const int x1 = std::min(w, r.x + r.w);
    const int y1 = std::min(h, r.y + r.h);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            std::uint8_t* p = px(x, y);
            p[0] = rr;
            p[1] = gg;
            p[2] = bb;
        }
    }
}

Image crop(const Image& src, const Region& r) {
    if (!r.valid() || r.x < 0 || r.y < 0 || r.x + r.w > src.w ||
        r.y + r.h > src.h) {
        throw std::invalid_argument("crop region outside image bounds");
    }
    Image out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        const std::uint8_t* s = src.px(r.x, r.y + y);
        std::copy(s, s + static_cast<std::size_t>(r.w) * 3, out.px(0, y));
    }
    return out;
}

Image bilinear_resize(const Image& src, int out_w, int out_h) {
    if (src.empty()) throw std::invalid_argument("resize of empty image");
    if (out_w < 1 || out_h < 1) {
        throw std::invalid_argument("resize to empty output");
    }
    if (out_w == src.w && out_h == src.h) return src;
    Image out(out_w, out_h);
    const double sx_scale = static_cast<double>(src.w) / out_w;
    const double sy_scale = static_cast<double>(src.h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        double sy = (oy + 0.5) * sy_scale - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(src.h - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double fy = sy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double sx = (ox + 0.5) * sx_scale - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(src.w - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, src.w - 1);
            const double fx = sx - x0;
            const std::uint8_t* p00 = src.px(x0, y0);
            const std::uint8_t* p10 = src.px(x1, y0);
            const std::uint8_t* p01 = src.px(x0, y1);
            const std::uint8_t* p11 = src.px(x1, y1);
            std::uint8_t* o = out.px(ox, oy);
            for (int c = 0; c < 3; ++c) {
                const double v = p00[c] * (1.0 - fx) * (1.0 - fy) +
                                 p10[c] * fx * (1.0 - fy) +
                                 p01[c] * (1.0 - fx) * fy + p11[c] * fx * fy;
                o[c] = static_cast<std::uint8_t>(std::floor(v + 0.5));
            }
        }
    }
    return out;
}

Image average_images(const std::vector<Image>& images) {
    if (images.empty()) {
        throw std::invalid_argument("average of zero images");
    }
    const Image& first = images.front();
    for (const Image& img : images) {
        if (img.w != first.w || img.h != first.h) {
            throw std::invalid_argument("averaging differently sized images");
        }
    }
    if (images.size() == 1) return first;
    Image out(first.w, first.h);
    const std::size_t n = out.data.size();
    const std::uint64_t count = images.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t sum = 0;
        for (const Image& img : images) sum += img.data[i];
        // round half up: (2*sum + n) / (2n)
        out.data[i] =
            static_cast<std::uint8_t>((2 * sum + count) / (2 * count));
    }
    return out;
}

Image downsample_to_max_side(const Image& src, int max_side) {
    if (max_side < 1) throw std::invalid_argument("max_side must be >= 1");
    const int longest = std::max(src.w, src.h);
    if (longest <= max_side) return src;
    const double scale = static_cast<double>(max_side) / longest;
    int nw, nh;
    if (src.w >= src.h) {
        nw = max_side;
        nh = std::max(1, static_cast<int>(std::lround(src.h * scale)));
    } else {
        nh = max_side;
        nw = std::max(1, static_cast<int>(std::lround(src.w * scale)));
    }
    return bilinear_resize(src, nw, nh);
}

namespace {

Image from_mat(const cv::Mat& bgr) {
    Image out(bgr.cols, bgr.rows);
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            std::uint8_t* p = out.px(x, y);
            p[0] = row[x][2];
            p[1] = row[x][1];
            p[2] = row[x][0];
        }
    }
    return out;
}

cv::Mat to_mat(const Image& img) {
    cv::Mat bgr(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.w; ++x) {
            const std::uint8_t* p = img.px(x, y);
            row[x] = cv::Vec3b(p[2], p[1], p[0]);
        }
    }
    return bgr;
}

} // namespace

Image load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) {
        throw Error(ErrorKind::dataset, "cannot read image: " + path);
    }
    return from_mat(m);
}

void save_png(const Image& img, const std::string& path) {
    if (!cv::imwrite(path, to_mat(img))) {
        throw Error(ErrorKind::dataset, "cannot write image: " + path);
    }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> buf;
    if (!cv::imencode(".png", to_mat(img), buf)) {
        throw Error(ErrorKind::internal, "png encode failed");
    }
    return buf;
}

Image decode_image(const std::vector<std::uint8_t>& bytes) {
    cv::Mat m = cv::imdecode(bytes, cv::IMREAD_COLOR);
    if (m.empty()) {
        throw Error(ErrorKind::dataset, "cannot decode image bytes");
    }
    return from_mat(m);
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    static const char table[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v =
            (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(table[(v >> 6) & 63]);
        out.push_back(table[v & 63]);
    }
    if (i + 1 == bytes.size()) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(table[(v >> 18) & 63]);
        out.push_back(table[(v >> 12) & 63]);
        out.push_back(table[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    int buf = 0, bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = value(c);
        if (v < 0) throw std::invalid_argument("invalid base64 input");
        buf = (buf << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buf >> bits) & 0xff));
        }
    }
    return out;
}

} // namespace dc2
