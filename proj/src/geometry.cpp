#include "dc2/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace dc2 {

bool Region::contains(const Region& other) const {
    return other.x >= x && other.y >= y && other.x + other.w <= x + w &&
           other.y + other.h <= y + h;
}

std::array<Region, 4> split_region(const Region& parent) {
    if (parent.w < 2 || parent.h < 2) {
        throw std::invalid_argument("unsplittable region");
    }
    const int lw = parent.w / 2;
    const int th = parent.h / 2;
    const int rw = parent.w - lw;
    const int bh = parent.h - th;
    const int mx = parent.x + lw;
    const int my = parent.y + th;
    return {Region{parent.x, parent.y, lw, th}, Region{mx, parent.y, rw, th},
            Region{parent.x, my, lw, bh}, Region{mx, my, rw, bh}};
}

std::array<Region, 4> split_region_lenient(const Region& parent) {
    const int lw = std::max(1, parent.w / 2);
    const int th = std::max(1, parent.h / 2);
    const int rw = std::max(1, parent.w - parent.w / 2);
    const int bh = std::max(1, parent.h - parent.h / 2);
    const int mx = parent.w >= 2 ? parent.x + parent.w / 2 : parent.x;
    const int my = parent.h >= 2 ? parent.y + parent.h / 2 : parent.y;
    return {Region{parent.x, parent.y, lw, th}, Region{mx, parent.y, rw, th},
            Region{parent.x, my, lw, bh}, Region{mx, my, rw, bh}};
}

std::int64_t intersection_area(const Region& a, const Region& b) {
    const int ix0 = std::max(a.x, b.x);
    const int iy0 = std::max(a.y, b.y);
    const int ix1 = std::min(a.x + a.w, b.x + b.w);
    const int iy1 = std::min(a.y + a.h, b.y + b.h);
    if (ix1 <= ix0 || iy1 <= iy0) return 0;
    return static_cast<std::int64_t>(ix1 - ix0) *
           static_cast<std::int64_t>(iy1 - iy0);
}

double iou(const Region& a, const Region& b) {
    const std::int64_t inter = intersection_area(a, b);
    const std::int64_t uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<ScoredRegion> nms(std::vector<ScoredRegion> candidates,
                              double iou_threshold) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const ScoredRegion& a, const ScoredRegion& b) {
                         if (a.layer != b.layer) return a.layer > b.layer;
                         return a.tiebreak < b.tiebreak;
                     });
    std::vector<ScoredRegion> kept;
    for (const auto& cand : candidates) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (iou(cand.region, k.region) >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

} // namespace dc2
