#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dc2 {

// Axis-aligned rectangle in root-image pixel coordinates.
// x/y are the left/top edges, w/h the extent (always >= 1 in valid regions).
struct Region {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    std::int64_t area() const {
        return static_cast<std::int64_t>(w) * static_cast<std::int64_t>(h);
    }
    bool valid() const { return w >= 1 && h >= 1; }
    bool contains(const Region& other) const;

    friend bool operator==(const Region&, const Region&) = default;
};

// Region plus the recursion depth it was observed at. Deeper layers take
// priority in NMS; `tiebreak` is the insertion index used to break ties.
struct ScoredRegion {
    Region region;
    int layer = 0;
    int tiebreak = 0;

    friend bool operator==(const ScoredRegion&, const ScoredRegion&) = default;
};

// Quadrant order: top-left, top-right, bottom-left, bottom-right.
// Splits at the floor midpoint; right/bottom quadrants absorb the remainder.
// Throws std::invalid_argument("unsplittable region") when w < 2 or h < 2.
std::array<Region, 4> split_region(const Region& parent);

// Same split but tolerates w == 1 or h == 1 by duplicating the degenerate
// axis into both halves. Used to propagate pre-merge source coordinates,
// where exact tiling is not promised for merged lineage.
std::array<Region, 4> split_region_lenient(const Region& parent);

// Intersection area over union area, in [0, 1]. iou(a, a) == 1.
double iou(const Region& a, const Region& b);

std::int64_t intersection_area(const Region& a, const Region& b);

// Greedy non-maximum suppression. Priority: deeper layer first, then lower
// tiebreak. Every retained pair has iou < iou_threshold; output is in
// priority order and deterministic.
std::vector<ScoredRegion> nms(std::vector<ScoredRegion> candidates,
                              double iou_threshold);

} // namespace dc2
