#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dc2/image.hpp"

namespace dc2 {

// A (possibly merged) image patch. `source_regions` keeps the pre-merge
// coordinates of every member in root-image pixels; unmerged patches carry
// exactly one region whose size equals the raster.
struct PatchImage {
    Image pixels;
    std::vector<Region> source_regions;
};

struct PatchNode {
    PatchImage patch;
    int layer = 0;
    std::vector<std::unique_ptr<PatchNode>> children;
    std::optional<std::string> caption;
    std::optional<std::set<std::string>> objects;

    bool is_leaf() const { return children.empty(); }
};

// Groups of the four quadrant indices, ordered by smallest member.
using ClusterAssignment = std::vector<std::vector<int>>;

inline constexpr int kFeatureThumbSide = 32;

// 32x32 bilinear thumbnail flattened row-major, RGB interleaved, / 255.
std::vector<double> patch_feature(const PatchImage& patch);

// Cosine distance between feature vectors. Zero vectors are at distance 1
// from any nonzero vector and 0 from another zero vector.
double cosine_distance(const std::vector<double>& a,
                       const std::vector<double>& b);

// Agglomerative average-linkage clustering over cosine distance. Merging
// continues while the minimum inter-cluster average distance is <= theta;
// ties go to the pair containing the smallest member index.
ClusterAssignment cluster_patches(const std::vector<std::vector<double>>& features,
                                  double theta);

// Resizes members to the first member's dimensions, then averages per
// pixel. Source regions are concatenated; a singleton passes through.
PatchImage merge_cluster(const std::vector<PatchImage>& members);

struct DivideConfig {
    int patch_size = 336; // encoder resolution S
    double theta = 0.1;
    int max_depth = 4;
};

// Builds the recursive division tree. A node is a leaf when its raster
// width or height is <= patch_size, or its layer reached max_depth.
std::unique_ptr<PatchNode> build_patch_tree(const PatchImage& image,
                                            const DivideConfig& cfg);

std::unique_ptr<PatchNode> build_patch_tree(const Image& image,
                                            const DivideConfig& cfg);

std::size_t count_nodes(const PatchNode& root);

} // namespace dc2
