#include "dc2/divide.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dc2 {

std::vector<double> patch_feature(const PatchImage& patch) {
    if (patch.pixels.empty()) {
        throw std::invalid_argument("patch_feature of empty patch");
    }
    const Image thumb =
        bilinear_resize(patch.pixels, kFeatureThumbSide, kFeatureThumbSide);
    std::vector<double> out(thumb.data.size());
    for (std::size_t i = 0; i < thumb.data.size(); ++i) {
        out[i] = thumb.data[i] / 255.0;
    }
    return out;
}

double cosine_distance(const std::vector<double>& a,
                       const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("feature vectors differ in length");
    }
    if (a == b) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const bool a_zero = na == 0.0;
    const bool b_zero = nb == 0.0;
    if (a_zero && b_zero) return 0.0;
    if (a_zero || b_zero) return 1.0;
    const double d = 1.0 - dot / std::sqrt(na * nb);
    return std::clamp(d, 0.0, 2.0);
}

ClusterAssignment cluster_patches(const std::vector<std::vector<double>>& features,
                                  double theta) {
    if (features.size() != 4) {
        throw std::invalid_argument("cluster_patches expects four features");
    }
    for (const auto& f : features) {
        if (f.size() != features.front().size()) {
            throw std::invalid_argument("feature vectors differ in length");
        }
    }
    double dist[4][4] = {};
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            dist[i][j] = dist[j][i] = cosine_distance(features[i], features[j]);
        }
    }

    ClusterAssignment clusters = {{0}, {1}, {2}, {3}};
    auto avg_linkage = [&](const std::vector<int>& a,
                           const std::vector<int>& b) {
        double sum = 0.0;
        for (int i : a)
            for (int j : b) sum += dist[i][j];
        return sum / (static_cast<double>(a.size()) * b.size());
    };

    while (clusters.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = avg_linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best > theta) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(),
                            clusters[bj].end());
        std::sort(clusters[bi].begin(), clusters[bi].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return clusters;
}

PatchImage merge_cluster(const std::vector<PatchImage>& members) {
    if (members.empty()) {
        throw std::invalid_argument("merge of empty cluster");
    }
    if (members.size() == 1) return members.front();
    const int w = members.front().pixels.w;
    const int h = members.front().pixels.h;
    std::vector<Image> rasters;
    rasters.reserve(members.size());
    PatchImage out;
    for (const PatchImage& m : members) {
        rasters.push_back(bilinear_resize(m.pixels, w, h));
        out.source_regions.insert(out.source_regions.end(),
                                  m.source_regions.begin(),
                                  m.source_regions.end());
    }
    out.pixels = average_images(rasters);
    return out;
}

namespace {

std::unique_ptr<PatchNode> build_node(PatchImage patch, int layer,
                                      const DivideConfig& cfg) {
    auto node = std::make_unique<PatchNode>();
    node->layer = layer;
    const int w = patch.pixels.w;
    const int h = patch.pixels.h;
    node->patch = std::move(patch);
    if (w <= cfg.patch_size || h <= cfg.patch_size || layer >= cfg.max_depth ||
        w < 2 || h < 2) {
        return node;
    }

    const Region raster_region{0, 0, w, h};
    const auto quads = split_region(raster_region);
    std::vector<PatchImage> quadrants(4);
    for (int i = 0; i < 4; ++i) {
        quadrants[i].pixels = crop(node->patch.pixels, quads[i]);
        for (const Region& src : node->patch.source_regions) {
            quadrants[i].source_regions.push_back(
                split_region_lenient(src)[static_cast<std::size_t>(i)]);
        }
    }

    std::vector<std::vector<double>> features;
    features.reserve(4);
    for (const PatchImage& q : quadrants) features.push_back(patch_feature(q));
    const ClusterAssignment clusters = cluster_patches(features, cfg.theta);

    for (const auto& cluster : clusters) {
        std::vector<PatchImage> members;
        members.reserve(cluster.size());
        for (int idx : cluster) members.push_back(quadrants[static_cast<std::size_t>(idx)]);
        node->children.push_back(
            build_node(merge_cluster(members), layer + 1, cfg));
    }
    return node;
}

} // namespace

std::unique_ptr<PatchNode> build_patch_tree(const PatchImage& image,
                                            const DivideConfig& cfg) {
    if (image.pixels.empty()) {
        throw std::invalid_argument("cannot divide an empty image");
    }
    if (image.source_regions.empty()) {
        throw std::invalid_argument("patch image without source regions");
    }
    if (cfg.patch_size < 1 || cfg.max_depth < 0 || cfg.theta < 0) {
        throw std::invalid_argument("invalid divide config");
    }
    return build_node(image, 0, cfg);
}

std::unique_ptr<PatchNode> build_patch_tree(const Image& image,
                                            const DivideConfig& cfg) {
    PatchImage root;
    root.pixels = image;
    root.source_regions = {Region{0, 0, image.w, image.h}};
    return build_patch_tree(root, cfg);
}

std::size_t count_nodes(const PatchNode& root) {
    std::size_t n = 1;
    for (const auto& c : root.children) n += count_nodes(*c);
    return n;
}

} // namespace dc2
