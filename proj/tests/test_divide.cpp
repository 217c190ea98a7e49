#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "dc2/divide.hpp"
#include "support/oracles.hpp"

using namespace dc2;

namespace {

PatchImage solid_patch(int w, int h, std::uint8_t r, std::uint8_t g,
                       std::uint8_t b) {
    PatchImage p;
    p.pixels = Image(w, h);
    p.pixels.fill_rect(Region{0, 0, w, h}, r, g, b);
    p.source_regions = {Region{0, 0, w, h}};
    return p;
}

// block-structured random image: quadrant tints plus pixel noise
Image random_image(std::mt19937& rng, int side) {
    Image img(side, side);
    std::uniform_int_distribution<int> channel(0, 255);
    std::uniform_int_distribution<int> noise(-12, 12);
    const int half = side / 2;
    const Region quads[4] = {Region{0, 0, half, half},
                             Region{half, 0, side - half, half},
                             Region{0, half, half, side - half},
                             Region{half, half, side - half, side - half}};
    for (const Region& q : quads) {
        const int r = channel(rng), g = channel(rng), b = channel(rng);
        for (int y = q.y; y < q.y + q.h; ++y) {
            for (int x = q.x; x < q.x + q.w; ++x) {
                std::uint8_t* p = img.px(x, y);
                p[0] = static_cast<std::uint8_t>(std::clamp(r + noise(rng), 0, 255));
                p[1] = static_cast<std::uint8_t>(std::clamp(g + noise(rng), 0, 255));
                p[2] = static_cast<std::uint8_t>(std::clamp(b + noise(rng), 0, 255));
            }
        }
    }
    return img;
}

void collect_regions(const PatchNode& node,
                     std::vector<Region>& regions) {
    for (const Region& r : node.patch.source_regions) regions.push_back(r);
    for (const auto& c : node.children) collect_regions(*c, regions);
}

std::string tree_signature(const PatchNode& node) {
    std::string sig = "(" + std::to_string(node.patch.pixels.w) + "x" +
                      std::to_string(node.patch.pixels.h) + "@" +
                      std::to_string(node.layer);
    for (const Region& r : node.patch.source_regions) {
        sig += "," + std::to_string(r.x) + "+" + std::to_string(r.y) + "+" +
               std::to_string(r.w) + "+" + std::to_string(r.h);
    }
    std::size_t pixel_hash = 0;
    for (const std::uint8_t v : node.patch.pixels.data) {
        pixel_hash = pixel_hash * 1099511628211ull + v;
    }
    sig += ";" + std::to_string(pixel_hash);
    for (const auto& c : node.children) sig += tree_signature(*c);
    return sig + ")";
}

} // namespace

TEST_SUITE_BEGIN("divide");

TEST_CASE("patch_feature of uniform mid-gray is all 0.5 within 1/255") {
    const PatchImage p = solid_patch(100, 100, 127, 127, 127);
    const auto f = patch_feature(p);
    REQUIRE(f.size() == 3072);
    for (const double v : f) CHECK(std::abs(v - 0.5) <= 1.0 / 255.0);
}

TEST_CASE("patch_feature of black is all zero") {
    const auto f = patch_feature(solid_patch(40, 60, 0, 0, 0));
    for (const double v : f) CHECK(v == 0.0);
}

TEST_CASE("patch_feature of an upscaled checkerboard averages to one half") {
    Image checker(2, 2);
    checker.fill_rect(Region{1, 0, 1, 1}, 255, 255, 255);
    checker.fill_rect(Region{0, 1, 1, 1}, 255, 255, 255);
    PatchImage p;
    p.pixels = bilinear_resize(checker, 64, 64);
    p.source_regions = {Region{0, 0, 64, 64}};
    const auto f = patch_feature(p);
    double mean = 0.0;
    for (const double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    // frozen from the reference resampler (tests/data/gen_golden.py)
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(mean - 0.5) <= 0.02);
}

TEST_CASE("cosine distance handles zero vectors per contract") {
    const std::vector<double> zero(8, 0.0);
    const std::vector<double> ones(8, 1.0);
    CHECK(cosine_distance(zero, zero) == 0.0);
    CHECK(cosine_distance(zero, ones) == 1.0);
    CHECK(cosine_distance(ones, ones) == 0.0);
    CHECK_THROWS_AS(cosine_distance(zero, std::vector<double>(4, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("cluster_patches examples") {
    SUBCASE("four identical vectors form one cluster") {
        const std::vector<std::vector<double>> f(4, {0.3, 0.7, 0.1});
        const auto c = cluster_patches(f, 0.05);
        REQUIRE(c.size() == 1);
        CHECK(c[0] == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("mutually orthogonal vectors stay singletons") {
        const std::vector<std::vector<double>> f = {{1, 0, 0, 0},
                                                    {0, 1, 0, 0},
                                                    {0, 0, 1, 0},
                                                    {0, 0, 0, 1}};
        CHECK(cluster_patches(f, 0.5).size() == 4);
    }
    SUBCASE("two tight pairs split at theta 0.1") {
        // pairwise distances: d(0,1) ~ 0.0202, d(2,3) = 0, cross ~ 1
        const std::vector<std::vector<double>> f = {
            {1.0, 0.0}, {0.98, 0.2}, {0.0, 1.0}, {0.0, 0.97}};
        const auto c = cluster_patches(f, 0.1);
        REQUIRE(c.size() == 2);
        CHECK(c[0] == std::vector<int>{0, 1});
        CHECK(c[1] == std::vector<int>{2, 3});
    }
    SUBCASE("mismatched lengths error") {
        CHECK_THROWS_AS(
            cluster_patches({{1.0, 0.0}, {1.0}, {0.0, 1.0}, {0.0, 1.0}}, 0.1),
            std::invalid_argument);
    }
}

TEST_CASE("cluster_patches agrees with the reference corpus exactly") {
    const auto cases =
        test::load_cluster_corpus(std::string(DC2_TEST_DATA_DIR) +
                                  "/cluster_corpus.json");
    REQUIRE(cases.size() == 100);
    for (const auto& c : cases) {
        const auto clusters = cluster_patches(c.vectors, c.theta);
        CHECK(test::canonical_labels(clusters) == c.labels);
    }
}

TEST_CASE("theta limits") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> f;
        for (int i = 0; i < 4; ++i) {
            f.push_back({u(rng), u(rng), u(rng), u(rng)});
        }
        // theta = 2 reaches the maximum cosine distance: always one cluster
        CHECK(cluster_patches(f, 2.0).size() == 1);
        // theta = 0 merges only feature-identical patches
        f[2] = f[0];
        const auto c = cluster_patches(f, 0.0);
        for (const auto& cluster : c) {
            for (std::size_t i = 1; i < cluster.size(); ++i) {
                CHECK(f[static_cast<std::size_t>(cluster[i])] ==
                      f[static_cast<std::size_t>(cluster[0])]);
            }
        }
        const auto has = [&c](std::vector<int> want) {
            return std::find(c.begin(), c.end(), want) != c.end();
        };
        CHECK(has({0, 2}));
    }
}

TEST_CASE("merge_cluster examples") {
    SUBCASE("singleton passes through unchanged") {
        const PatchImage p = solid_patch(20, 10, 1, 2, 3);
        const PatchImage m = merge_cluster({p});
        CHECK(m.pixels == p.pixels);
        CHECK(m.source_regions == p.source_regions);
    }
    SUBCASE("black and white average to mid gray") {
        const PatchImage m = merge_cluster(
            {solid_patch(8, 8, 0, 0, 0), solid_patch(8, 8, 255, 255, 255)});
        for (const std::uint8_t v : m.pixels.data) CHECK(v == 128);
    }
    SUBCASE("source regions concatenate in member order") {
        PatchImage a = solid_patch(512, 512, 10, 10, 10);
        a.source_regions = {Region{0, 0, 512, 512}};
        PatchImage b = solid_patch(512, 512, 20, 20, 20);
        b.source_regions = {Region{512, 0, 512, 512}};
        const PatchImage m = merge_cluster({a, b});
        REQUIRE(m.source_regions.size() == 2);
        CHECK(m.source_regions[0] == Region{0, 0, 512, 512});
        CHECK(m.source_regions[1] == Region{512, 0, 512, 512});
    }
    SUBCASE("members resize to the first member's dimensions") {
        const PatchImage m = merge_cluster(
            {solid_patch(10, 8, 100, 0, 0), solid_patch(21, 17, 0, 100, 0)});
        CHECK(m.pixels.w == 10);
        CHECK(m.pixels.h == 8);
    }
}

TEST_CASE("build_patch_tree boundary and shape examples") {
    SUBCASE("image already below the encoder resolution is a single leaf") {
        Image img(300, 300, 50);
        const auto root = build_patch_tree(img, DivideConfig{336, 0.1, 4});
        CHECK(root->is_leaf());
        CHECK(root->layer == 0);
        CHECK(count_nodes(*root) == 1);
    }
    SUBCASE("uniform image collapses to one child per layer") {
        Image img(1344, 1344, 255);
        const auto root = build_patch_tree(img, DivideConfig{336, 0.1, 4});
        CHECK(count_nodes(*root) == 3); // 1344 -> 672 -> 336
        REQUIRE(root->children.size() == 1);
        REQUIRE(root->children[0]->children.size() == 1);
        const PatchNode& leaf = *root->children[0]->children[0];
        CHECK(leaf.is_leaf());
        CHECK(leaf.patch.pixels.w == 336);
        CHECK(leaf.patch.source_regions.size() == 4);
    }
    SUBCASE("four maximally distinct quadrants stay separate") {
        Image img(1344, 1344);
        img.fill_rect(Region{0, 0, 672, 672}, 255, 0, 0);
        img.fill_rect(Region{672, 0, 672, 672}, 0, 255, 0);
        img.fill_rect(Region{0, 672, 672, 672}, 0, 0, 255);
        img.fill_rect(Region{672, 672, 672, 672}, 255, 255, 0);
        const auto root = build_patch_tree(img, DivideConfig{336, 0.1, 4});
        CHECK(root->children.size() == 4);
    }
    SUBCASE("max_depth cuts the recursion") {
        Image img(1344, 1344);
        img.fill_rect(Region{0, 0, 672, 672}, 255, 0, 0);
        img.fill_rect(Region{672, 0, 672, 672}, 0, 255, 0);
        img.fill_rect(Region{0, 672, 672, 672}, 0, 0, 255);
        img.fill_rect(Region{672, 672, 672, 672}, 255, 255, 0);
        const auto root = build_patch_tree(img, DivideConfig{100, 0.1, 1});
        for (const auto& c : root->children) CHECK(c->is_leaf());
    }
    SUBCASE("empty image errors") {
        CHECK_THROWS(build_patch_tree(Image{}, DivideConfig{336, 0.1, 4}));
    }
}

TEST_CASE("leaf resolution bound and layer bookkeeping") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 8; ++trial) {
        const Image img = random_image(rng, 300 + static_cast<int>(rng() % 200));
        const DivideConfig cfg{48, 0.15, 4};
        const auto root = build_patch_tree(img, cfg);
        std::function<void(const PatchNode&, int)> walk =
            [&](const PatchNode& node, int layer) {
                CHECK(node.layer == layer);
                CHECK(node.children.size() <= 4);
                if (node.is_leaf()) {
                    const bool size_leaf = node.patch.pixels.w <= cfg.patch_size ||
                                           node.patch.pixels.h <= cfg.patch_size;
                    CHECK((size_leaf || node.layer == cfg.max_depth));
                }
                for (const auto& c : node.children) walk(*c, layer + 1);
            };
        walk(*root, 0);

        std::vector<Region> regions;
        collect_regions(*root, regions);
        for (const Region& r : regions) {
            CHECK(r.valid());
            CHECK(Region{0, 0, img.w, img.h}.contains(r));
        }
    }
}

TEST_CASE("unmerged lineage tiles the root exactly") {
    // distinct quadrants at every level: nothing merges, so each layer's
    // source regions partition the root
    Image img(256, 256);
    std::mt19937 rng(5);
    for (int by = 0; by < 8; ++by) {
        for (int bx = 0; bx < 8; ++bx) {
            img.fill_rect(Region{bx * 32, by * 32, 32, 32},
                          static_cast<std::uint8_t>(rng() % 256),
                          static_cast<std::uint8_t>(rng() % 256),
                          static_cast<std::uint8_t>(rng() % 256));
        }
    }
    const auto root = build_patch_tree(img, DivideConfig{32, 0.0, 6});
    std::map<int, std::int64_t> layer_area;
    std::function<void(const PatchNode&)> walk = [&](const PatchNode& node) {
        for (const Region& r : node.patch.source_regions) {
            layer_area[node.layer] += r.area();
        }
        for (const auto& c : node.children) walk(*c);
    };
    walk(*root);
    for (const auto& [layer, area] : layer_area) {
        CHECK(area == static_cast<std::int64_t>(256) * 256);
    }
}

TEST_CASE("node count is non-increasing in theta") {
    std::mt19937 rng(99);
    const std::vector<double> thetas = {0.0, 0.05, 0.1, 0.2, 0.3, 2.0};
    for (int trial = 0; trial < 6; ++trial) {
        const Image img = random_image(rng, 384);
        std::size_t prev = std::numeric_limits<std::size_t>::max();
        for (const double theta : thetas) {
            const auto root = build_patch_tree(img, DivideConfig{48, theta, 4});
            const std::size_t n = count_nodes(*root);
            CHECK(n <= prev);
            prev = n;
        }
    }
}

TEST_CASE("tree construction is deterministic") {
    std::mt19937 rng(123);
    const Image img = random_image(rng, 320);
    const DivideConfig cfg{40, 0.12, 4};
    const auto a = build_patch_tree(img, cfg);
    const auto b = build_patch_tree(img, cfg);
    CHECK(tree_signature(*a) == tree_signature(*b));
}

TEST_SUITE_END();
