#include "dc2/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "dc2/error.hpp"

namespace dc2 {

namespace {

constexpr int kTile = 336;

struct Rgb {
    std::uint8_t r, g, b;
};

// Unit direction on a cone of half-angle `radius_deg` around the RGB
// diagonal, scaled into pixel range. All four cardinal phases stay inside
// the positive octant for radii up to ~33.6 degrees.
Rgb cone_color(double radius_deg, double phase_deg) {
    const double rad = radius_deg * M_PI / 180.0;
    const double ph = phase_deg * M_PI / 180.0;
    const double mu = 1.0 / std::sqrt(3.0);
    const double e1[3] = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0};
    const double e2[3] = {1.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0),
                          -2.0 / std::sqrt(6.0)};
    double v[3];
    for (int i = 0; i < 3; ++i) {
        v[i] = std::cos(rad) * mu +
               std::sin(rad) * (std::cos(ph) * e1[i] + std::sin(ph) * e2[i]);
    }
    auto px = [](double x) {
        return static_cast<std::uint8_t>(
            std::clamp(std::lround(x * 235.0), 0L, 255L));
    };
    return Rgb{px(v[0]), px(v[1]), px(v[2])};
}

const std::array<Rgb, 4>& palette() {
    static const std::array<Rgb, 4> p = {
        cone_color(33.0, 0.0), cone_color(33.0, 90.0),
        cone_color(33.0, 180.0), cone_color(33.0, 270.0)};
    return p;
}

// Quadtree path digit sum for the 336px tile at (tx, ty) of an 8x8 grid.
// Sibling groups at every level then see all four palette entries, which
// keeps their thumbnails from clustering together.
int tile_shift(int tx, int ty) {
    int shift = 0;
    for (int bit = 2; bit >= 0; --bit) {
        const int qx = (tx >> bit) & 1;
        const int qy = (ty >> bit) & 1;
        shift += qx + 2 * qy;
    }
    return shift & 3;
}

const std::vector<std::string>& name_pool() {
    static const std::vector<std::string> names = {
        "hydrant", "bench",  "kite",   "mailbox", "lantern",
        "scooter", "buoy",   "easel",  "barrel",  "tricycle",
        "kettle",  "anvil",  "plow",   "harp",    "crate",
        "beacon",  "gnome",  "loom",   "canoe",   "tuba"};
    return names;
}

const std::vector<std::string>& color_pool() {
    static const std::vector<std::string> colors = {
        "red",  "blue",   "green", "yellow", "purple", "orange",
        "teal", "pink",   "maroon", "olive", "crimson", "navy"};
    return colors;
}

const std::vector<std::string>& code_pool() {
    static const std::vector<std::string> codes = {"K7", "R2", "B9",
                                                   "X4", "M3", "Z8"};
    return codes;
}

Rgb object_paint(std::mt19937& rng) {
    static const std::array<Rgb, 6> paints = {
        Rgb{250, 250, 250}, Rgb{15, 15, 15},   Rgb{240, 20, 200},
        Rgb{20, 240, 230},  Rgb{255, 120, 10}, Rgb{140, 20, 255}};
    return paints[rng() % paints.size()];
}

// Object centered inside the given 336px tile, away from the tile borders.
MockObject place_object(std::mt19937& rng, const std::string& name,
                        const std::string& attribute, int tx, int ty,
                        int size) {
    std::uniform_int_distribution<int> offset(60, kTile - 60 - size);
    MockObject o;
    o.name = name;
    o.attribute = attribute;
    o.region = Region{tx * kTile + offset(rng), ty * kTile + offset(rng), size,
                      size};
    const Rgb c = object_paint(rng);
    o.color = {c.r, c.g, c.b};
    return o;
}

void draw_scene(Image& canvas, const MockScene& scene) {
    for (const MockObject& o : scene.objects) {
        canvas.fill_rect(o.region, o.color[0], o.color[1], o.color[2]);
    }
}

std::vector<std::string> pick_options(std::mt19937& rng,
                                      const std::vector<std::string>& pool,
                                      const std::string& truth, int n) {
    std::vector<std::string> options = {truth};
    std::vector<std::string> rest;
    for (const std::string& p : pool) {
        if (p != truth) rest.push_back(p);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    for (int i = 0; i + 1 < n && i < static_cast<int>(rest.size()); ++i) {
        options.push_back(rest[static_cast<std::size_t>(i)]);
    }
    std::shuffle(options.begin(), options.end(), rng);
    return options;
}

int index_of(const std::vector<std::string>& options, const std::string& v) {
    return static_cast<int>(
        std::find(options.begin(), options.end(), v) - options.begin());
}

// distinct tiles whose 3x3 position bucket avoids the middle row/column,
// so quadrant membership is derivable from the bucket alone
std::pair<int, int> corner_tile(std::mt19937& rng) {
    static const std::array<int, 6> choices = {0, 1, 2, 5, 6, 7};
    return {choices[rng() % choices.size()], choices[rng() % choices.size()]};
}

} // namespace

SyntheticSuite make_hr_suite(int n_samples, unsigned seed) {
    SyntheticSuite suite;
    const int canvas_px = 8 * kTile; // 2688
    static const TaskCategory categories[] = {
        TaskCategory::fsp_attribute,     TaskCategory::fsp_ocr,
        TaskCategory::fsp_visual_prompting, TaskCategory::fcp_map,
        TaskCategory::fcp_chart,         TaskCategory::fcp_spatial,
    };

    for (int i = 0; i < n_samples; ++i) {
        std::mt19937 rng(seed + static_cast<unsigned>(i) * 977u);
        const TaskCategory category = categories[i % 6];
        const std::string id =
            "hr" + std::string(i < 10 ? "0" : "") + std::to_string(i);

        MockScene scene;
        scene.id = id;
        scene.canvas_w = canvas_px;
        scene.canvas_h = canvas_px;
        scene.min_visible_px = 4;

        Image canvas(canvas_px, canvas_px);
        for (int ty = 0; ty < 8; ++ty) {
            for (int tx = 0; tx < 8; ++tx) {
                const Rgb c = palette()[static_cast<std::size_t>(tile_shift(tx, ty))];
                canvas.fill_rect(Region{tx * kTile, ty * kTile, kTile, kTile},
                                 c.r, c.g, c.b);
            }
        }

        std::vector<std::string> names = name_pool();
        std::shuffle(names.begin(), names.end(), rng);
        std::vector<std::pair<int, int>> used_tiles;
        auto taken = [&used_tiles](const std::pair<int, int>& t) {
            return std::find(used_tiles.begin(), used_tiles.end(), t) !=
                   used_tiles.end();
        };
        // draws candidates until one is unused, so placement constraints
        // (corner buckets, fixed rows) survive collision handling
        auto fresh_tile = [&](const std::function<std::pair<int, int>()>& gen) {
            std::pair<int, int> t = gen();
            while (taken(t)) t = gen();
            used_tiles.push_back(t);
            return t;
        };
        auto any_tile = [&rng]() {
            return std::pair<int, int>{static_cast<int>(rng() % 8),
                                       static_cast<int>(rng() % 8)};
        };

        BenchmarkSample sample;
        sample.id = id;
        sample.image = "images/" + id + ".png";
        sample.category = category;

        const std::string& name_a = names[0];
        const std::string& name_b = names[1];
        const std::size_t color_idx = rng() % color_pool().size();
        const std::string color_a = color_pool()[color_idx];
        const std::string color_b =
            color_pool()[(color_idx + 1 + rng() % (color_pool().size() - 1)) %
                         color_pool().size()];

        switch (category) {
        case TaskCategory::fsp_attribute:
        case TaskCategory::fsp_visual_prompting: {
            const auto tile = fresh_tile([&rng]() { return corner_tile(rng); });
            scene.objects.push_back(
                place_object(rng, name_a, color_a, tile.first, tile.second, 12));
            sample.question =
                category == TaskCategory::fsp_attribute
                    ? "What color is the " + name_a + " in the picture?"
                    : "What color is the " + name_a +
                          " inside the highlighted area?";
            sample.options = pick_options(rng, color_pool(), color_a, 4);
            sample.answer_index = index_of(sample.options, color_a);
            sample.target_objects = {name_a};
            sample.target_bbox = Region{tile.first * kTile, tile.second * kTile,
                                        kTile, kTile};
            break;
        }
        case TaskCategory::fsp_ocr: {
            const auto tile = fresh_tile([&rng]() { return corner_tile(rng); });
            const std::string code = code_pool()[rng() % code_pool().size()];
            scene.objects.push_back(
                place_object(rng, name_a, code, tile.first, tile.second, 12));
            sample.question = "What is written on the " + name_a + "?";
            sample.options = pick_options(rng, code_pool(), code, 4);
            sample.answer_index = index_of(sample.options, code);
            sample.target_objects = {name_a};
            sample.target_bbox = Region{tile.first * kTile, tile.second * kTile,
                                        kTile, kTile};
            break;
        }
        case TaskCategory::fcp_map: {
            const auto tile_a = fresh_tile([&rng]() { return corner_tile(rng); });
            const auto tile_b = fresh_tile([&rng]() { return corner_tile(rng); });
            scene.objects.push_back(place_object(rng, name_a, color_a,
                                                 tile_a.first, tile_a.second, 12));
            scene.objects.push_back(place_object(rng, name_b, color_b,
                                                 tile_b.first, tile_b.second, 12));
            const bool same = (tile_a.first < 4) == (tile_b.first < 4) &&
                              (tile_a.second < 4) == (tile_b.second < 4);
            sample.question = "Are the " + name_a + " and the " + name_b +
                              " located in the same quadrant of the image?";
            sample.options = {"yes", "no", "only partially",
                              "cannot be determined"};
            std::shuffle(sample.options.begin(), sample.options.end(), rng);
            sample.answer_index = index_of(sample.options, same ? "yes" : "no");
            sample.target_objects = {name_a, name_b};
            sample.target_bbox = Region{tile_a.first * kTile,
                                        tile_a.second * kTile, kTile, kTile};
            break;
        }
        case TaskCategory::fcp_chart: {
            const bool a_on_top = rng() % 2 == 0;
            const auto tile_a = fresh_tile([&rng, a_on_top]() {
                return std::pair<int, int>{
                    static_cast<int>(rng() % 8),
                    a_on_top ? static_cast<int>(rng() % 3)
                             : 5 + static_cast<int>(rng() % 3)};
            });
            const auto tile_b = fresh_tile([&rng, a_on_top]() {
                return std::pair<int, int>{
                    static_cast<int>(rng() % 8),
                    a_on_top ? 5 + static_cast<int>(rng() % 3)
                             : static_cast<int>(rng() % 3)};
            });
            scene.objects.push_back(place_object(rng, name_a, color_a,
                                                 tile_a.first, tile_a.second, 12));
            scene.objects.push_back(place_object(rng, name_b, color_b,
                                                 tile_b.first, tile_b.second, 12));
            sample.question = "Which object is closer to the top of the image, "
                              "the " +
                              name_a + " or the " + name_b + "?";
            sample.options = {name_a, name_b, "they are level",
                              "cannot be determined"};
            std::shuffle(sample.options.begin(), sample.options.end(), rng);
            sample.answer_index =
                index_of(sample.options, a_on_top ? name_a : name_b);
            sample.target_objects = {name_a, name_b};
            sample.target_bbox = Region{tile_a.first * kTile,
                                        tile_a.second * kTile, kTile, kTile};
            break;
        }
        case TaskCategory::fcp_spatial: {
            const bool horizontal = rng() % 2 == 0;
            const bool a_first = rng() % 2 == 0;
            const int low = static_cast<int>(rng() % 3);
            const int high = 5 + static_cast<int>(rng() % 3);
            const int fixed = static_cast<int>(rng() % 8);
            std::pair<int, int> tile_a, tile_b;
            if (horizontal) {
                tile_a = fresh_tile([&]() {
                    return std::pair<int, int>{a_first ? low : high, fixed};
                });
                tile_b = fresh_tile([&]() {
                    return std::pair<int, int>{a_first ? high : low, fixed};
                });
            } else {
                tile_a = fresh_tile([&]() {
                    return std::pair<int, int>{fixed, a_first ? low : high};
                });
                tile_b = fresh_tile([&]() {
                    return std::pair<int, int>{fixed, a_first ? high : low};
                });
            }
            scene.objects.push_back(place_object(rng, name_a, color_a,
                                                 tile_a.first, tile_a.second, 12));
            scene.objects.push_back(place_object(rng, name_b, color_b,
                                                 tile_b.first, tile_b.second, 12));
            sample.question = "Where is the " + name_a + " relative to the " +
                              name_b + " in this image?";
            sample.options = {"on the left side", "on the right side",
                              "directly above", "directly below"};
            std::shuffle(sample.options.begin(), sample.options.end(), rng);
            const std::string truth =
                horizontal ? (a_first ? "on the left side" : "on the right side")
                           : (a_first ? "directly above" : "directly below");
            sample.answer_index = index_of(sample.options, truth);
            sample.target_objects = {name_a, name_b};
            sample.target_bbox = Region{tile_a.first * kTile,
                                        tile_a.second * kTile, kTile, kTile};
            break;
        }
        }

        // background distractors in their own tiles
        const int n_distractors = 3;
        for (int d = 0; d < n_distractors; ++d) {
            const auto tile = fresh_tile(any_tile);
            scene.objects.push_back(place_object(
                rng, names[static_cast<std::size_t>(2 + d)],
                color_pool()[rng() % color_pool().size()], tile.first,
                tile.second, 14));
        }

        draw_scene(canvas, scene);
        suite.scenes.push_back(scene);
        suite.samples.push_back(sample);
        suite.images.emplace_back(id, std::move(canvas));
    }
    return suite;
}

SyntheticSuite make_sweep_suite(int n_samples, unsigned seed) {
    SyntheticSuite suite;
    const int canvas_px = 4 * kTile; // 1344
    // quadrant tints: d(t0,t1) ~= 0.15, d(t2,t3) ~= 0.25, cross pairs > 0.39
    const std::array<Rgb, 4> tints = {
        cone_color(33.0, -30.18), cone_color(33.0, 30.18),
        cone_color(33.0, 180.0 - 40.46), cone_color(33.0, 180.0 + 40.46)};

    for (int i = 0; i < n_samples; ++i) {
        std::mt19937 rng(seed + static_cast<unsigned>(i) * 131u);
        const std::string id = "sweep" + std::to_string(i);

        MockScene scene;
        scene.id = id;
        scene.canvas_w = canvas_px;
        scene.canvas_h = canvas_px;
        scene.min_visible_px = 4;

        Image canvas(canvas_px, canvas_px);
        const int half = canvas_px / 2;
        const Region quadrants[4] = {Region{0, 0, half, half},
                                     Region{half, 0, half, half},
                                     Region{0, half, half, half},
                                     Region{half, half, half, half}};
        for (int q = 0; q < 4; ++q) {
            const Rgb c = tints[static_cast<std::size_t>(q)];
            canvas.fill_rect(quadrants[q], c.r, c.g, c.b);
        }

        // cue in the top-left tile of Q1 (merged away at theta >= 0.2) or of
        // Q3 (merged away at theta >= 0.3)
        const int cue_quadrant = i % 2 == 0 ? 1 : 3;
        const int tx = 2;
        const int ty = cue_quadrant == 1 ? 0 : 2;
        const std::string name = name_pool()[static_cast<std::size_t>(i) %
                                             name_pool().size()];
        const std::string color = color_pool()[static_cast<std::size_t>(i) %
                                               color_pool().size()];
        scene.objects.push_back(place_object(rng, name, color, tx, ty, 12));

        BenchmarkSample sample;
        sample.id = id;
        sample.image = "images/" + id + ".png";
        sample.question = "What color is the " + name + " in the picture?";
        sample.options = pick_options(rng, color_pool(), color, 4);
        sample.answer_index = index_of(sample.options, color);
        sample.category = i % 2 == 0 ? TaskCategory::fsp_attribute
                                     : TaskCategory::fsp_ocr;
        sample.target_objects = {name};
        sample.target_bbox = Region{tx * kTile, ty * kTile, kTile, kTile};

        draw_scene(canvas, scene);
        suite.scenes.push_back(scene);
        suite.samples.push_back(sample);
        suite.images.emplace_back(id, std::move(canvas));
    }
    return suite;
}

SuitePaths write_suite(const SyntheticSuite& suite, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path base(out_dir);
    fs::create_directories(base / "images");

    for (const auto& [id, image] : suite.images) {
        save_png(image, (base / "images" / (id + ".png")).string());
    }
    save_scenes(suite.scenes, (base / "scenes.json").string());

    const fs::path dataset = base / "dataset.jsonl";
    std::ofstream out(dataset, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::dataset,
                    "cannot write dataset: " + dataset.string());
    }
    for (const BenchmarkSample& s : suite.samples) {
        out << sample_to_json_line(s) << "\n";
    }
    return SuitePaths{dataset.string(), (base / "scenes.json").string(),
                      (base / "images").string()};
}

} // namespace dc2
