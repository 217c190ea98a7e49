#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dc2/backend.hpp"
#include "dc2/eval.hpp"
#include "dc2/image.hpp"

namespace dc2 {

// Self-contained synthetic benchmark: rendered canvases, the mock scenes
// describing them, and the JSONL samples querying them.
struct SyntheticSuite {
    std::vector<MockScene> scenes;
    std::vector<BenchmarkSample> samples;
    std::vector<std::pair<std::string, Image>> images; // image id -> raster
};

// High-resolution suite: 2688x2688 canvases tiled with a quadrant-distinct
// color pattern (no sibling patches merge at theta <= 0.12), small object
// cues that survive only at leaf scale, and questions across all six task
// categories. target_objects/target_bbox annotations are included.
SyntheticSuite make_hr_suite(int n_samples, unsigned seed);

// Theta-sweep suite: 1344x1344 canvases with four solid quadrant tints at
// engineered cosine distances (0.15 and 0.25), so theta in {0.1, 0.2, 0.3}
// merges strictly more patches as it grows.
SyntheticSuite make_sweep_suite(int n_samples, unsigned seed);

struct SuitePaths {
    std::string dataset;
    std::string scenes;
    std::string images_dir;
};

// Writes images/<id>.png, scenes.json and dataset.jsonl under out_dir.
SuitePaths write_suite(const SyntheticSuite& suite, const std::string& out_dir);

} // namespace dc2
