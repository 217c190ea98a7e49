#pragma once

// Independent reference implementations used to check the library. These
// must stay separate from the code paths they verify.

#include <string>
#include <vector>

#include "dc2/geometry.hpp"

namespace dc2::test {

// IoU by literally counting pixels on an integer grid.
double brute_force_iou(const Region& a, const Region& b);

// Average-linkage clustering case frozen from an external reference
// implementation (see tests/data/gen_cluster_corpus.py).
struct ClusterCase {
    std::vector<std::vector<double>> vectors;
    double theta;
    std::vector<int> labels; // canonical: first occurrence order
};

std::vector<ClusterCase> load_cluster_corpus(const std::string& path);

// Canonicalizes a partition-of-four into first-occurrence labels.
std::vector<int> canonical_labels(const std::vector<std::vector<int>>& clusters);

} // namespace dc2::test
