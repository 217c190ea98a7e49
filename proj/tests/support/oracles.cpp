#include "oracles.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dc2::test {

double brute_force_iou(const Region& a, const Region& b) {
    const int x0 = std::min(a.x, b.x);
    const int y0 = std::min(a.y, b.y);
    const int x1 = std::max(a.x + a.w, b.x + b.w);
    const int y1 = std::max(a.y + a.h, b.y + b.h);
    long long inter = 0, uni = 0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
            const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
            if (in_a && in_b) ++inter;
            if (in_a || in_b) ++uni;
        }
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<ClusterCase> load_cluster_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cluster corpus: " + path);
    const nlohmann::json j = nlohmann::json::parse(in);
    std::vector<ClusterCase> cases;
    for (const auto& jc : j) {
        ClusterCase c;
        c.vectors = jc.at("vectors").get<std::vector<std::vector<double>>>();
        c.theta = jc.at("theta").get<double>();
        c.labels = jc.at("labels").get<std::vector<int>>();
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<int> canonical_labels(const std::vector<std::vector<int>>& clusters) {
    std::vector<int> labels(4, -1);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (int member : clusters[c]) {
            labels[static_cast<std::size_t>(member)] = static_cast<int>(c);
        }
    }
    // clusters are ordered by smallest member, so relabel by first occurrence
    std::vector<int> remap(clusters.size(), -1);
    int next = 0;
    std::vector<int> out(4);
    for (std::size_t i = 0; i < 4; ++i) {
        const int l = labels[i];
        if (remap[static_cast<std::size_t>(l)] < 0) {
            remap[static_cast<std::size_t>(l)] = next++;
        }
        out[i] = remap[static_cast<std::size_t>(l)];
    }
    return out;
}

} // namespace dc2::test
