#include "dc2/combine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dc2/error.hpp"

namespace dc2 {

using nlohmann::json;

std::optional<std::string> normalize_name(const std::string& raw) {
    std::string out;
    bool pending_space = false;
    for (char ch : raw) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::set<std::string> filter_objects(const std::set<std::string>& parent_objects,
                                     const std::set<std::string>& child_objects_union) {
    std::set<std::string> out;
    std::set_intersection(parent_objects.begin(), parent_objects.end(),
                          child_objects_union.begin(),
                          child_objects_union.end(),
                          std::inserter(out, out.begin()));
    return out;
}

void VisualMemory::set_image(const std::string& image_id, int root_w,
                             int root_h) {
    image_id_ = image_id;
    root_w_ = root_w;
    root_h_ = root_h;
}

void VisualMemory::store(const std::set<std::string>& objects,
                         const std::vector<Region>& source_regions, int layer,
                         double nms_threshold) {
    for (const std::string& name : objects) {
        auto& list = records_[name];
        for (const Region& r : source_regions) {
            list.push_back(ScoredRegion{r, layer, next_tiebreak_++});
        }
        list = nms(std::move(list), nms_threshold);
    }
}

void VisualMemory::store(const std::set<std::string>& objects,
                         const PatchNode& node, double nms_threshold) {
    store(objects, node.patch.source_regions, node.layer, nms_threshold);
}

std::size_t VisualMemory::record_count() const {
    std::size_t n = 0;
    for (const auto& [name, list] : records_) n += list.size();
    return n;
}

std::string VisualMemory::to_json_string() const {
    json j;
    j["image_id"] = image_id_;
    j["root_size"] = {{"w", root_w_}, {"h", root_h_}};
    j["records"] = json::array();
    for (const auto& [name, list] : records_) {
        for (const ScoredRegion& sr : list) {
            j["records"].push_back({{"name", name},
                                    {"x", sr.region.x},
                                    {"y", sr.region.y},
                                    {"w", sr.region.w},
                                    {"h", sr.region.h},
                                    {"layer", sr.layer}});
        }
    }
    return j.dump(2);
}

VisualMemory VisualMemory::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::dataset,
                    std::string("invalid memory JSON: ") + e.what());
    }
    VisualMemory mem;
    mem.image_id_ = j.value("image_id", "");
    if (j.contains("root_size")) {
        mem.root_w_ = j["root_size"].value("w", 0);
        mem.root_h_ = j["root_size"].value("h", 0);
    }
    for (const json& r : j.value("records", json::array())) {
        const std::string name = r.at("name").get<std::string>();
        mem.records_[name].push_back(
            ScoredRegion{Region{r.at("x").get<int>(), r.at("y").get<int>(),
                                r.at("w").get<int>(), r.at("h").get<int>()},
                         r.at("layer").get<int>(), mem.next_tiebreak_++});
    }
    return mem;
}

void VisualMemory::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::dataset, "cannot write memory: " + path);
    out << to_json_string();
}

VisualMemory VisualMemory::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::dataset, "cannot read memory: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

} // namespace dc2
