#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dc2/divide.hpp"
#include "dc2/geometry.hpp"

namespace dc2 {

// Lowercases, trims, collapses internal whitespace runs. Returns nullopt
// when nothing remains.
std::optional<std::string> normalize_name(const std::string& raw);

// Objects present at both the node and its children are kept as actually
// existing: exact set intersection on normalized names.
std::set<std::string> filter_objects(const std::set<std::string>& parent_objects,
                                     const std::set<std::string>& child_objects_union);

// Per-object-name store of the patch coordinates where the object was
// observed, deduplicated per name with NMS after every store.
class VisualMemory {
public:
    void set_image(const std::string& image_id, int root_w, int root_h);
    const std::string& image_id() const { return image_id_; }
    int root_w() const { return root_w_; }
    int root_h() const { return root_h_; }

    // One candidate per source region, at the node's layer. Re-runs NMS on
    // the name's record list afterwards.
    void store(const std::set<std::string>& objects,
               const std::vector<Region>& source_regions, int layer,
               double nms_threshold);
    void store(const std::set<std::string>& objects, const PatchNode& node,
               double nms_threshold);

    const std::map<std::string, std::vector<ScoredRegion>>& records() const {
        return records_;
    }
    bool empty() const { return records_.empty(); }
    std::size_t record_count() const;

    std::string to_json_string() const;
    static VisualMemory from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static VisualMemory load(const std::string& path);

private:
    std::map<std::string, std::vector<ScoredRegion>> records_;
    std::string image_id_;
    int root_w_ = 0;
    int root_h_ = 0;
    int next_tiebreak_ = 0;
};

} // namespace dc2
