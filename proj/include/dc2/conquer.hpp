#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dc2/backend.hpp"
#include "dc2/divide.hpp"
#include "dc2/prompts.hpp"

namespace dc2 {

// Shared state for the caption/extraction calls of one image.
struct ConquerContext {
    Backend& backend;
    const PromptSet& prompts;
    std::string model;
    double temperature = 0.2;
    int patch_size = 336;
    std::string image_id;
};

ChatRequest make_patch_request(const ConquerContext& ctx,
                               const PatchImage& patch,
                               const std::string& user_text);

std::string caption_leaf(const ConquerContext& ctx, const PatchImage& patch);

std::string caption_non_leaf(const ConquerContext& ctx,
                             const PatchImage& patch,
                             const std::vector<std::string>& child_captions);

// Extracts the "object_list" entity names from a caption via the backend.
// Replies that cannot be coerced into the expected JSON shape after one
// repair pass degrade to the empty set (logged to stderr), never a throw.
std::set<std::string> extract_objects(const ConquerContext& ctx,
                                      const std::string& caption);

// Strips any pre/postamble outside the outermost JSON object braces.
std::optional<std::string> repair_json_object(const std::string& text);

} // namespace dc2
