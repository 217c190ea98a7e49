#include "dc2/conquer.hpp"

#include <iostream>

#include <nlohmann/json.hpp>

#include "dc2/combine.hpp"

namespace dc2 {

using nlohmann::json;

ChatRequest make_patch_request(const ConquerContext& ctx,
                               const PatchImage& patch,
                               const std::string& user_text) {
    const Image attached =
        downsample_to_max_side(patch.pixels, ctx.patch_size);
    ChatRequest req;
    req.model = ctx.model;
    req.user_text = user_text;
    req.image_png = encode_png(attached);
    req.temperature = ctx.temperature;
    req.meta.image_id = ctx.image_id;
    req.meta.source_regions = patch.source_regions;
    req.meta.attached_w = attached.w;
    req.meta.attached_h = attached.h;
    return req;
}

std::string caption_leaf(const ConquerContext& ctx, const PatchImage& patch) {
    return ctx.backend.chat(make_patch_request(ctx, patch, ctx.prompts.leaf))
        .text;
}

std::string caption_non_leaf(const ConquerContext& ctx,
                             const PatchImage& patch,
                             const std::vector<std::string>& child_captions) {
    const std::string prompt = render_non_leaf(ctx.prompts, child_captions);
    return ctx.backend.chat(make_patch_request(ctx, patch, prompt)).text;
}

std::optional<std::string> repair_json_object(const std::string& text) {
    const std::size_t open = text.find('{');
    const std::size_t close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos ||
        close <= open) {
        return std::nullopt;
    }
    return text.substr(open, close - open + 1);
}

std::set<std::string> extract_objects(const ConquerContext& ctx,
                                      const std::string& caption) {
    std::set<std::string> out;
    if (caption.empty()) return out;

    ChatRequest req;
    req.model = ctx.model;
    req.system = ctx.prompts.extraction_system;
    req.user_text = render_extraction_user(ctx.prompts, caption);
    req.temperature = ctx.temperature;
    req.meta.image_id = ctx.image_id;
    const std::string reply = ctx.backend.chat(req).text;

    json parsed;
    bool ok = false;
    try {
        parsed = json::parse(reply);
        ok = true;
    } catch (const json::exception&) {
        if (const auto repaired = repair_json_object(reply)) {
            try {
                parsed = json::parse(*repaired);
                ok = true;
            } catch (const json::exception&) {
            }
        }
    }
    if (!ok || !parsed.is_object() || !parsed.contains("object_list") ||
        !parsed["object_list"].is_array()) {
        std::cerr << "[dc2] unparseable object extraction reply, treating as "
                     "empty: "
                  << reply.substr(0, 200) << "\n";
        return out;
    }
    for (const json& item : parsed["object_list"]) {
        if (!item.is_string()) continue;
        if (const auto name = normalize_name(item.get<std::string>())) {
            out.insert(*name);
        }
    }
    return out;
}

} // namespace dc2
