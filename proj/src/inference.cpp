#include "dc2/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <map>

#include "dc2/error.hpp"

namespace dc2 {

namespace {

std::map<std::string, int> word_trigrams(const std::string& text) {
    std::map<std::string, int> grams;
    std::string word;
    auto flush = [&grams, &word]() {
        if (word.empty()) return;
        const std::string padded = "^" + word + "$";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            ++grams[padded.substr(i, 3)];
        }
        word.clear();
    };
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            word += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return grams;
}

} // namespace

double score_query_object(const std::string& query, const std::string& name) {
    const auto qa = word_trigrams(query);
    const auto qb = word_trigrams(name);
    if (qa.empty() || qb.empty()) return 0.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, c] : qa) {
        na += static_cast<double>(c) * c;
        const auto it = qb.find(g);
        if (it != qb.end()) dot += static_cast<double>(c) * it->second;
    }
    for (const auto& [g, c] : qb) nb += static_cast<double>(c) * c;
    const double score = dot / std::sqrt(na * nb);
    return std::clamp(score, 0.0, 1.0);
}

std::vector<RetrievalHit> retrieve(const VisualMemory& memory,
                                   const std::string& query, double alpha,
                                   const QueryScorer& scorer) {
    std::vector<RetrievalHit> hits;
    for (const auto& [name, records] : memory.records()) {
        const double score = scorer(query, name);
        if (score < alpha) continue;
        for (const ScoredRegion& sr : records) {
            hits.push_back(RetrievalHit{name, sr.region, sr.layer, score});
        }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const RetrievalHit& a, const RetrievalHit& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.name != b.name) return a.name < b.name;
                         return a.layer > b.layer;
                     });
    return hits;
}

std::string describe_hits(const ConquerContext& ctx, const Image& root_image,
                          const std::string& question,
                          const std::vector<RetrievalHit>& hits, int top_k) {
    // one description call per distinct retrieved object, best record first
    std::vector<const RetrievalHit*> chosen;
    for (const RetrievalHit& hit : hits) {
        if (static_cast<int>(chosen.size()) >= top_k) break;
        const bool seen =
            std::any_of(chosen.begin(), chosen.end(),
                        [&hit](const RetrievalHit* c) { return c->name == hit.name; });
        if (!seen) chosen.push_back(&hit);
    }
    if (chosen.empty()) return "";

    const std::string prompt = render_inference(ctx.prompts, question);
    std::vector<std::future<std::string>> futures;
    futures.reserve(chosen.size());
    for (const RetrievalHit* hit : chosen) {
        futures.push_back(std::async(std::launch::async, [&ctx, &root_image,
                                                          &prompt, hit]() {
            PatchImage patch;
            patch.pixels = crop(root_image, hit->region);
            patch.source_regions = {hit->region};
            return ctx.backend.chat(make_patch_request(ctx, patch, prompt)).text;
        }));
    }
    std::string joined;
    for (auto& f : futures) {
        std::string reply = f.get();
        const std::size_t a = reply.find_first_not_of(" \t\r\n");
        const std::size_t b = reply.find_last_not_of(" \t\r\n");
        const std::string trimmed =
            a == std::string::npos ? "" : reply.substr(a, b - a + 1);
        std::string upper = trimmed;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        if (trimmed.empty() || upper == "NONE") continue;
        if (!joined.empty()) joined += "\n";
        joined += trimmed;
    }
    return joined;
}

ChatRequest make_answer_request(const ConquerContext& ctx,
                                const Image& root_image,
                                const std::string& question,
                                const std::string& options_block,
                                const std::string& auxiliary) {
    PatchImage root;
    root.pixels = root_image;
    root.source_regions = {Region{0, 0, root_image.w, root_image.h}};
    ChatRequest req = make_patch_request(
        ctx, root, compose_answer_text(question, options_block, auxiliary));
    req.want_logprobs = true;
    return req;
}

ChatResponse answer(const ConquerContext& ctx, const Image& root_image,
                    const std::string& question,
                    const std::string& options_block,
                    const std::string& auxiliary) {
    return ctx.backend.chat(
        make_answer_request(ctx, root_image, question, options_block, auxiliary));
}

namespace {

struct StoreEvent {
    std::set<std::string> objects;
    std::vector<Region> regions;
    int layer = 0;
};

struct WalkResult {
    std::string caption;
    std::set<std::string> objects;
    std::vector<StoreEvent> events;
};

// Post-order conquer/combine pass. Sibling subtrees may run concurrently;
// store events are collected and replayed in deterministic order so the
// resulting memory is identical to the sequential one.
WalkResult conquer_walk(const ConquerContext& ctx, PatchNode& node,
                        const std::string& node_path, int async_depth) {
    try {
        WalkResult result;
        if (node.is_leaf()) {
            result.caption = caption_leaf(ctx, node.patch);
            result.objects = extract_objects(ctx, result.caption);
            // leaves store their raw object set: there is no child set to
            // intersect against
            result.events.push_back(StoreEvent{
                result.objects, node.patch.source_regions, node.layer});
        } else {
            std::vector<WalkResult> child_results(node.children.size());
            if (async_depth > 0) {
                std::vector<std::future<WalkResult>> futures;
                futures.reserve(node.children.size());
                for (std::size_t i = 0; i < node.children.size(); ++i) {
                    futures.push_back(std::async(
                        std::launch::async, [&ctx, &node, node_path, i,
                                             async_depth]() {
                            return conquer_walk(
                                ctx, *node.children[i],
                                node_path + "/" + std::to_string(i),
                                async_depth - 1);
                        }));
                }
                for (std::size_t i = 0; i < futures.size(); ++i) {
                    child_results[i] = futures[i].get();
                }
            } else {
                for (std::size_t i = 0; i < node.children.size(); ++i) {
                    child_results[i] =
                        conquer_walk(ctx, *node.children[i],
                                     node_path + "/" + std::to_string(i), 0);
                }
            }

            std::vector<std::string> child_captions;
            std::set<std::string> child_union;
            for (WalkResult& cr : child_results) {
                child_captions.push_back(cr.caption);
                child_union.insert(cr.objects.begin(), cr.objects.end());
                result.events.insert(result.events.end(),
                                     std::make_move_iterator(cr.events.begin()),
                                     std::make_move_iterator(cr.events.end()));
            }
            result.caption = caption_non_leaf(ctx, node.patch, child_captions);
            result.objects = extract_objects(ctx, result.caption);
            const std::set<std::string> existing =
                filter_objects(result.objects, child_union);
            result.events.push_back(
                StoreEvent{existing, node.patch.source_regions, node.layer});
        }
        node.caption = result.caption;
        node.objects = result.objects;
        return result;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::backend, "conquer stage failed at node " +
                                            node_path + ": " + e.what());
    }
}

} // namespace

PromptSet prompts_for_config(const PipelineConfig& cfg) {
    PromptSet prompts = cfg.prompts_dir.empty() ? default_prompts()
                                                : load_prompts(cfg.prompts_dir);
    if (cfg.leaf_prompt_preset != 1 && cfg.prompts_dir.empty()) {
        prompts.leaf =
            leaf_prompt_presets()[static_cast<std::size_t>(cfg.leaf_prompt_preset - 1)];
    }
    return prompts;
}

MemoryBuild build_memory(const Image& image, const std::string& image_id,
                         Backend& backend, const PipelineConfig& cfg,
                         const PromptSet& prompts) {
    DivideConfig divide_cfg{cfg.patch_size, cfg.theta, cfg.max_depth};
    std::unique_ptr<PatchNode> root;
    try {
        root = build_patch_tree(image, divide_cfg);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::dataset,
                    std::string("divide stage failed: ") + e.what());
    }

    ConquerContext ctx{backend,         prompts,        cfg.model,
                       cfg.temperature, cfg.patch_size, image_id};
    const int async_depth = cfg.concurrency > 1 ? 2 : 0;
    WalkResult walk = conquer_walk(ctx, *root, "root", async_depth);

    MemoryBuild out;
    out.memory.set_image(image_id, image.w, image.h);
    for (const StoreEvent& ev : walk.events) {
        out.memory.store(ev.objects, ev.regions, ev.layer, cfg.nms_threshold);
    }
    out.root_caption = walk.caption;
    out.node_count = count_nodes(*root);
    return out;
}

PipelineRun answer_with_memory(const Image& image, const std::string& image_id,
                               VisualMemory memory, const std::string& question,
                               const std::string& options_block,
                               Backend& backend, const PipelineConfig& cfg,
                               const PromptSet& prompts) {
    ConquerContext ctx{backend,         prompts,        cfg.model,
                       cfg.temperature, cfg.patch_size, image_id};
    PipelineRun run;
    run.memory = std::move(memory);
    run.hits = retrieve(run.memory, question, cfg.alpha);
    run.auxiliary_text =
        describe_hits(ctx, image, question, run.hits, cfg.top_k);
    const ChatResponse resp =
        answer(ctx, image, question, options_block, run.auxiliary_text);
    run.answer_text = resp.text;
    run.answer_logprobs = resp.token_logprobs;
    return run;
}

PipelineRun run_pipeline(const Image& image, const std::string& image_id,
                         const std::string& question,
                         const std::string& options_block, Backend& backend,
                         const PipelineConfig& cfg, const PromptSet& prompts) {
    MemoryBuild build = build_memory(image, image_id, backend, cfg, prompts);
    PipelineRun run =
        answer_with_memory(image, image_id, std::move(build.memory), question,
                           options_block, backend, cfg, prompts);
    run.root_caption = build.root_caption;
    return run;
}

} // namespace dc2
