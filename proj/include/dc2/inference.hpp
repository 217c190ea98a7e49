#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dc2/combine.hpp"
#include "dc2/config.hpp"
#include "dc2/conquer.hpp"

namespace dc2 {

struct RetrievalHit {
    std::string name;
    Region region;
    int layer = 0;
    double score = 0.0;
};

// Character-trigram TF cosine between query and object name. Words are
// lowercased alphanumeric runs padded with ^/$ before trigram extraction,
// so short names like "car" still match well. Range [0, 1]; identical
// strings score 1.
double score_query_object(const std::string& query, const std::string& name);

using QueryScorer =
    std::function<double(const std::string& query, const std::string& name)>;

// All memory entries whose name scores >= alpha against the query, sorted
// by score descending, then name, then layer descending. Alpha above 1
// returns nothing.
std::vector<RetrievalHit> retrieve(const VisualMemory& memory,
                                   const std::string& query, double alpha,
                                   const QueryScorer& scorer = score_query_object);

// Crops the hit regions out of the root image (best record per name, up to
// top_k names), asks the auxiliary-description prompt on each, and joins
// the non-"NONE" replies in hit order.
std::string describe_hits(const ConquerContext& ctx, const Image& root_image,
                          const std::string& question,
                          const std::vector<RetrievalHit>& hits, int top_k);

// Final call: question (plus options block when given), auxiliary text
// appended after the separator, root image downsampled to the encoder
// resolution. With empty auxiliary text this is exactly the baseline
// single-call request.
ChatRequest make_answer_request(const ConquerContext& ctx,
                                const Image& root_image,
                                const std::string& question,
                                const std::string& options_block,
                                const std::string& auxiliary);

ChatResponse answer(const ConquerContext& ctx, const Image& root_image,
                    const std::string& question,
                    const std::string& options_block,
                    const std::string& auxiliary);

struct MemoryBuild {
    VisualMemory memory;
    std::string root_caption;
    std::size_t node_count = 0;
};

// Divide + conquer + combine: builds the patch tree, captions it
// post-order, filters object sets, and stores coordinates in the memory.
MemoryBuild build_memory(const Image& image, const std::string& image_id,
                         Backend& backend, const PipelineConfig& cfg,
                         const PromptSet& prompts);

struct PipelineRun {
    std::string answer_text;
    std::optional<std::vector<double>> answer_logprobs;
    std::vector<RetrievalHit> hits;
    std::string auxiliary_text;
    VisualMemory memory;
    std::string root_caption;
};

// Full Algorithm-1 style run: memory construction followed by retrieval,
// auxiliary description and the final answer. `options_block` may be empty
// (free-form question); retrieval always uses the bare question.
PipelineRun run_pipeline(const Image& image, const std::string& image_id,
                         const std::string& question,
                         const std::string& options_block, Backend& backend,
                         const PipelineConfig& cfg, const PromptSet& prompts);

// Retrieval + description + answer over an existing memory.
PipelineRun answer_with_memory(const Image& image, const std::string& image_id,
                               VisualMemory memory, const std::string& question,
                               const std::string& options_block,
                               Backend& backend, const PipelineConfig& cfg,
                               const PromptSet& prompts);

PromptSet prompts_for_config(const PipelineConfig& cfg);

} // namespace dc2
