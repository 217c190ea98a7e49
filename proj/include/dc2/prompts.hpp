#pragma once

#include <array>
#include <string>
#include <vector>

namespace dc2 {

// Prompt templates for the caption, extraction and inference calls.
// Substitution slots are literal markers: {patch_captions}, {caption},
// {question}. The default set ships as text assets under assets/prompts/
// and must stay byte-identical to them.
struct PromptSet {
    std::string leaf;
    std::string non_leaf;
    std::string extraction_system;
    std::string extraction_user;
    std::string inference;
};

PromptSet default_prompts();

// Loads the five template files (leaf.txt, non_leaf.txt,
// extraction_system.txt, extraction_user.txt, inference.txt) from a
// directory; missing files fall back to the defaults.
PromptSet load_prompts(const std::string& dir);

// Alternative leaf-caption prompts (presets #1..#5); #1 is the default.
const std::array<std::string, 5>& leaf_prompt_presets();

std::string render_non_leaf(const PromptSet& prompts,
                            const std::vector<std::string>& child_captions);
std::string render_extraction_user(const PromptSet& prompts,
                                   const std::string& caption);
std::string render_inference(const PromptSet& prompts,
                             const std::string& question);

// Scaffolding for the final multiple-choice answer request. The auxiliary
// description block is appended after kEvidenceSeparator; with no
// auxiliary text the request degrades to the bare question.
inline constexpr const char* kEvidenceSeparator = "\n\nAdditional information:\n";
inline constexpr const char* kOptionsInstruction =
    "Answer with the option's letter from the given choices directly.";

std::string build_options_block(const std::vector<std::string>& options);
std::string compose_answer_text(const std::string& question,
                                const std::string& options_block,
                                const std::string& auxiliary);

} // namespace dc2
