#include "dc2/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dc2 {

namespace {

const char* kLeaf = "Please describe this image.";

const char* kNonLeaf =
    "Give you patch captions which describe the image patches repectively, "
    "you are required to combine all the information to generate refined "
    "text descriptions about the image. Patch Captions:\n{patch_captions}";

const char* kExtractionSystem =
    "You are a language assistant that helps to extract information from "
    "given sentences. Given a sentence which describe the image, extract "
    "the existent entities within the sentence for me. Extract the common "
    "objects and summarize them as general categories without repetition, "
    "merge essentially similar objects. Avoid extracting abstract or "
    "non-specific entities. Only extract concrete, certainly existent "
    "objects that fall in general categories and are described in a "
    "certain tone in the sentence. Extract entity in a JSON DICT. Output "
    "all the extracted types of items in one line and separate each object "
    "type with a period. You should ignore the singular and plural forms "
    "of nouns, and all extracted objects should be represented in singular "
    "form. If there is noting to output, then output a single empty list "
    "[].";

const char* kExtractionUser =
    "Input:\n"
    "Sentence: \"The bus is surrounded by a few other vehicles, including "
    "a car and a truck, which are driving in the same direction as the "
    "bus. A person can be seen standing on the sidewalk, possibly waiting "
    "for the bus or observing the scene.\"\n"
    "Output: {\"object_list\": [\"bus\",\"car\",\"truck\",\"person\"]}\n"
    "Input:\n"
    "Sentence: \"{caption}\"\n"
    "Output:";

const char* kInference =
    "Question: {question}\n"
    "You should provide more information to help you answer the question "
    "and explain the reasons. If no any helpful information, you should "
    "answer NONE.";

std::string replace_slot(std::string text, const std::string& slot,
                         const std::string& value) {
    const std::size_t pos = text.find(slot);
    if (pos == std::string::npos) {
        throw std::runtime_error("prompt template lacks slot " + slot);
    }
    text.replace(pos, slot.size(), value);
    return text;
}

std::string read_if_present(const std::filesystem::path& p,
                            const std::string& fallback) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return fallback;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

PromptSet default_prompts() {
    return PromptSet{kLeaf, kNonLeaf, kExtractionSystem, kExtractionUser,
                     kInference};
}

PromptSet load_prompts(const std::string& dir) {
    const std::filesystem::path base(dir);
    PromptSet d = default_prompts();
    return PromptSet{
        read_if_present(base / "leaf.txt", d.leaf),
        read_if_present(base / "non_leaf.txt", d.non_leaf),
        read_if_present(base / "extraction_system.txt", d.extraction_system),
        read_if_present(base / "extraction_user.txt", d.extraction_user),
        read_if_present(base / "inference.txt", d.inference),
    };
}

const std::array<std::string, 5>& leaf_prompt_presets() {
    static const std::array<std::string, 5> presets = {
        kLeaf,
        "Describe the entire scene in the image, starting with the "
        "environment and setting. Include details of the background, "
        "foreground, and any significant objects or people. Mention any "
        "actions or interactions taking place, as well as the overall mood "
        "or atmosphere conveyed by the image.",
        "Identify and describe the key objects or subjects in the image. "
        "Specify their locations relative to the background and foreground. "
        "Highlight any actions, interactions, or significant details that "
        "draw attention, and explain how these elements contribute to the "
        "image's overall theme or narrative.",
        "Detail the environment depicted in the image, including weather, "
        "time of day, and any natural or artificial lighting. Describe how "
        "these factors influence the mood and tone of the image. Mention "
        "any significant objects or people present, and how they interact "
        "with the environment.",
        "Describe the characters or subjects in the image, focusing on "
        "their expressions, body language, and interactions. Explain how "
        "these elements convey emotions or relationships. Include details "
        "of the setting and any relevant objects that enhance the "
        "understanding of the scene.",
    };
    return presets;
}

std::string render_non_leaf(const PromptSet& prompts,
                            const std::vector<std::string>& child_captions) {
    if (child_captions.empty()) {
        throw std::invalid_argument("non-leaf prompt needs child captions");
    }
    std::string block;
    for (std::size_t i = 0; i < child_captions.size(); ++i) {
        if (i) block += '\n';
        block += std::to_string(i + 1) + ". " + child_captions[i];
    }
    return replace_slot(prompts.non_leaf, "{patch_captions}", block);
}

std::string render_extraction_user(const PromptSet& prompts,
                                   const std::string& caption) {
    return replace_slot(prompts.extraction_user, "{caption}", caption);
}

std::string render_inference(const PromptSet& prompts,
                             const std::string& question) {
    return replace_slot(prompts.inference, "{question}", question);
}

std::string build_options_block(const std::vector<std::string>& options) {
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += static_cast<char>('A' + i);
        out += ". " + options[i] + "\n";
    }
    out += kOptionsInstruction;
    return out;
}

std::string compose_answer_text(const std::string& question,
                                const std::string& options_block,
                                const std::string& auxiliary) {
    std::string text = question;
    if (!options_block.empty()) text += "\n" + options_block;
    if (!auxiliary.empty()) text += kEvidenceSeparator + auxiliary;
    return text;
}

} // namespace dc2
