#pragma once

#include <map>
#include <optional>
#include <string>

namespace dc2 {

// Fully resolved pipeline configuration. Precedence: built-in defaults,
// overridden by the config file, overridden by command-line flags. The API
// credential comes only from the DC2_API_KEY environment variable and is
// never part of this struct or any report echo.
struct PipelineConfig {
    int patch_size = 336;        // encoder resolution S
    double theta = 0.1;          // flat-cluster distance threshold
    double alpha = 0.3;          // retrieval confidence threshold
    int max_depth = 4;
    double nms_threshold = 0.5;
    int top_k = 3;
    double temperature = 0.2;
    int concurrency = 4;
    int jobs = 1;                // concurrent samples in eval
    int leaf_prompt_preset = 1;  // 1..5
    std::string backend = "mock";
    std::string model = "local-model";
    std::string api_base = "http://localhost:8000/v1";
    std::string text_api_base;   // text-only endpoint for the ML runner
    std::string text_model;
    int max_retries = 4;
    int timeout_s = 120;
    std::string cache_dir;
    std::string prompts_dir;
    std::string mock_scene;      // scene registry file for the mock backend
    double mock_latency_ms = 0.0;
};

// Loads defaults, applies the config file (flat `key = value` lines, `#`
// comments) when given, then the flag overrides. Unknown keys and
// out-of-range values raise usage errors naming the offending key.
PipelineConfig load_config(const std::optional<std::string>& file_path,
                           const std::map<std::string, std::string>& overrides);

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);
void validate_config(const PipelineConfig& cfg);

std::string config_to_json_string(const PipelineConfig& cfg);
PipelineConfig config_from_json_string(const std::string& text);

} // namespace dc2
