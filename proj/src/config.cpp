#include "dc2/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "dc2/error.hpp"

namespace dc2 {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

struct Key {
    const char* name;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error(ErrorKind::usage, "config key '" + key +
                                          "' expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error(ErrorKind::usage, "config key '" + key +
                                          "' expects a number, got '" + v + "'");
    }
}

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        {"patch_size", [](PipelineConfig& c, const std::string& v) { c.patch_size = parse_int("patch_size", v); }},
        {"theta", [](PipelineConfig& c, const std::string& v) { c.theta = parse_double("theta", v); }},
        {"alpha", [](PipelineConfig& c, const std::string& v) { c.alpha = parse_double("alpha", v); }},
        {"max_depth", [](PipelineConfig& c, const std::string& v) { c.max_depth = parse_int("max_depth", v); }},
        {"nms_threshold", [](PipelineConfig& c, const std::string& v) { c.nms_threshold = parse_double("nms_threshold", v); }},
        {"top_k", [](PipelineConfig& c, const std::string& v) { c.top_k = parse_int("top_k", v); }},
        {"temperature", [](PipelineConfig& c, const std::string& v) { c.temperature = parse_double("temperature", v); }},
        {"concurrency", [](PipelineConfig& c, const std::string& v) { c.concurrency = parse_int("concurrency", v); }},
        {"jobs", [](PipelineConfig& c, const std::string& v) { c.jobs = parse_int("jobs", v); }},
        {"leaf_prompt_preset", [](PipelineConfig& c, const std::string& v) { c.leaf_prompt_preset = parse_int("leaf_prompt_preset", v); }},
        {"backend", [](PipelineConfig& c, const std::string& v) { c.backend = v; }},
        {"model", [](PipelineConfig& c, const std::string& v) { c.model = v; }},
        {"api_base", [](PipelineConfig& c, const std::string& v) { c.api_base = v; }},
        {"text_api_base", [](PipelineConfig& c, const std::string& v) { c.text_api_base = v; }},
        {"text_model", [](PipelineConfig& c, const std::string& v) { c.text_model = v; }},
        {"max_retries", [](PipelineConfig& c, const std::string& v) { c.max_retries = parse_int("max_retries", v); }},
        {"timeout_s", [](PipelineConfig& c, const std::string& v) { c.timeout_s = parse_int("timeout_s", v); }},
        {"cache_dir", [](PipelineConfig& c, const std::string& v) { c.cache_dir = v; }},
        {"prompts_dir", [](PipelineConfig& c, const std::string& v) { c.prompts_dir = v; }},
        {"mock_scene", [](PipelineConfig& c, const std::string& v) { c.mock_scene = v; }},
        {"mock_latency_ms", [](PipelineConfig& c, const std::string& v) { c.mock_latency_ms = parse_double("mock_latency_ms", v); }},
    };
    return keys;
}

std::string valid_keys_message() {
    std::string out;
    for (const Key& k : key_table()) {
        if (!out.empty()) out += ", ";
        out += k.name;
    }
    return out;
}

} // namespace

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    for (const Key& k : key_table()) {
        if (key == k.name) {
            k.set(cfg, value);
            return;
        }
    }
    throw Error(ErrorKind::usage, "unknown config key '" + key +
                                      "'; valid keys: " + valid_keys_message());
}

PipelineConfig load_config(const std::optional<std::string>& file_path,
                           const std::map<std::string, std::string>& overrides) {
    PipelineConfig cfg;
    if (file_path) {
        std::ifstream in(*file_path);
        if (!in) {
            throw Error(ErrorKind::usage, "cannot read config file: " + *file_path);
        }
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string stripped = trim(line);
            if (stripped.empty() || stripped[0] == '#') continue;
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos) {
                throw Error(ErrorKind::usage,
                            *file_path + ":" + std::to_string(line_no) +
                                ": expected 'key = value'");
            }
            apply_config_entry(cfg, trim(stripped.substr(0, eq)),
                               trim(stripped.substr(eq + 1)));
        }
    }
    for (const auto& [key, value] : overrides) {
        apply_config_entry(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const PipelineConfig& cfg) {
    auto fail = [](const std::string& key, const std::string& what) {
        throw Error(ErrorKind::usage, "config key '" + key + "' " + what);
    };
    if (cfg.patch_size < 1) fail("patch_size", "must be >= 1");
    if (cfg.theta < 0) fail("theta", "must be >= 0");
    if (cfg.alpha < 0 || cfg.alpha > 1) fail("alpha", "must be in [0, 1]");
    if (cfg.max_depth < 0) fail("max_depth", "must be >= 0");
    if (cfg.nms_threshold < 0 || cfg.nms_threshold > 1) {
        fail("nms_threshold", "must be in [0, 1]");
    }
    if (cfg.top_k < 0) fail("top_k", "must be >= 0");
    if (cfg.temperature < 0) fail("temperature", "must be >= 0");
    if (cfg.concurrency < 1) fail("concurrency", "must be >= 1");
    if (cfg.jobs < 1) fail("jobs", "must be >= 1");
    if (cfg.leaf_prompt_preset < 1 || cfg.leaf_prompt_preset > 5) {
        fail("leaf_prompt_preset", "must be in 1..5");
    }
    if (cfg.backend != "mock" && cfg.backend != "http") {
        fail("backend", "must be 'mock' or 'http'");
    }
    if (cfg.max_retries < 0) fail("max_retries", "must be >= 0");
    if (cfg.timeout_s < 1) fail("timeout_s", "must be >= 1");
    if (cfg.mock_latency_ms < 0) fail("mock_latency_ms", "must be >= 0");
}

std::string config_to_json_string(const PipelineConfig& c) {
    json j;
    j["patch_size"] = c.patch_size;
    j["theta"] = c.theta;
    j["alpha"] = c.alpha;
    j["max_depth"] = c.max_depth;
    j["nms_threshold"] = c.nms_threshold;
    j["top_k"] = c.top_k;
    j["temperature"] = c.temperature;
    j["concurrency"] = c.concurrency;
    j["jobs"] = c.jobs;
    j["leaf_prompt_preset"] = c.leaf_prompt_preset;
    j["backend"] = c.backend;
    j["model"] = c.model;
    j["api_base"] = c.api_base;
    j["text_api_base"] = c.text_api_base;
    j["text_model"] = c.text_model;
    j["max_retries"] = c.max_retries;
    j["timeout_s"] = c.timeout_s;
    j["cache_dir"] = c.cache_dir;
    j["prompts_dir"] = c.prompts_dir;
    j["mock_scene"] = c.mock_scene;
    j["mock_latency_ms"] = c.mock_latency_ms;
    return j.dump(2);
}

PipelineConfig config_from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::usage,
                    std::string("invalid config JSON: ") + e.what());
    }
    PipelineConfig c;
    c.patch_size = j.value("patch_size", c.patch_size);
    c.theta = j.value("theta", c.theta);
    c.alpha = j.value("alpha", c.alpha);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.nms_threshold = j.value("nms_threshold", c.nms_threshold);
    c.top_k = j.value("top_k", c.top_k);
    c.temperature = j.value("temperature", c.temperature);
    c.concurrency = j.value("concurrency", c.concurrency);
    c.jobs = j.value("jobs", c.jobs);
    c.leaf_prompt_preset = j.value("leaf_prompt_preset", c.leaf_prompt_preset);
    c.backend = j.value("backend", c.backend);
    c.model = j.value("model", c.model);
    c.api_base = j.value("api_base", c.api_base);
    c.text_api_base = j.value("text_api_base", c.text_api_base);
    c.text_model = j.value("text_model", c.text_model);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
    c.mock_scene = j.value("mock_scene", c.mock_scene);
    c.mock_latency_ms = j.value("mock_latency_ms", c.mock_latency_ms);
    validate_config(c);
    return c;
}

} // namespace dc2
