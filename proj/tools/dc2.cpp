#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "dc2/error.hpp"
#include "dc2/eval.hpp"
#include "dc2/inference.hpp"
#include "dc2/synthetic.hpp"

namespace {

using namespace dc2;

struct CommonFlags {
    std::optional<std::string> config_file;
    std::map<std::string, std::string> overrides;
};

// Every pipeline flag maps onto a config key; only flags the user actually
// passed override the file/defaults.
void add_common_flags(CLI::App* cmd, CommonFlags& flags,
                      bool include_theta = true) {
    cmd->add_option_function<std::string>(
           "--config", [&flags](const std::string& v) { flags.config_file = v; },
           "Config file (flat key = value lines)");
    const auto add = [cmd, &flags](const std::string& flag, const std::string& key,
                                   const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
            help);
    };
    add("--patch-size", "patch_size", "Encoder resolution S (default 336)");
    if (include_theta) {
        add("--theta", "theta", "Flat-cluster distance threshold (default 0.1)");
    }
    add("--alpha", "alpha", "Retrieval confidence threshold (default 0.3)");
    add("--max-depth", "max_depth", "Maximum recursion depth (default 4)");
    add("--nms-threshold", "nms_threshold", "Per-name NMS IoU threshold");
    add("--top-k", "top_k", "Retrieved objects given description calls");
    add("--temperature", "temperature", "Sampling temperature (default 0.2)");
    add("--backend", "backend", "Backend kind: http or mock");
    add("--model", "model", "Model name for the chat endpoint");
    add("--api-base", "api_base", "Chat-completions base URL");
    add("--text-api-base", "text_api_base", "Text-only endpoint base URL");
    add("--text-model", "text_model", "Text-only model name");
    add("--max-retries", "max_retries", "Transport retry budget");
    add("--timeout-s", "timeout_s", "HTTP timeout in seconds");
    add("--cache-dir", "cache_dir", "Response cache directory");
    add("--prompts-dir", "prompts_dir", "Prompt template directory override");
    add("--mock-scene", "mock_scene", "Scene registry JSON for the mock backend");
    add("--mock-latency-ms", "mock_latency_ms", "Simulated per-call latency");
    add("--concurrency", "concurrency", "Max in-flight backend requests");
    add("--jobs", "jobs", "Concurrent samples during eval");
    add("--leaf-prompt-preset", "leaf_prompt_preset",
        "Leaf caption prompt preset 1..5");
}

struct BackendStack {
    std::unique_ptr<MockBackend> mock;
    std::unique_ptr<HttpBackend> http;
    std::unique_ptr<CachingBackend> cache;
    std::unique_ptr<CountingBackend> counting;
    Backend* active = nullptr;
};

BackendStack make_backend(const PipelineConfig& cfg) {
    BackendStack stack;
    Backend* base = nullptr;
    if (cfg.backend == "mock") {
        stack.mock = cfg.mock_scene.empty()
                         ? std::make_unique<MockBackend>()
                         : std::make_unique<MockBackend>(load_scenes(cfg.mock_scene));
        stack.mock->set_latency_ms(cfg.mock_latency_ms);
        base = stack.mock.get();
    } else {
        HttpBackendConfig http_cfg;
        http_cfg.api_base = cfg.api_base;
        http_cfg.model = cfg.model;
        http_cfg.max_retries = cfg.max_retries;
        http_cfg.timeout_s = cfg.timeout_s;
        http_cfg.concurrency = cfg.concurrency;
        stack.http = std::make_unique<HttpBackend>(http_cfg);
        base = stack.http.get();
    }
    if (!cfg.cache_dir.empty()) {
        stack.cache = std::make_unique<CachingBackend>(*base, cfg.cache_dir);
        base = stack.cache.get();
    }
    stack.counting = std::make_unique<CountingBackend>(*base);
    stack.active = stack.counting.get();
    return stack;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::usage, "cannot write file: " + path);
    out << content;
}

std::string image_id_for(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

int run_describe(const std::string& image_path,
                 const std::string& memory_out, const PipelineConfig& cfg) {
    const Image image = load_image(image_path);
    BackendStack stack = make_backend(cfg);
    const PromptSet prompts = prompts_for_config(cfg);
    const MemoryBuild build = build_memory(image, image_id_for(image_path),
                                           *stack.active, cfg, prompts);
    if (!memory_out.empty()) build.memory.save(memory_out);
    std::cout << build.root_caption << "\n";
    std::cerr << "[dc2] " << build.node_count << " nodes, "
              << build.memory.record_count() << " memory records, "
              << stack.counting->calls() << " backend calls\n";
    return 0;
}

int run_ask(const std::string& image_path, const std::string& question,
            const std::string& memory_in, const std::string& memory_out,
            const PipelineConfig& cfg) {
    const Image image = load_image(image_path);
    BackendStack stack = make_backend(cfg);
    const PromptSet prompts = prompts_for_config(cfg);
    const std::string image_id = image_id_for(image_path);

    PipelineRun run;
    if (!memory_in.empty()) {
        run = answer_with_memory(image, image_id, VisualMemory::load(memory_in),
                                 question, "", *stack.active, cfg, prompts);
    } else {
        run = run_pipeline(image, image_id, question, "", *stack.active, cfg,
                           prompts);
    }
    if (!memory_out.empty()) run.memory.save(memory_out);
    std::cout << run.answer_text << "\n";
    std::cerr << "[dc2] " << run.hits.size() << " retrieval hits, "
              << stack.counting->calls() << " backend calls\n";
    return 0;
}

int run_eval(const std::string& dataset, const std::string& runner_kind,
             const std::string& report_out, const std::string& csv_out,
             const PipelineConfig& cfg) {
    BackendStack stack = make_backend(cfg);
    const PromptSet prompts = prompts_for_config(cfg);

    std::unique_ptr<SampleRunner> runner;
    if (runner_kind == "dc2") {
        runner = std::make_unique<Dc2SampleRunner>(*stack.active, cfg, prompts);
    } else if (runner_kind == "baseline") {
        runner = std::make_unique<BaselineSampleRunner>(*stack.active, cfg,
                                                        prompts, true);
    } else if (runner_kind == "no-image") {
        runner = std::make_unique<BaselineSampleRunner>(*stack.active, cfg,
                                                        prompts, false);
    } else if (runner_kind == "text-only") {
        runner = std::make_unique<BaselineSampleRunner>(*stack.active, cfg,
                                                        prompts, false, true);
    } else {
        throw Error(ErrorKind::usage,
                    "unknown runner '" + runner_kind +
                        "'; expected dc2, baseline, no-image or text-only");
    }

    CountingBackend* counting = stack.counting.get();
    const EvalReport report =
        evaluate(dataset, *runner, cfg,
                 [counting]() { return counting->calls(); });
    if (!report_out.empty()) write_text_file(report_out, report.to_json_string());
    if (!csv_out.empty()) write_text_file(csv_out, report.to_csv());
    std::cerr << "[dc2] " << runner_kind << " on " << dataset << ": overall "
              << report.overall_acc << ", " << report.n_failed << "/"
              << report.n_samples << " failed, "
              << report.throughput_samples_per_minute << " samples/min, "
              << report.backend_calls << " calls\n";
    return 0;
}

int run_throughput(const std::string& dataset, const std::string& theta_list,
                   const std::string& csv_out, const PipelineConfig& cfg) {
    std::vector<double> thetas;
    std::stringstream ss(theta_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) thetas.push_back(std::stod(item));
    }
    if (thetas.empty()) {
        throw Error(ErrorKind::usage, "--theta needs a comma-separated list");
    }
    const std::vector<SweepRow> rows = throughput_sweep(dataset, thetas, cfg);
    const std::string csv = sweep_to_csv(rows);
    if (!csv_out.empty()) write_text_file(csv_out, csv);
    else std::cout << csv;
    for (const SweepRow& r : rows) {
        std::cerr << "[dc2] theta " << r.theta << ": " << r.throughput
                  << " samples/min, acc " << r.accuracy << ", "
                  << r.backend_calls << " calls\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC2: divide, conquer and combine for high-resolution "
                 "image question answering"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* describe = app.add_subcommand(
        "describe", "Divide + conquer + combine an image and dump the memory");
    std::string image_path, memory_out;
    describe->add_option("--image", image_path, "Input image (PNG/JPEG)")
        ->required();
    describe->add_option("--memory-out", memory_out, "Memory JSON output path");
    add_common_flags(describe, flags);

    auto* ask = app.add_subcommand("ask", "Answer a question about an image");
    std::string ask_image, question, memory_in, ask_memory_out;
    ask->add_option("--image", ask_image, "Input image (PNG/JPEG)")->required();
    ask->add_option("--question", question, "Question text")->required();
    ask->add_option("--memory-in", memory_in,
                    "Reuse a persisted memory instead of re-dividing");
    ask->add_option("--memory-out", ask_memory_out, "Memory JSON output path");
    add_common_flags(ask, flags);

    auto* eval_cmd = app.add_subcommand("eval", "Run a benchmark evaluation");
    std::string dataset, runner_kind = "dc2", report_out, csv_out;
    eval_cmd->add_option("--dataset", dataset, "JSONL benchmark file")
        ->required();
    eval_cmd->add_option("--runner", runner_kind,
                         "dc2, baseline, no-image or text-only");
    eval_cmd->add_option("--out", report_out, "Report JSON output path");
    eval_cmd->add_option("--csv", csv_out, "Per-sample CSV output path");
    add_common_flags(eval_cmd, flags);

    auto* throughput = app.add_subcommand(
        "throughput", "Sweep theta and report throughput/accuracy pairs");
    std::string sweep_dataset, theta_list = "0.1,0.2,0.3", sweep_csv;
    throughput->add_option("--dataset", sweep_dataset, "JSONL benchmark file")
        ->required();
    throughput->add_option("--theta", theta_list,
                           "Comma-separated theta values to sweep");
    throughput->add_option("--csv", sweep_csv, "Output CSV path");
    add_common_flags(throughput, flags, /*include_theta=*/false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const PipelineConfig cfg = load_config(flags.config_file, flags.overrides);
        if (describe->parsed()) return run_describe(image_path, memory_out, cfg);
        if (ask->parsed()) {
            return run_ask(ask_image, question, memory_in, ask_memory_out, cfg);
        }
        if (eval_cmd->parsed()) {
            return run_eval(dataset, runner_kind, report_out, csv_out, cfg);
        }
        if (throughput->parsed()) {
            return run_throughput(sweep_dataset, theta_list, sweep_csv, cfg);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
