#include "dc2/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dc2/error.hpp"
#include "dc2/inference.hpp"

namespace dc2 {

using nlohmann::json;

std::string category_name(TaskCategory c) {
    switch (c) {
    case TaskCategory::fsp_attribute: return "FSP:attribute";
    case TaskCategory::fsp_ocr: return "FSP:ocr";
    case TaskCategory::fsp_visual_prompting: return "FSP:visual_prompting";
    case TaskCategory::fcp_map: return "FCP:map";
    case TaskCategory::fcp_chart: return "FCP:chart";
    case TaskCategory::fcp_spatial: return "FCP:spatial";
    }
    return "unknown";
}

std::optional<TaskCategory> parse_category(const std::string& text) {
    static const std::map<std::string, TaskCategory> table = {
        {"FSP:attribute", TaskCategory::fsp_attribute},
        {"FSP:ocr", TaskCategory::fsp_ocr},
        {"FSP:visual_prompting", TaskCategory::fsp_visual_prompting},
        {"FCP:map", TaskCategory::fcp_map},
        {"FCP:chart", TaskCategory::fcp_chart},
        {"FCP:spatial", TaskCategory::fcp_spatial},
    };
    const auto it = table.find(text);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

bool is_fsp(TaskCategory c) {
    return c == TaskCategory::fsp_attribute || c == TaskCategory::fsp_ocr ||
           c == TaskCategory::fsp_visual_prompting;
}

namespace {

BenchmarkSample sample_from_json(const json& j) {
    BenchmarkSample s;
    s.id = j.at("id").get<std::string>();
    s.image = j.at("image").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.options = j.at("options").get<std::vector<std::string>>();
    if (s.options.size() < 2) {
        throw Error(ErrorKind::dataset, "sample needs at least two options");
    }
    for (std::size_t i = 0; i < s.options.size(); ++i) {
        for (std::size_t k = i + 1; k < s.options.size(); ++k) {
            if (s.options[i] == s.options[k]) {
                throw Error(ErrorKind::dataset, "duplicate options in sample");
            }
        }
    }
    const std::string answer = j.at("answer").get<std::string>();
    if (answer.size() != 1 || answer[0] < 'A' ||
        answer[0] >= static_cast<char>('A' + s.options.size())) {
        throw Error(ErrorKind::dataset, "answer letter out of range");
    }
    s.answer_index = answer[0] - 'A';
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) {
        throw Error(ErrorKind::dataset,
                    "unknown category: " + j.at("category").get<std::string>());
    }
    s.category = *cat;
    if (j.contains("target_objects")) {
        s.target_objects = j["target_objects"].get<std::vector<std::string>>();
    }
    if (j.contains("target_bbox") && !j["target_bbox"].is_null()) {
        const json& b = j["target_bbox"];
        s.target_bbox = Region{b.at("x").get<int>(), b.at("y").get<int>(),
                               b.at("w").get<int>(), b.at("h").get<int>()};
    }
    return s;
}

} // namespace

DatasetLoad load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::dataset, "cannot read dataset: " + path);
    DatasetLoad out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        try {
            out.samples.push_back(sample_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            out.line_errors.push_back("line " + std::to_string(line_no) + ": " +
                                      e.what());
        }
    }
    return out;
}

std::string sample_to_json_line(const BenchmarkSample& s) {
    json j;
    j["id"] = s.id;
    j["image"] = s.image;
    j["question"] = s.question;
    j["options"] = s.options;
    j["answer"] = std::string(1, static_cast<char>('A' + s.answer_index));
    j["category"] = category_name(s.category);
    if (!s.target_objects.empty()) j["target_objects"] = s.target_objects;
    if (s.target_bbox) {
        j["target_bbox"] = {{"x", s.target_bbox->x},
                            {"y", s.target_bbox->y},
                            {"w", s.target_bbox->w},
                            {"h", s.target_bbox->h}};
    }
    return j.dump();
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<std::vector<std::string>> cyclic_permutations(
    const std::vector<std::string>& options) {
    const std::size_t n = options.size();
    if (n < 2) {
        throw std::invalid_argument("cyclic permutations need >= 2 options");
    }
    std::vector<std::vector<std::string>> out(n,
                                              std::vector<std::string>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            out[r][(i + r) % n] = options[i];
        }
    }
    return out;
}

std::optional<int> parse_choice(const std::string& model_output,
                                const std::vector<std::string>& options) {
    const int n = static_cast<int>(options.size());
    const char max_letter = static_cast<char>('A' + n - 1);

    const auto trimmed_single = [&model_output]() -> std::optional<char> {
        const auto a = model_output.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return std::nullopt;
        const auto b = model_output.find_last_not_of(" \t\r\n");
        if (b != a) return std::nullopt;
        return model_output[a];
    }();

    // standalone answer letter; lone lowercase letters only count when the
    // whole reply is that letter (an article "a" is not an answer)
    for (std::size_t i = 0; i < model_output.size(); ++i) {
        const char c = model_output[i];
        const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (upper < 'A' || upper > max_letter) continue;
        const bool left_ok =
            i == 0 || !std::isalnum(static_cast<unsigned char>(model_output[i - 1]));
        const bool right_ok =
            i + 1 >= model_output.size() ||
            !std::isalnum(static_cast<unsigned char>(model_output[i + 1]));
        if (!left_ok || !right_ok) continue;
        if (std::isupper(static_cast<unsigned char>(c)) ||
            (trimmed_single && *trimmed_single == c)) {
            return upper - 'A';
        }
    }

    // unique option-text substring
    std::string lower_output = model_output;
    std::transform(lower_output.begin(), lower_output.end(),
                   lower_output.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    std::optional<int> match;
    for (int i = 0; i < n; ++i) {
        std::string opt = options[static_cast<std::size_t>(i)];
        std::transform(opt.begin(), opt.end(), opt.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (!opt.empty() && lower_output.find(opt) != std::string::npos) {
            if (match) return std::nullopt; // ambiguous
            match = i;
        }
    }
    return match;
}

AccuracyDetail sample_accuracy_detailed(const BenchmarkSample& sample,
                                        const RotationRunner& runner) {
    const auto rotations = cyclic_permutations(sample.options);
    const int n = static_cast<int>(rotations.size());
    AccuracyDetail detail;
    detail.rotations.resize(static_cast<std::size_t>(n));
    int correct = 0;
    for (int r = 0; r < n; ++r) {
        RotationOutcome& outcome = detail.rotations[static_cast<std::size_t>(r)];
        const int gold = (sample.answer_index + r) % n;
        try {
            const ChatResponse resp = runner(rotations[static_cast<std::size_t>(r)], r);
            outcome.ok = true;
            outcome.output = resp.text;
            if (resp.token_logprobs) {
                outcome.uncertainty = uncertainty(*resp.token_logprobs);
            }
            const auto parsed =
                parse_choice(resp.text, rotations[static_cast<std::size_t>(r)]);
            outcome.correct = parsed && *parsed == gold;
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.output = std::string("<error: ") + e.what() + ">";
            std::cerr << "[dc2] rotation " << r << " of sample " << sample.id
                      << " failed: " << e.what() << "\n";
        }
        if (outcome.correct) ++correct;
    }
    detail.accuracy = static_cast<double>(correct) / n;
    return detail;
}

double sample_accuracy(const BenchmarkSample& sample,
                       const RotationRunner& runner) {
    return sample_accuracy_detailed(sample, runner).accuracy;
}

int recall_at_k(const std::vector<std::string>& ranked_names,
                const std::vector<std::string>& targets, int k) {
    if (k < 1) throw std::invalid_argument("recall_at_k needs k >= 1");
    const int limit = std::min<int>(k, static_cast<int>(ranked_names.size()));
    for (int i = 0; i < limit; ++i) {
        for (const std::string& t : targets) {
            const auto nt = normalize_name(t);
            const auto nh = normalize_name(ranked_names[static_cast<std::size_t>(i)]);
            if (nt && nh && *nt == *nh) return 1;
        }
    }
    return 0;
}

double miou(const std::vector<Region>& pred, const Region& gt) {
    double best = 0.0;
    for (const Region& p : pred) best = std::max(best, iou(p, gt));
    return best;
}

std::optional<double> uncertainty(const std::vector<double>& token_logprobs) {
    if (token_logprobs.empty()) return std::nullopt;
    const double mean =
        std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0) /
        static_cast<double>(token_logprobs.size());
    return 1.0 - std::exp(mean);
}

double mg(double s_v, double s_wv) { return s_v - s_wv; }

double ml(double s_wv, double s_t) { return std::max(0.0, s_wv - s_t); }

// ---------------------------------------------------------------------------
// Runners

namespace {

std::string resolve_image_path(const std::string& image,
                               const std::string& dataset_dir) {
    const std::filesystem::path p(image);
    if (p.is_absolute() || dataset_dir.empty()) return image;
    return (std::filesystem::path(dataset_dir) / p).string();
}

} // namespace

Dc2SampleRunner::Dc2SampleRunner(Backend& backend, PipelineConfig cfg,
                                 PromptSet prompts)
    : backend_(backend), cfg_(std::move(cfg)), prompts_(std::move(prompts)) {}

SampleRunResult Dc2SampleRunner::run(const BenchmarkSample& sample,
                                     const std::string& dataset_dir) {
    const Image image =
        load_image(resolve_image_path(sample.image, dataset_dir));
    MemoryBuild build =
        build_memory(image, sample.id, backend_, cfg_, prompts_);

    ConquerContext ctx{backend_,         prompts_,        cfg_.model,
                      cfg_.temperature, cfg_.patch_size, sample.id};
    const std::vector<RetrievalHit> hits =
        retrieve(build.memory, sample.question, cfg_.alpha);
    const std::string auxiliary =
        describe_hits(ctx, image, sample.question, hits, cfg_.top_k);

    SampleRunResult result;
    for (const RetrievalHit& h : hits) {
        if (std::find(result.hit_names.begin(), result.hit_names.end(),
                      h.name) == result.hit_names.end()) {
            result.hit_names.push_back(h.name);
        }
        result.hit_regions.push_back(h.region);
    }
    result.detail = sample_accuracy_detailed(
        sample, [&](const std::vector<std::string>& rotated, int) {
            return answer(ctx, image, sample.question,
                          build_options_block(rotated), auxiliary);
        });
    return result;
}

BaselineSampleRunner::BaselineSampleRunner(Backend& backend, PipelineConfig cfg,
                                           PromptSet prompts, bool attach_image,
                                           bool text_only)
    : backend_(backend), cfg_(std::move(cfg)), prompts_(std::move(prompts)),
      attach_image_(attach_image), text_only_(text_only) {}

std::string BaselineSampleRunner::kind() const {
    if (text_only_) return "text-only";
    return attach_image_ ? "baseline" : "no-image";
}

SampleRunResult BaselineSampleRunner::run(const BenchmarkSample& sample,
                                          const std::string& dataset_dir) {
    std::optional<Image> image;
    if (attach_image_) {
        image = load_image(resolve_image_path(sample.image, dataset_dir));
    }
    ConquerContext ctx{backend_,         prompts_,        cfg_.model,
                      cfg_.temperature, cfg_.patch_size, sample.id};
    if (text_only_ && !cfg_.text_model.empty()) ctx.model = cfg_.text_model;

    SampleRunResult result;
    result.detail = sample_accuracy_detailed(
        sample, [&](const std::vector<std::string>& rotated, int) {
            if (image) {
                return answer(ctx, *image, sample.question,
                              build_options_block(rotated), "");
            }
            ChatRequest req;
            req.model = ctx.model;
            req.user_text = compose_answer_text(
                sample.question, build_options_block(rotated), "");
            req.temperature = ctx.temperature;
            req.want_logprobs = true;
            req.meta.image_id = ctx.image_id;
            return ctx.backend.chat(req);
        });
    return result;
}

// ---------------------------------------------------------------------------
// Harness

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
}

} // namespace

EvalReport evaluate(const std::string& dataset_path, SampleRunner& runner,
                    const PipelineConfig& cfg,
                    const std::function<std::uint64_t()>& call_counter) {
    const DatasetLoad load = load_dataset(dataset_path);
    const std::string dataset_dir =
        std::filesystem::path(dataset_path).parent_path().string();

    EvalReport report;
    report.runner = runner.kind();
    report.dataset = dataset_path;
    report.config = cfg;

    const std::uint64_t calls_before = call_counter ? call_counter() : 0;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<SampleRow> rows(load.samples.size());
    const int jobs = std::max(1, cfg.jobs);
    std::size_t next = 0;
    while (next < load.samples.size()) {
        const std::size_t batch =
            std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                  load.samples.size() - next);
        std::vector<std::future<SampleRow>> futures;
        futures.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t idx = next + b;
            futures.push_back(std::async(std::launch::async, [&, idx]() {
                const BenchmarkSample& sample = load.samples[idx];
                SampleRow row;
                row.id = sample.id;
                row.category = category_name(sample.category);
                row.rotations = static_cast<int>(sample.options.size());
                try {
                    const SampleRunResult res = runner.run(sample, dataset_dir);
                    row.accuracy = res.detail.accuracy;
                    for (const RotationOutcome& ro : res.detail.rotations) {
                        if (ro.correct) ++row.correct;
                    }
                    std::vector<double> uncertainties;
                    for (const RotationOutcome& ro : res.detail.rotations) {
                        if (ro.uncertainty) uncertainties.push_back(*ro.uncertainty);
                    }
                    row.uncertainty_value = mean_of(uncertainties);
                    if (!sample.target_objects.empty() &&
                        runner.kind() == "dc2") {
                        row.recall2 = recall_at_k(res.hit_names,
                                                  sample.target_objects, 2);
                    }
                    if (sample.target_bbox && runner.kind() == "dc2") {
                        row.miou_value = miou(res.hit_regions, *sample.target_bbox);
                    }
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                    row.accuracy = 0.0;
                    std::cerr << "[dc2] sample " << sample.id
                              << " failed: " << e.what() << "\n";
                }
                return row;
            }));
        }
        for (std::size_t b = 0; b < batch; ++b) {
            rows[next + b] = futures[b].get();
        }
        next += batch;
    }

    const auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds =
        std::chrono::duration<double>(t1 - t0).count();
    if (call_counter) report.backend_calls = call_counter() - calls_before;

    // unreadable lines count as failed zero-scored samples
    for (const std::string& err : load.line_errors) {
        SampleRow row;
        row.id = "<unreadable:" + err.substr(0, err.find(':')) + ">";
        row.category = "unknown";
        row.failed = true;
        row.error = err;
        rows.push_back(row);
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const SampleRow& a, const SampleRow& b) {
                         return a.id < b.id;
                     });

    report.n_samples = static_cast<int>(rows.size());
    double acc_sum = 0.0;
    std::map<std::string, std::pair<double, int>> cat_sums;
    double fsp_sum = 0.0, fcp_sum = 0.0;
    int fsp_n = 0, fcp_n = 0, ok_samples = 0;
    std::vector<double> uncertainties, recalls, mious;
    for (const SampleRow& row : rows) {
        acc_sum += row.accuracy;
        if (row.failed) {
            ++report.n_failed;
        } else {
            ++ok_samples;
        }
        if (const auto cat = parse_category(row.category)) {
            auto& [sum, count] = cat_sums[row.category];
            sum += row.accuracy;
            ++count;
            if (is_fsp(*cat)) {
                fsp_sum += row.accuracy;
                ++fsp_n;
            } else {
                fcp_sum += row.accuracy;
                ++fcp_n;
            }
        }
        if (row.uncertainty_value) uncertainties.push_back(*row.uncertainty_value);
        if (row.recall2) recalls.push_back(*row.recall2);
        if (row.miou_value) mious.push_back(*row.miou_value);
    }
    report.overall_acc = rows.empty() ? 0.0 : acc_sum / static_cast<double>(rows.size());
    if (fsp_n > 0) report.fsp_acc = fsp_sum / fsp_n;
    if (fcp_n > 0) report.fcp_acc = fcp_sum / fcp_n;
    for (const auto& [name, sum_count] : cat_sums) {
        report.per_category[name] = sum_count.first / sum_count.second;
    }
    report.mean_uncertainty = mean_of(uncertainties);
    report.recall_at_2 = mean_of(recalls);
    report.miou_mean = mean_of(mious);
    report.throughput_samples_per_minute =
        report.wall_seconds > 0.0
            ? ok_samples * 60.0 / report.wall_seconds
            : 0.0;
    report.rows = std::move(rows);
    return report;
}

std::string EvalReport::to_json_string() const {
    json j;
    j["schema"] = schema;
    j["runner"] = runner;
    j["dataset"] = dataset;
    j["config"] = json::parse(config_to_json_string(config));
    j["n_samples"] = n_samples;
    j["n_failed"] = n_failed;
    j["overall_acc"] = overall_acc;
    j["fsp_acc"] = fsp_acc ? json(*fsp_acc) : json(nullptr);
    j["fcp_acc"] = fcp_acc ? json(*fcp_acc) : json(nullptr);
    j["per_category"] = per_category;
    j["throughput_samples_per_minute"] = throughput_samples_per_minute;
    j["wall_seconds"] = wall_seconds;
    j["mean_uncertainty"] =
        mean_uncertainty ? json(*mean_uncertainty) : json(nullptr);
    j["recall_at_2"] = recall_at_2 ? json(*recall_at_2) : json(nullptr);
    j["miou"] = miou_mean ? json(*miou_mean) : json(nullptr);
    j["backend_calls"] = backend_calls;
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "id,category,failed,accuracy,correct,rotations,recall_at_2,miou,"
           "uncertainty\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        std::ostringstream ss;
        ss << *v;
        return ss.str();
    };
    for (const SampleRow& row : rows) {
        out << row.id << ',' << row.category << ',' << (row.failed ? 1 : 0)
            << ',' << row.accuracy << ',' << row.correct << ',' << row.rotations
            << ',' << opt(row.recall2) << ',' << opt(row.miou_value) << ','
            << opt(row.uncertainty_value) << '\n';
    }
    return out.str();
}

std::vector<SweepRow> throughput_sweep(const std::string& dataset_path,
                                       const std::vector<double>& thetas,
                                       const PipelineConfig& base_cfg) {
    if (base_cfg.backend != "mock") {
        throw Error(ErrorKind::usage,
                    "throughput sweep requires the mock backend");
    }
    std::vector<SweepRow> out;
    for (const double theta : thetas) {
        PipelineConfig cfg = base_cfg;
        cfg.theta = theta;
        MockBackend mock(load_scenes(cfg.mock_scene));
        mock.set_latency_ms(cfg.mock_latency_ms);
        CountingBackend counting(mock);
        Dc2SampleRunner runner(counting, cfg, prompts_for_config(cfg));
        const EvalReport report =
            evaluate(dataset_path, runner, cfg,
                     [&counting]() { return counting.calls(); });
        out.push_back(SweepRow{theta, report.throughput_samples_per_minute,
                               report.overall_acc, report.backend_calls});
    }
    return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "theta,throughput_samples_per_minute,accuracy,backend_calls\n";
    for (const SweepRow& r : rows) {
        out << r.theta << ',' << r.throughput << ',' << r.accuracy << ','
            << r.backend_calls << '\n';
    }
    return out.str();
}

} // namespace dc2
