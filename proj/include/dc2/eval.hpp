#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dc2/backend.hpp"
#include "dc2/config.hpp"
#include "dc2/geometry.hpp"
#include "dc2/prompts.hpp"

namespace dc2 {

enum class TaskCategory {
    fsp_attribute,
    fsp_ocr,
    fsp_visual_prompting,
    fcp_map,
    fcp_chart,
    fcp_spatial,
};

std::string category_name(TaskCategory c);
std::optional<TaskCategory> parse_category(const std::string& text);
bool is_fsp(TaskCategory c);

struct BenchmarkSample {
    std::string id;
    std::string image; // path, relative to the dataset file
    std::string question;
    std::vector<std::string> options;
    int answer_index = 0;
    TaskCategory category = TaskCategory::fsp_attribute;
    std::vector<std::string> target_objects;
    std::optional<Region> target_bbox;
};

struct DatasetLoad {
    std::vector<BenchmarkSample> samples;
    std::vector<std::string> line_errors; // unreadable lines, kept for the report
};

// JSON Lines, one sample per line. Unreadable lines are recorded, not fatal;
// an unreadable file is.
DatasetLoad load_dataset(const std::string& path);
std::string sample_to_json_line(const BenchmarkSample& sample);

// ---------------------------------------------------------------------------
// Metrics

// Rotation r maps original index i to position (i + r) mod N.
std::vector<std::vector<std::string>> cyclic_permutations(
    const std::vector<std::string>& options);

// Answer-extraction cascade: standalone letter token, then unique option
// substring, else abstain (nullopt). Returns the option index.
std::optional<int> parse_choice(const std::string& model_output,
                                const std::vector<std::string>& options);

struct RotationOutcome {
    bool ok = false;
    bool correct = false;
    std::string output;
    std::optional<double> uncertainty;
};

struct AccuracyDetail {
    double accuracy = 0.0;
    std::vector<RotationOutcome> rotations;
};

using RotationRunner = std::function<ChatResponse(
    const std::vector<std::string>& rotated_options, int rotation)>;

// Runs all N option rotations, scoring each 0/1 against the rotated gold
// letter; a runner failure scores that rotation 0.
AccuracyDetail sample_accuracy_detailed(const BenchmarkSample& sample,
                                        const RotationRunner& runner);
double sample_accuracy(const BenchmarkSample& sample,
                       const RotationRunner& runner);

// 1 iff any target name appears in the first k ranked hits.
int recall_at_k(const std::vector<std::string>& ranked_names,
                const std::vector<std::string>& targets, int k);

// IoU between gt and the best predicted region; 0 for no predictions.
double miou(const std::vector<Region>& pred, const Region& gt);

// 1 - exp(mean logprob); empty input is undefined.
std::optional<double> uncertainty(const std::vector<double>& token_logprobs);

double mg(double s_v, double s_wv);
double ml(double s_wv, double s_t);

// ---------------------------------------------------------------------------
// Runners

struct SampleRunResult {
    AccuracyDetail detail;
    std::vector<std::string> hit_names; // ranked, distinct (DC2 only)
    std::vector<Region> hit_regions;    // all retrieval hits (DC2 only)
};

class SampleRunner {
public:
    virtual ~SampleRunner() = default;
    virtual std::string kind() const = 0;
    virtual SampleRunResult run(const BenchmarkSample& sample,
                                const std::string& dataset_dir) = 0;
};

// Full divide/conquer/combine pipeline, one memory per sample, then the
// cyclic rotations over the final answer call.
class Dc2SampleRunner : public SampleRunner {
public:
    Dc2SampleRunner(Backend& backend, PipelineConfig cfg, PromptSet prompts);
    std::string kind() const override { return "dc2"; }
    SampleRunResult run(const BenchmarkSample& sample,
                        const std::string& dataset_dir) override;

private:
    Backend& backend_;
    PipelineConfig cfg_;
    PromptSet prompts_;
};

// Single-call runner; attach_image=false gives the no-visual-input runner
// used for MG, text_only additionally targets the text endpoint's model.
class BaselineSampleRunner : public SampleRunner {
public:
    BaselineSampleRunner(Backend& backend, PipelineConfig cfg,
                         PromptSet prompts, bool attach_image,
                         bool text_only = false);
    std::string kind() const override;
    SampleRunResult run(const BenchmarkSample& sample,
                        const std::string& dataset_dir) override;

private:
    Backend& backend_;
    PipelineConfig cfg_;
    PromptSet prompts_;
    bool attach_image_;
    bool text_only_;
};

// ---------------------------------------------------------------------------
// Harness

struct SampleRow {
    std::string id;
    std::string category;
    bool failed = false;
    std::string error;
    double accuracy = 0.0;
    int rotations = 0;
    int correct = 0;
    std::optional<double> recall2;
    std::optional<double> miou_value;
    std::optional<double> uncertainty_value;
};

struct EvalReport {
    std::string schema = "dc2-report/1";
    std::string runner;
    std::string dataset;
    PipelineConfig config;
    int n_samples = 0;
    int n_failed = 0;
    double overall_acc = 0.0;
    std::optional<double> fsp_acc;
    std::optional<double> fcp_acc;
    std::map<std::string, double> per_category;
    double throughput_samples_per_minute = 0.0;
    double wall_seconds = 0.0;
    std::optional<double> mean_uncertainty;
    std::optional<double> recall_at_2;
    std::optional<double> miou_mean;
    std::uint64_t backend_calls = 0;
    std::vector<SampleRow> rows; // sorted by sample id

    std::string to_json_string() const;
    std::string to_csv() const;
};

// Streams the dataset through the runner (jobs samples concurrently),
// aggregates cyclic accuracy per category and split, and measures
// wall-clock throughput in samples/minute over readable samples.
EvalReport evaluate(const std::string& dataset_path, SampleRunner& runner,
                    const PipelineConfig& cfg,
                    const std::function<std::uint64_t()>& call_counter = {});

struct SweepRow {
    double theta = 0.0;
    double throughput = 0.0;
    double accuracy = 0.0;
    std::uint64_t backend_calls = 0;
};

// Re-runs the DC2 evaluation for each theta against a fresh mock backend
// (per-call latency from the config) and reports the throughput/accuracy
// pairs plus backend call counts.
std::vector<SweepRow> throughput_sweep(const std::string& dataset_path,
                                       const std::vector<double>& thetas,
                                       const PipelineConfig& base_cfg);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

} // namespace dc2
