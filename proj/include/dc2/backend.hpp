#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dc2/geometry.hpp"

namespace dc2 {

// Side information describing where an attached raster came from. The wire
// client ignores it and it is excluded from cache keys; the mock backend
// uses it to ground its replies in scene geometry.
struct RequestMeta {
    std::string image_id;
    std::vector<Region> source_regions;
    int attached_w = 0;
    int attached_h = 0;
};

struct ChatRequest {
    std::string model;
    std::optional<std::string> system;
    std::string user_text;
    std::optional<std::vector<std::uint8_t>> image_png;
    double temperature = 0.2;
    bool want_logprobs = false;
    RequestMeta meta;
};

struct ChatResponse {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;
};

// SHA-256 digest over (model, system, user_text, image bytes, temperature,
// want_logprobs). Stable across runs and platforms; meta is excluded.
std::string cache_key(const ChatRequest& request);

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Mock backend

struct MockObject {
    std::string name;
    std::string attribute;
    Region region;
    std::array<std::uint8_t, 3> color{0, 0, 0};
};

// Deterministic scene the mock grounds its replies in. An object is
// mentioned for a patch when its region overlaps one of the patch's source
// regions by more than min_overlap_fraction of the object's area AND its
// rendered extent in the attached raster is at least min_visible_px
// (modeling the detail loss of downsampling).
struct MockScene {
    std::string id;
    int canvas_w = 0;
    int canvas_h = 0;
    std::array<std::uint8_t, 3> background{228, 228, 224};
    double min_overlap_fraction = 0.0;
    int min_visible_px = 4;
    std::vector<MockObject> objects;
};

std::string scene_to_json(const std::vector<MockScene>& scenes);
std::vector<MockScene> scenes_from_json(const std::string& text);
std::vector<MockScene> load_scenes(const std::string& path);
void save_scenes(const std::vector<MockScene>& scenes, const std::string& path);

// 3x3 position bucket of a region's center, e.g. "upper left".
std::string position_bucket(const Region& r, int canvas_w, int canvas_h);

class MockBackend : public Backend {
public:
    MockBackend() = default;
    explicit MockBackend(std::vector<MockScene> scenes);

    void add_scene(MockScene scene);
    void set_latency_ms(double ms) { latency_ms_ = ms; }
    void set_recording(bool on) { recording_ = on; }

    ChatResponse chat(const ChatRequest& request) override;
    std::string name() const override { return "mock"; }

    std::uint64_t calls() const { return calls_.load(); }
    std::vector<ChatRequest> transcript() const;
    void clear_transcript();

private:
    const MockScene* scene_for(const std::string& image_id) const;
    std::vector<const MockObject*> visible_objects(const ChatRequest& req) const;
    std::string caption_reply(const ChatRequest& req, const MockScene* scene) const;
    std::string non_leaf_reply(const ChatRequest& req, const MockScene* scene) const;
    std::string extraction_reply(const ChatRequest& req, const MockScene* scene) const;
    std::string describe_reply(const ChatRequest& req, const MockScene* scene) const;
    std::string answer_reply(const ChatRequest& req, const MockScene* scene) const;

    std::map<std::string, MockScene> scenes_;
    double latency_ms_ = 0.0;
    bool recording_ = false;
    std::atomic<std::uint64_t> calls_{0};
    mutable std::mutex mu_;
    std::vector<ChatRequest> transcript_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend

struct HttpBackendConfig {
    std::string api_base = "http://localhost:8000/v1";
    std::string model = "local-model";
    std::string api_key;           // taken from DC2_API_KEY when empty
    int max_retries = 4;
    double initial_backoff_s = 0.5;
    int timeout_s = 120;
    int concurrency = 4;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    ChatResponse chat(const ChatRequest& request) override;
    std::string name() const override { return "http"; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Decorators

// Serves repeated requests from a directory of key -> response JSON files.
// Enabling it never changes pipeline outputs, only call counts.
class CachingBackend : public Backend {
public:
    CachingBackend(Backend& inner, std::string cache_dir);

    ChatResponse chat(const ChatRequest& request) override;
    std::string name() const override { return inner_.name() + "+cache"; }

    std::uint64_t hits() const { return hits_.load(); }
    std::uint64_t misses() const { return misses_.load(); }

private:
    Backend& inner_;
    std::string dir_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
    std::mutex write_mu_;
};

class CountingBackend : public Backend {
public:
    explicit CountingBackend(Backend& inner) : inner_(inner) {}

    ChatResponse chat(const ChatRequest& request) override {
        calls_.fetch_add(1);
        return inner_.chat(request);
    }
    std::string name() const override { return inner_.name(); }
    std::uint64_t calls() const { return calls_.load(); }
    void reset() { calls_.store(0); }

private:
    Backend& inner_;
    std::atomic<std::uint64_t> calls_{0};
};

} // namespace dc2
