#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dc2/backend.hpp"
#include "dc2/error.hpp"
#include "dc2/image.hpp"
#include "dc2/prompts.hpp"

using namespace dc2;

namespace {

MockScene simple_scene() {
    MockScene scene;
    scene.id = "scene";
    scene.canvas_w = 1000;
    scene.canvas_h = 1000;
    scene.min_visible_px = 4;
    scene.objects.push_back(
        MockObject{"hydrant", "red", Region{100, 100, 40, 40}, {200, 0, 0}});
    scene.objects.push_back(
        MockObject{"bench", "green", Region{700, 700, 60, 40}, {0, 200, 0}});
    return scene;
}

ChatRequest patch_request(const std::string& image_id, const Region& region,
                          int attached, const std::string& text) {
    ChatRequest req;
    req.model = "m";
    req.user_text = text;
    req.image_png = std::vector<std::uint8_t>{1, 2, 3}; // presence only
    req.meta.image_id = image_id;
    req.meta.source_regions = {region};
    req.meta.attached_w = attached;
    req.meta.attached_h = attached;
    return req;
}

} // namespace

TEST_SUITE_BEGIN("backend");

TEST_CASE("cache_key separates every request field") {
    ChatRequest a;
    a.model = "m";
    a.user_text = "hello";
    a.temperature = 0.2;
    ChatRequest b = a;
    CHECK(cache_key(a) == cache_key(b));

    b.user_text = "hellO";
    CHECK(cache_key(a) != cache_key(b));

    b = a;
    b.image_png = std::vector<std::uint8_t>{9, 9};
    CHECK(cache_key(a) != cache_key(b));

    ChatRequest c = b;
    c.image_png = std::vector<std::uint8_t>{9, 8};
    CHECK(cache_key(b) != cache_key(c));

    b = a;
    b.temperature = 0.3;
    CHECK(cache_key(a) != cache_key(b));

    b = a;
    b.system = "sys";
    CHECK(cache_key(a) != cache_key(b));

    b = a;
    b.want_logprobs = true;
    CHECK(cache_key(a) != cache_key(b));

    // meta is excluded: same wire bytes, same key
    b = a;
    b.meta.image_id = "other";
    CHECK(cache_key(a) == cache_key(b));
}

TEST_CASE("mock captions name exactly the overlapping, resolvable objects") {
    MockBackend mock({simple_scene()});
    const PromptSet prompts = default_prompts();

    SUBCASE("patch over the hydrant") {
        const auto resp = mock.chat(
            patch_request("scene", Region{80, 80, 200, 200}, 200, prompts.leaf));
        CHECK(resp.text.find("red hydrant") != std::string::npos);
        CHECK(resp.text.find("bench") == std::string::npos);
    }
    SUBCASE("patch over empty canvas") {
        const auto resp = mock.chat(
            patch_request("scene", Region{400, 0, 200, 200}, 200, prompts.leaf));
        CHECK(resp.text == "An empty region.");
    }
    SUBCASE("patch over both objects") {
        const auto resp = mock.chat(
            patch_request("scene", Region{0, 0, 1000, 1000}, 1000, prompts.leaf));
        CHECK(resp.text.find("red hydrant") != std::string::npos);
        CHECK(resp.text.find("green bench") != std::string::npos);
    }
    SUBCASE("downsampling below the resolvability floor hides the object") {
        // 40px object over a 1000px region attached at 64px renders ~2.5px
        const auto resp = mock.chat(
            patch_request("scene", Region{0, 0, 1000, 1000}, 64, prompts.leaf));
        CHECK(resp.text == "An empty region.");
    }
    SUBCASE("overlap fraction gate") {
        MockScene gated = simple_scene();
        gated.id = "gated";
        gated.min_overlap_fraction = 0.5;
        MockBackend strict({gated});
        // only ~25% of the hydrant is inside the patch
        const auto resp = strict.chat(
            patch_request("gated", Region{0, 0, 120, 120}, 120, prompts.leaf));
        CHECK(resp.text == "An empty region.");
        const auto resp2 = strict.chat(
            patch_request("gated", Region{0, 0, 200, 200}, 200, prompts.leaf));
        CHECK(resp2.text.find("hydrant") != std::string::npos);
    }
}

TEST_CASE("mock is a pure function of the request") {
    MockBackend mock({simple_scene()});
    const auto req =
        patch_request("scene", Region{80, 80, 200, 200}, 200,
                      default_prompts().leaf);
    const auto a = mock.chat(req);
    const auto b = mock.chat(req);
    CHECK(a.text == b.text);
    CHECK(a.token_logprobs == b.token_logprobs);
}

TEST_CASE("mock non-leaf caption unions the child captions") {
    MockBackend mock({simple_scene()});
    const std::string prompt = render_non_leaf(
        default_prompts(),
        {"There is a red hydrant.", "An empty region.",
         "There is a red hydrant. There is a green bench."});
    ChatRequest req = patch_request("scene", Region{0, 0, 1000, 1000}, 336, prompt);
    const auto resp = mock.chat(req);
    CHECK(resp.text.find("red hydrant") != std::string::npos);
    CHECK(resp.text.find("green bench") != std::string::npos);
    // deduplicated: one mention each
    CHECK(resp.text.find("hydrant") == resp.text.rfind("hydrant"));
}

TEST_CASE("mock extraction returns scene nouns as an object_list") {
    MockScene scene = simple_scene();
    scene.objects.push_back(
        MockObject{"bus", "blue", Region{1, 1, 5, 5}, {0, 0, 255}});
    scene.objects.push_back(
        MockObject{"car", "gray", Region{10, 1, 5, 5}, {9, 9, 9}});
    scene.objects.push_back(
        MockObject{"truck", "white", Region{20, 1, 5, 5}, {5, 5, 5}});
    scene.objects.push_back(
        MockObject{"person", "tall", Region{30, 1, 5, 5}, {1, 1, 1}});
    MockBackend mock({scene});

    ChatRequest req;
    req.model = "m";
    req.system = default_prompts().extraction_system;
    req.user_text = render_extraction_user(
        default_prompts(),
        "The bus is surrounded by a few other vehicles, including a car and "
        "a truck, which are driving in the same direction as the bus. A "
        "person can be seen standing on the sidewalk, possibly waiting for "
        "the bus or observing the scene.");
    req.meta.image_id = "scene";
    const auto resp = mock.chat(req);
    const auto j = nlohmann::json::parse(resp.text);
    CHECK(j.at("object_list") ==
          nlohmann::json::array({"bus", "car", "truck", "person"}));
}

TEST_CASE("mock emits zero logprobs when asked") {
    MockBackend mock({simple_scene()});
    auto req = patch_request("scene", Region{80, 80, 200, 200}, 200,
                             default_prompts().leaf);
    req.want_logprobs = true;
    const auto resp = mock.chat(req);
    REQUIRE(resp.token_logprobs.has_value());
    CHECK(!resp.token_logprobs->empty());
    for (const double lp : *resp.token_logprobs) CHECK(lp == 0.0);
}

TEST_CASE("caching backend serves repeats without inner calls") {
    const auto dir = std::filesystem::temp_directory_path() / "dc2_cache_test";
    std::filesystem::remove_all(dir);

    MockBackend mock({simple_scene()});
    CountingBackend counted(mock);
    CachingBackend cached(counted, dir.string());

    auto req = patch_request("scene", Region{80, 80, 200, 200}, 200,
                             default_prompts().leaf);
    req.want_logprobs = true;
    const auto first = cached.chat(req);
    CHECK(counted.calls() == 1);
    const auto second = cached.chat(req);
    CHECK(counted.calls() == 1); // served from disk
    CHECK(second.text == first.text);
    CHECK(second.token_logprobs == first.token_logprobs);
    CHECK(cached.hits() == 1);
    CHECK(cached.misses() == 1);

    // a fresh instance reads the same directory
    CachingBackend reopened(counted, dir.string());
    CHECK(reopened.chat(req).text == first.text);
    CHECK(counted.calls() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("scene registry json round trip") {
    const std::vector<MockScene> scenes = {simple_scene()};
    const auto parsed = scenes_from_json(scene_to_json(scenes));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].id == "scene");
    REQUIRE(parsed[0].objects.size() == 2);
    CHECK(parsed[0].objects[0].name == "hydrant");
    CHECK(parsed[0].objects[0].region == Region{100, 100, 40, 40});
}

TEST_CASE("http backend against a local endpoint") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<int> flaky_remaining{0};
    std::string last_body;
    std::mutex mu;

    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    ++hits;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        last_body = req.body;
                    }
                    if (req.get_header_value("Authorization") !=
                        "Bearer secret") {
                        res.status = 401;
                        res.set_content("{\"error\":\"bad key\"}",
                                        "application/json");
                        return;
                    }
                    if (flaky_remaining.fetch_sub(1) > 0) {
                        res.status = 500;
                        res.set_content("try again", "text/plain");
                        return;
                    }
                    nlohmann::json reply = {
                        {"choices",
                         {{{"message", {{"role", "assistant"}, {"content", "pong"}}},
                           {"logprobs",
                            {{"content",
                              {{{"token", "po"}, {"logprob", -0.1}},
                               {{"token", "ng"}, {"logprob", -0.2}}}}}}}}}};
                    res.set_content(reply.dump(), "application/json");
                });

    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server]() { server.listen_after_bind(); });
    while (!server.is_running()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    HttpBackendConfig cfg;
    cfg.api_base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.api_key = "secret";
    cfg.max_retries = 3;
    cfg.initial_backoff_s = 0.01;
    cfg.timeout_s = 5;

    SUBCASE("round trip with logprobs and image payload") {
        HttpBackend backend(cfg);
        ChatRequest req;
        req.model = "test-model";
        req.system = "be brief";
        req.user_text = "ping";
        req.image_png = encode_png(Image(4, 4, 128));
        req.temperature = 0.2;
        req.want_logprobs = true;
        const auto resp = backend.chat(req);
        CHECK(resp.text == "pong");
        REQUIRE(resp.token_logprobs.has_value());
        CHECK(resp.token_logprobs->size() == 2);
        CHECK((*resp.token_logprobs)[0] == doctest::Approx(-0.1));

        const auto body = nlohmann::json::parse(last_body);
        CHECK(body["model"] == "test-model");
        CHECK(body["temperature"] == doctest::Approx(0.2));
        CHECK(body["logprobs"] == true);
        CHECK(body["messages"][0]["role"] == "system");
        const auto& content = body["messages"][1]["content"];
        CHECK(content[0]["type"] == "text");
        const std::string url = content[1]["image_url"]["url"];
        CHECK(url.rfind("data:image/png;base64,", 0) == 0);
    }

    SUBCASE("transient 500s are retried") {
        flaky_remaining = 2;
        HttpBackend backend(cfg);
        ChatRequest req;
        req.model = "test-model";
        req.user_text = "ping";
        const int before = hits;
        CHECK(backend.chat(req).text == "pong");
        CHECK(hits - before == 3);
    }

    SUBCASE("authentication failures are terminal, no retries") {
        HttpBackendConfig bad = cfg;
        bad.api_key = "wrong";
        HttpBackend backend(bad);
        ChatRequest req;
        req.model = "test-model";
        req.user_text = "ping";
        const int before = hits;
        CHECK_THROWS_AS(backend.chat(req), Error);
        CHECK(hits - before == 1);
    }

    SUBCASE("retry budget exhaustion is terminal") {
        flaky_remaining = 1000;
        HttpBackendConfig tight = cfg;
        tight.max_retries = 1;
        HttpBackend backend(tight);
        ChatRequest req;
        req.model = "test-model";
        req.user_text = "ping";
        try {
            backend.chat(req);
            FAIL("expected a backend error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::backend);
            CHECK(std::string(e.what()).find("retry budget") !=
                  std::string::npos);
        }
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("malformed endpoint reply carries the raw payload") {
    httplib::Server server;
    server.Post("/v1/chat/completions",
                [](const httplib::Request&, httplib::Response& res) {
                    res.set_content("{\"weird\": true}", "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&server]() { server.listen_after_bind(); });
    while (!server.is_running()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    HttpBackendConfig cfg;
    cfg.api_base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.api_key = "k";
    HttpBackend backend(cfg);
    ChatRequest req;
    req.model = "m";
    req.user_text = "hi";
    try {
        backend.chat(req);
        FAIL("expected a backend error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("malformed endpoint reply") !=
              std::string::npos);
        CHECK(std::string(e.what()).find("weird") != std::string::npos);
    }
    server.stop();
    t.join();
}

TEST_SUITE_END();
