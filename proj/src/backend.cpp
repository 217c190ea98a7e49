#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "dc2/backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <cstring>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dc2/error.hpp"
#include "dc2/image.hpp"
#include "dc2/prompts.hpp"

namespace dc2 {

using nlohmann::json;

namespace {

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Case-insensitive whole-word substring search.
bool contains_word(const std::string& haystack_lower,
                   const std::string& needle_lower) {
    std::size_t pos = 0;
    while ((pos = haystack_lower.find(needle_lower, pos)) !=
           std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(haystack_lower[pos - 1]);
        const std::size_t end = pos + needle_lower.size();
        const bool right_ok =
            end >= haystack_lower.size() || !is_word_char(haystack_lower[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

} // namespace

std::string cache_key(const ChatRequest& req) {
    std::string buf;
    auto field = [&buf](const std::string& s) {
        append_u64(buf, s.size());
        buf += s;
    };
    field(req.model);
    if (req.system) {
        buf.push_back('\x01');
        field(*req.system);
    } else {
        buf.push_back('\x00');
    }
    field(req.user_text);
    if (req.image_png) {
        buf.push_back('\x01');
        append_u64(buf, req.image_png->size());
        buf.append(reinterpret_cast<const char*>(req.image_png->data()),
                   req.image_png->size());
    } else {
        buf.push_back('\x00');
    }
    char temp[64];
    std::snprintf(temp, sizeof(temp), "%.17g", req.temperature);
    field(temp);
    buf.push_back(req.want_logprobs ? '\x01' : '\x00');

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(buf.data(), buf.size(), digest, &len, EVP_sha256(), nullptr);
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene serialization

std::string scene_to_json(const std::vector<MockScene>& scenes) {
    json root;
    root["scenes"] = json::array();
    for (const MockScene& s : scenes) {
        json js;
        js["id"] = s.id;
        js["canvas"] = {{"w", s.canvas_w}, {"h", s.canvas_h}};
        js["background"] = {s.background[0], s.background[1], s.background[2]};
        js["min_overlap_fraction"] = s.min_overlap_fraction;
        js["min_visible_px"] = s.min_visible_px;
        js["objects"] = json::array();
        for (const MockObject& o : s.objects) {
            js["objects"].push_back(
                {{"name", o.name},
                 {"attribute", o.attribute},
                 {"region",
                  {{"x", o.region.x}, {"y", o.region.y}, {"w", o.region.w}, {"h", o.region.h}}},
                 {"color", {o.color[0], o.color[1], o.color[2]}}});
        }
        root["scenes"].push_back(std::move(js));
    }
    return root.dump(2);
}

std::vector<MockScene> scenes_from_json(const std::string& text) {
    json root = json::parse(text);
    std::vector<MockScene> out;
    for (const json& js : root.at("scenes")) {
        MockScene s;
        s.id = js.at("id").get<std::string>();
        s.canvas_w = js.at("canvas").at("w").get<int>();
        s.canvas_h = js.at("canvas").at("h").get<int>();
        if (js.contains("background")) {
            for (int i = 0; i < 3; ++i) {
                s.background[static_cast<std::size_t>(i)] =
                    js["background"][static_cast<std::size_t>(i)].get<std::uint8_t>();
            }
        }
        s.min_overlap_fraction =
            js.value("min_overlap_fraction", s.min_overlap_fraction);
        s.min_visible_px = js.value("min_visible_px", s.min_visible_px);
        for (const json& jo : js.at("objects")) {
            MockObject o;
            o.name = jo.at("name").get<std::string>();
            o.attribute = jo.at("attribute").get<std::string>();
            o.region = Region{jo.at("region").at("x").get<int>(),
                              jo.at("region").at("y").get<int>(),
                              jo.at("region").at("w").get<int>(),
                              jo.at("region").at("h").get<int>()};
            if (jo.contains("color")) {
                for (int i = 0; i < 3; ++i) {
                    o.color[static_cast<std::size_t>(i)] =
                        jo["color"][static_cast<std::size_t>(i)].get<std::uint8_t>();
                }
            }
            s.objects.push_back(std::move(o));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<MockScene> load_scenes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::usage, "cannot read scene file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return scenes_from_json(ss.str());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::usage,
                    "invalid scene file " + path + ": " + e.what());
    }
}

void save_scenes(const std::vector<MockScene>& scenes,
                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::usage, "cannot write scene file: " + path);
    out << scene_to_json(scenes);
}

std::string position_bucket(const Region& r, int canvas_w, int canvas_h) {
    const double cx = r.x + r.w / 2.0;
    const double cy = r.y + r.h / 2.0;
    const int col = cx < canvas_w / 3.0 ? 0 : (cx < 2.0 * canvas_w / 3.0 ? 1 : 2);
    const int row = cy < canvas_h / 3.0 ? 0 : (cy < 2.0 * canvas_h / 3.0 ? 1 : 2);
    if (row == 1 && col == 1) return "center";
    static const char* rows[] = {"upper", "middle", "lower"};
    static const char* cols[] = {"left", "center", "right"};
    return std::string(rows[row]) + " " + cols[col];
}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(std::vector<MockScene> scenes) {
    for (MockScene& s : scenes) add_scene(std::move(s));
}

void MockBackend::add_scene(MockScene scene) {
    std::string id = scene.id;
    scenes_.emplace(std::move(id), std::move(scene));
}

const MockScene* MockBackend::scene_for(const std::string& image_id) const {
    const auto it = scenes_.find(image_id);
    if (it != scenes_.end()) return &it->second;
    if (scenes_.size() == 1) return &scenes_.begin()->second;
    return nullptr;
}

std::vector<const MockObject*> MockBackend::visible_objects(
    const ChatRequest& req) const {
    std::vector<const MockObject*> out;
    if (!req.image_png) return out;
    const MockScene* scene = scene_for(req.meta.image_id);
    if (scene == nullptr) return out;
    const int attached_longest = std::max(req.meta.attached_w, req.meta.attached_h);
    for (const MockObject& o : scene->objects) {
        bool seen = false;
        for (const Region& g : req.meta.source_regions) {
            const std::int64_t inter = intersection_area(o.region, g);
            if (inter <= 0) continue;
            const double frac =
                static_cast<double>(inter) / static_cast<double>(o.region.area());
            if (frac <= scene->min_overlap_fraction &&
                scene->min_overlap_fraction > 0.0) {
                continue;
            }
            // rendered size of the visible part after the downsample to the
            // attached raster; tiny renders are unresolvable
            const int g_longest = std::max(g.w, g.h);
            const double scale =
                g_longest > 0 && attached_longest > 0
                    ? static_cast<double>(attached_longest) / g_longest
                    : 0.0;
            const int ix0 = std::max(o.region.x, g.x);
            const int iy0 = std::max(o.region.y, g.y);
            const int ix1 = std::min(o.region.x + o.region.w, g.x + g.w);
            const int iy1 = std::min(o.region.y + o.region.h, g.y + g.h);
            const double rendered =
                std::min((ix1 - ix0) * scale, (iy1 - iy0) * scale);
            if (rendered >= scene->min_visible_px) {
                seen = true;
                break;
            }
        }
        if (seen) out.push_back(&o);
    }
    return out;
}

namespace {

struct ParsedOptions {
    std::string question;
    std::vector<std::string> options;
};

ParsedOptions parse_options_block(const std::string& head) {
    ParsedOptions out;
    std::istringstream in(head);
    std::string line;
    bool in_options = false;
    char expected = 'A';
    while (std::getline(in, line)) {
        if (line.size() >= 3 && line[0] == expected && line[1] == '.' &&
            line[2] == ' ') {
            out.options.push_back(line.substr(3));
            ++expected;
            in_options = true;
        } else if (!in_options) {
            if (!out.question.empty()) out.question += "\n";
            out.question += line;
        }
    }
    return out;
}

struct ObjectFact {
    const MockObject* object = nullptr;
    bool located = false;   // bucket known (seen in image or in notes)
    std::string bucket;
    bool attribute_known = false;
};

std::string letter_reply(std::size_t index) {
    std::string s = "The answer is ";
    s += static_cast<char>('A' + index);
    s += ".";
    return s;
}

} // namespace

ChatResponse MockBackend::chat(const ChatRequest& req) {
    calls_.fetch_add(1);
    if (recording_) {
        std::lock_guard<std::mutex> lock(mu_);
        transcript_.push_back(req);
    }
    if (latency_ms_ > 0.0) {
        std::this_thread::sleep_for(
            std::chrono::duration<double, std::milli>(latency_ms_));
    }

    const PromptSet prompts = default_prompts();
    const MockScene* scene = scene_for(req.meta.image_id);
    std::string reply;

    const bool is_extraction =
        req.system && *req.system == prompts.extraction_system;
    const bool is_non_leaf =
        req.user_text.rfind("Give you patch captions", 0) == 0;
    const bool is_answer =
        req.user_text.find(kOptionsInstruction) != std::string::npos;
    const bool is_describe =
        req.user_text.find("You should provide more information to help you "
                           "answer the question") != std::string::npos &&
        !is_answer;

    if (is_extraction) {
        reply = extraction_reply(req, scene);
    } else if (is_non_leaf) {
        reply = non_leaf_reply(req, scene);
    } else if (is_answer) {
        reply = answer_reply(req, scene);
    } else if (is_describe) {
        reply = describe_reply(req, scene);
    } else if (const std::size_t sep = req.user_text.find(kEvidenceSeparator);
               sep != std::string::npos) {
        // free-form question with auxiliary notes: relay the notes
        reply = req.user_text.substr(sep + std::strlen(kEvidenceSeparator));
    } else {
        reply = caption_reply(req, scene);
    }

    ChatResponse resp;
    resp.text = reply;
    if (req.want_logprobs) {
        std::size_t tokens = 0;
        std::istringstream in(reply);
        std::string tok;
        while (in >> tok) ++tokens;
        resp.token_logprobs = std::vector<double>(std::max<std::size_t>(tokens, 1), 0.0);
    }
    return resp;
}

std::vector<ChatRequest> MockBackend::transcript() const {
    std::lock_guard<std::mutex> lock(mu_);
    return transcript_;
}

void MockBackend::clear_transcript() {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.clear();
}

std::string MockBackend::caption_reply(const ChatRequest& req,
                                       const MockScene* scene) const {
    (void)scene;
    const auto visible = visible_objects(req);
    if (visible.empty()) return "An empty region.";
    std::string out;
    for (const MockObject* o : visible) {
        if (!out.empty()) out += " ";
        out += "There is a " + o->attribute + " " + o->name + ".";
    }
    return out;
}

std::string MockBackend::non_leaf_reply(const ChatRequest& req,
                                        const MockScene* scene) const {
    if (scene == nullptr) return "An empty region.";
    const std::string marker = "Patch Captions:\n";
    const std::size_t pos = req.user_text.find(marker);
    const std::string body =
        pos == std::string::npos ? req.user_text
                                 : req.user_text.substr(pos + marker.size());
    const std::string lower = to_lower(body);
    // deduplicated union of the objects the child captions mention
    std::string out;
    for (const MockObject& o : scene->objects) {
        if (contains_word(lower, to_lower(o.name))) {
            if (!out.empty()) out += " ";
            out += "There is a " + o.attribute + " " + o.name + ".";
        }
    }
    return out.empty() ? "An empty region." : out;
}

std::string MockBackend::extraction_reply(const ChatRequest& req,
                                          const MockScene* scene) const {
    std::string sentence;
    const std::string marker = "Sentence: \"";
    const std::size_t start = req.user_text.rfind(marker);
    if (start != std::string::npos) {
        const std::size_t from = start + marker.size();
        const std::size_t end = req.user_text.rfind('"');
        if (end != std::string::npos && end > from) {
            sentence = req.user_text.substr(from, end - from);
        }
    }
    const std::string lower = to_lower(sentence);
    json list = json::array();
    if (scene != nullptr) {
        for (const MockObject& o : scene->objects) {
            const std::string name = to_lower(o.name);
            if (contains_word(lower, name) &&
                std::find(list.begin(), list.end(), json(name)) == list.end()) {
                list.push_back(name);
            }
        }
    }
    json out;
    out["object_list"] = list;
    return out.dump();
}

std::string MockBackend::describe_reply(const ChatRequest& req,
                                        const MockScene* scene) const {
    const auto visible = visible_objects(req);
    if (visible.empty() || scene == nullptr) return "NONE";
    std::string out;
    for (const MockObject* o : visible) {
        if (!out.empty()) out += " ";
        out += "There is a " + o->attribute + " " + o->name + " in the " +
               position_bucket(o->region, scene->canvas_w, scene->canvas_h) +
               " of the image.";
    }
    return out;
}

std::string MockBackend::answer_reply(const ChatRequest& req,
                                      const MockScene* scene) const {
    if (scene == nullptr) return "I cannot tell.";

    std::string head = req.user_text;
    std::string notes;
    const std::size_t sep = req.user_text.find(kEvidenceSeparator);
    if (sep != std::string::npos) {
        head = req.user_text.substr(0, sep);
        notes = req.user_text.substr(sep + std::strlen(kEvidenceSeparator));
    }
    const ParsedOptions parsed = parse_options_block(head);
    if (parsed.options.empty()) return "I cannot tell.";
    const std::size_t n = parsed.options.size();
    const std::string question_lower = to_lower(parsed.question);
    const std::string notes_lower = to_lower(notes);

    // targets in question order
    std::vector<ObjectFact> targets;
    {
        std::vector<std::pair<std::size_t, const MockObject*>> found;
        for (const MockObject& o : scene->objects) {
            const std::string name = to_lower(o.name);
            const std::size_t pos = question_lower.find(name);
            if (pos != std::string::npos &&
                contains_word(question_lower, name)) {
                found.emplace_back(pos, &o);
            }
        }
        std::sort(found.begin(), found.end());
        for (const auto& [pos, obj] : found) {
            (void)pos;
            targets.push_back(ObjectFact{obj, false, "", false});
        }
    }
    if (targets.empty()) return "I cannot tell.";

    // gather evidence: directly resolvable in the attached raster, or
    // documented in the auxiliary notes
    const auto visible = visible_objects(req);
    for (ObjectFact& fact : targets) {
        const bool in_image =
            std::find(visible.begin(), visible.end(), fact.object) !=
            visible.end();
        if (in_image) {
            fact.located = true;
            fact.bucket = position_bucket(fact.object->region, scene->canvas_w,
                                          scene->canvas_h);
            fact.attribute_known = true;
            continue;
        }
        const std::string mention =
            to_lower(fact.object->attribute + " " + fact.object->name);
        if (contains_word(notes_lower, mention)) {
            fact.attribute_known = true;
            static const char* rows[] = {"upper", "middle", "lower"};
            static const char* cols[] = {"left", "center", "right"};
            for (const char* r : rows) {
                for (const char* c : cols) {
                    std::string bucket = std::string(r) + " " + c;
                    if (bucket == "middle center") bucket = "center";
                    if (notes_lower.find(mention + " in the " + bucket) !=
                        std::string::npos) {
                        fact.located = true;
                        fact.bucket = bucket;
                    }
                }
            }
        }
    }

    auto option_with = [&](const std::string& needle) -> std::optional<std::size_t> {
        std::optional<std::size_t> hit;
        for (std::size_t i = 0; i < n; ++i) {
            if (contains_word(to_lower(parsed.options[i]), to_lower(needle))) {
                if (hit) return std::nullopt; // ambiguous
                hit = i;
            }
        }
        return hit;
    };
    auto wrong_of = [&](std::optional<std::size_t> correct) {
        return letter_reply(correct ? (*correct + 1) % n : 0);
    };
    auto col_of = [](const std::string& bucket) {
        if (bucket.find("left") != std::string::npos) return 0;
        if (bucket.find("right") != std::string::npos) return 2;
        return 1;
    };
    auto row_of = [](const std::string& bucket) {
        if (bucket.find("upper") != std::string::npos) return 0;
        if (bucket.find("lower") != std::string::npos) return 2;
        return 1;
    };

    // fixture question kinds; see synthetic.cpp for the emitting templates
    if (question_lower.find("relative to") != std::string::npos &&
        targets.size() >= 2) {
        const MockObject& a = *targets[0].object;
        const MockObject& b = *targets[1].object;
        const double dax = a.region.x + a.region.w / 2.0;
        const double day = a.region.y + a.region.h / 2.0;
        const double dbx = b.region.x + b.region.w / 2.0;
        const double dby = b.region.y + b.region.h / 2.0;
        const std::string truth =
            std::abs(dax - dbx) >= std::abs(day - dby)
                ? (dax < dbx ? "left" : "right")
                : (day < dby ? "above" : "below");
        const auto correct = option_with(truth);
        if (targets[0].located && targets[1].located) {
            const int ca = col_of(targets[0].bucket);
            const int cb = col_of(targets[1].bucket);
            const int ra = row_of(targets[0].bucket);
            const int rb = row_of(targets[1].bucket);
            std::string derived;
            if (ca != cb) derived = ca < cb ? "left" : "right";
            else if (ra != rb) derived = ra < rb ? "above" : "below";
            if (!derived.empty()) {
                if (const auto idx = option_with(derived)) return letter_reply(*idx);
            }
        }
        return wrong_of(correct);
    }

    if (question_lower.find("same quadrant") != std::string::npos &&
        targets.size() >= 2) {
        const MockObject& a = *targets[0].object;
        const MockObject& b = *targets[1].object;
        const bool same_truth =
            ((a.region.x + a.region.w / 2.0) * 2 < scene->canvas_w) ==
                ((b.region.x + b.region.w / 2.0) * 2 < scene->canvas_w) &&
            ((a.region.y + a.region.h / 2.0) * 2 < scene->canvas_h) ==
                ((b.region.y + b.region.h / 2.0) * 2 < scene->canvas_h);
        const auto correct = option_with(same_truth ? "yes" : "no");
        if (targets[0].located && targets[1].located) {
            const int ca = col_of(targets[0].bucket);
            const int cb = col_of(targets[1].bucket);
            const int ra = row_of(targets[0].bucket);
            const int rb = row_of(targets[1].bucket);
            if (ca != 1 && cb != 1 && ra != 1 && rb != 1) {
                const bool same = ca == cb && ra == rb;
                if (const auto idx = option_with(same ? "yes" : "no")) {
                    return letter_reply(*idx);
                }
            }
        }
        return wrong_of(correct);
    }

    if (question_lower.find("closer to the top") != std::string::npos &&
        targets.size() >= 2) {
        const MockObject& a = *targets[0].object;
        const MockObject& b = *targets[1].object;
        const bool a_higher = a.region.y + a.region.h / 2.0 <
                              b.region.y + b.region.h / 2.0;
        const auto correct = option_with(a_higher ? a.name : b.name);
        if (targets[0].located && targets[1].located) {
            const int ra = row_of(targets[0].bucket);
            const int rb = row_of(targets[1].bucket);
            if (ra != rb) {
                const std::string& closer =
                    ra < rb ? targets[0].object->name : targets[1].object->name;
                if (const auto idx = option_with(closer)) return letter_reply(*idx);
            }
        }
        return wrong_of(correct);
    }

    // attribute-style question about a single object
    const ObjectFact& fact = targets[0];
    const auto correct = option_with(fact.object->attribute);
    if (fact.attribute_known && correct) return letter_reply(*correct);
    return wrong_of(correct);
}

// ---------------------------------------------------------------------------
// HttpBackend

struct HttpBackend::Impl {
    HttpBackendConfig cfg;
    std::string host_base;   // scheme://host[:port]
    std::string path_prefix; // e.g. /v1
    std::counting_semaphore<4096> slots;

    explicit Impl(HttpBackendConfig c)
        : cfg(std::move(c)), slots(std::max(1, cfg.concurrency)) {
        std::string base = cfg.api_base;
        while (!base.empty() && base.back() == '/') base.pop_back();
        const std::size_t scheme = base.find("://");
        const std::size_t host_start =
            scheme == std::string::npos ? 0 : scheme + 3;
        const std::size_t slash = base.find('/', host_start);
        if (slash == std::string::npos) {
            host_base = base;
        } else {
            host_base = base.substr(0, slash);
            path_prefix = base.substr(slash);
        }
        if (cfg.api_key.empty()) {
            if (const char* env = std::getenv("DC2_API_KEY")) cfg.api_key = env;
        }
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

ChatResponse HttpBackend::chat(const ChatRequest& req) {
    impl_->slots.acquire();
    struct Release {
        std::counting_semaphore<4096>& s;
        ~Release() { s.release(); }
    } release{impl_->slots};

    json messages = json::array();
    if (req.system) {
        messages.push_back({{"role", "system"}, {"content", *req.system}});
    }
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", req.user_text}});
    if (req.image_png) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url",
                "data:image/png;base64," + base64_encode(*req.image_png)}}}});
    }
    messages.push_back({{"role", "user"}, {"content", std::move(content)}});

    json body;
    body["model"] = req.model.empty() ? impl_->cfg.model : req.model;
    body["messages"] = std::move(messages);
    body["temperature"] = req.temperature;
    if (req.want_logprobs) body["logprobs"] = true;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!impl_->cfg.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->cfg.api_key);
    }
    const std::string path = impl_->path_prefix + "/chat/completions";

    std::string last_failure;
    for (int attempt = 0; attempt <= impl_->cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay =
                impl_->cfg.initial_backoff_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client cli(impl_->host_base);
        cli.set_connection_timeout(impl_->cfg.timeout_s, 0);
        cli.set_read_timeout(impl_->cfg.timeout_s, 0);
        auto res = cli.Post(path, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw Error(ErrorKind::backend,
                        "authentication failed (" + std::to_string(res->status) +
                            "): " + res->body);
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorKind::backend,
                        "endpoint rejected request (" +
                            std::to_string(res->status) + "): " + res->body);
        }
        try {
            const json j = json::parse(res->body);
            const json& choice = j.at("choices").at(0);
            ChatResponse out;
            const json& msg_content = choice.at("message").at("content");
            if (msg_content.is_string()) {
                out.text = msg_content.get<std::string>();
            } else if (msg_content.is_array()) {
                for (const json& part : msg_content) {
                    if (part.value("type", "") == "text") {
                        out.text += part.value("text", "");
                    }
                }
            }
            if (choice.contains("logprobs") && !choice["logprobs"].is_null() &&
                choice["logprobs"].contains("content")) {
                std::vector<double> lps;
                for (const json& tok : choice["logprobs"]["content"]) {
                    lps.push_back(tok.at("logprob").get<double>());
                }
                out.token_logprobs = std::move(lps);
            }
            return out;
        } catch (const json::exception& e) {
            throw Error(ErrorKind::backend,
                        std::string("malformed endpoint reply: ") + e.what() +
                            "; raw payload: " + res->body);
        }
    }
    throw Error(ErrorKind::backend,
                "retry budget exhausted after " +
                    std::to_string(impl_->cfg.max_retries + 1) +
                    " attempts; last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// CachingBackend

CachingBackend::CachingBackend(Backend& inner, std::string cache_dir)
    : inner_(inner), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
}

ChatResponse CachingBackend::chat(const ChatRequest& req) {
    const std::string key = cache_key(req);
    const std::filesystem::path file =
        std::filesystem::path(dir_) / (key + ".json");
    {
        std::ifstream in(file, std::ios::binary);
        if (in) {
            try {
                const json j = json::parse(in);
                ChatResponse out;
                out.text = j.at("text").get<std::string>();
                if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
                    out.token_logprobs =
                        j["token_logprobs"].get<std::vector<double>>();
                }
                hits_.fetch_add(1);
                return out;
            } catch (const json::exception&) {
                // corrupt entry: fall through and refresh it
            }
        }
    }
    misses_.fetch_add(1);
    const ChatResponse resp = inner_.chat(req);
    json j;
    j["text"] = resp.text;
    if (resp.token_logprobs) j["token_logprobs"] = *resp.token_logprobs;
    else j["token_logprobs"] = nullptr;
    {
        std::lock_guard<std::mutex> lock(write_mu_);
        const std::filesystem::path tmp =
            std::filesystem::path(dir_) / (key + ".tmp");
        std::ofstream out(tmp, std::ios::binary);
        out << j.dump();
        out.close();
        std::error_code ec;
        std::filesystem::rename(tmp, file, ec);
    }
    return resp;
}

} // namespace dc2
