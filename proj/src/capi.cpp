#include "btsupply.h"

#include "btsupply/config.hpp"
#include "btsupply/pipeline.hpp"
#include "btsupply/release_name.hpp"
#include "btsupply/title_match.hpp"

#include "json.hpp"

#include <cstring>
#include <string>

#if defined(__GNUC__)
#define BTS_EXPORT __attribute__((visibility("default")))
#else
#define BTS_EXPORT
#endif

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json parsed_to_json(const btsup::ParsedName& p) {
    json j = json::object();
    j["title"] = p.title;
    auto put_int = [&j](const char* key, const std::optional<int>& v) {
        if (v) j[key] = *v;
    };
    auto put_text = [&j](const char* key, const std::optional<std::string>& v) {
        if (v) j[key] = *v;
    };
    put_int("year", p.year);
    put_int("season", p.season);
    put_int("episode", p.episode);
    put_text("episode_title", p.episode_title);
    put_text("resolution", p.resolution);
    put_text("source_quality", p.source_quality);
    put_text("codec", p.codec);
    put_text("audio", p.audio);
    put_text("language", p.language);
    put_text("group", p.release_group);
    put_text("site", p.site);
    put_text("extension", p.container_extension);
    j["flags"] = json::array();
    for (const auto& f : p.flags) j["flags"].push_back(f);
    j["extras"] = json::array();
    for (const auto& [tok, pos] : p.extras) j["extras"].push_back({{"token", tok}, {"pos", pos}});
    return j;
}

} // namespace

struct bts_pipeline {
    btsup::Pipeline pipeline;
    std::string last_error;
};

struct bts_matcher {
    btsup::TitleIndex index;
    std::string last_error;
};

extern "C" {

BTS_EXPORT const char* bts_version(void) { return "0.1.0"; }

BTS_EXPORT const char* bts_last_error(void) { return g_last_error.c_str(); }

BTS_EXPORT void bts_string_free(char* s) { std::free(s); }

BTS_EXPORT bts_status bts_pipeline_open(const char* config_path, bts_pipeline** out) {
    if (!out) return BTS_CONFIG_ERROR;
    *out = nullptr;
    try {
        btsup::Config cfg =
            config_path ? btsup::Config::parse_file(config_path) : btsup::Config{};
        *out = new bts_pipeline{btsup::Pipeline(std::move(cfg)), {}};
        return BTS_OK;
    } catch (const btsup::ConfigError& e) {
        g_last_error = e.what();
        return BTS_CONFIG_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT bts_status bts_pipeline_open_text(const char* config_text, bts_pipeline** out) {
    if (!out) return BTS_CONFIG_ERROR;
    *out = nullptr;
    try {
        btsup::Config cfg = btsup::Config::parse_text(config_text ? config_text : "");
        *out = new bts_pipeline{btsup::Pipeline(std::move(cfg)), {}};
        return BTS_OK;
    } catch (const btsup::ConfigError& e) {
        g_last_error = e.what();
        return BTS_CONFIG_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT void bts_pipeline_close(bts_pipeline* p) { delete p; }

BTS_EXPORT bts_status bts_pipeline_set(bts_pipeline* p, const char* key, const char* value) {
    if (!p) return BTS_INVALID_HANDLE;
    if (!key || !value) {
        p->last_error = "key and value must be non-null";
        return BTS_CONFIG_ERROR;
    }
    p->pipeline.set(key, value);
    return BTS_OK;
}

BTS_EXPORT bts_status bts_pipeline_run(bts_pipeline* p, const char* stage) {
    if (!p) return BTS_INVALID_HANDLE;
    if (!stage) {
        p->last_error = "stage must be non-null";
        return BTS_CONFIG_ERROR;
    }
    try {
        p->pipeline.run(stage);
        return BTS_OK;
    } catch (const btsup::ConfigError& e) {
        p->last_error = e.what();
        return BTS_CONFIG_ERROR;
    } catch (const std::exception& e) {
        p->last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT const char* bts_pipeline_last_error(const bts_pipeline* p) {
    return p ? p->last_error.c_str() : "invalid handle";
}

BTS_EXPORT bts_status bts_parse_release_name(const char* name, char** json_out) {
    if (!name || !json_out) return BTS_CONFIG_ERROR;
    *json_out = nullptr;
    try {
        static const btsup::ReleaseNameParser parser; // stateless after construction
        json j = parsed_to_json(parser.parse(name));
        *json_out = dup_string(j.dump());
        return *json_out ? BTS_OK : BTS_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT bts_status bts_classify_file(const char* path, int* is_video) {
    if (!path || !is_video) return BTS_CONFIG_ERROR;
    try {
        static const btsup::ReleaseNameParser parser;
        *is_video = parser.classify_file(path).is_video ? 1 : 0;
        return BTS_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT bts_status bts_matcher_open(const char* catalog_tsv_path, bts_matcher** out) {
    if (!out) return BTS_CONFIG_ERROR;
    *out = nullptr;
    if (!catalog_tsv_path) {
        g_last_error = "catalog path must be non-null";
        return BTS_CONFIG_ERROR;
    }
    try {
        auto entries = btsup::load_catalog_tsv(catalog_tsv_path);
        *out = new bts_matcher{btsup::TitleIndex::build(std::move(entries)), {}};
        return BTS_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BTS_CONFIG_ERROR;
    }
}

BTS_EXPORT void bts_matcher_close(bts_matcher* m) { delete m; }

BTS_EXPORT const char* bts_matcher_last_error(const bts_matcher* m) {
    return m ? m->last_error.c_str() : "invalid handle";
}

BTS_EXPORT bts_status bts_matcher_match(bts_matcher* m, const char* title, int top_k,
                                        char** json_out) {
    if (!m) return BTS_INVALID_HANDLE;
    if (!title || !json_out || top_k < 0) {
        if (m) m->last_error = "title/json_out must be non-null and top_k >= 0";
        return BTS_CONFIG_ERROR;
    }
    *json_out = nullptr;
    try {
        auto results = m->index.match(title, std::size_t(top_k));
        json arr = json::array();
        for (const auto& r : results)
            arr.push_back({{"catalog_id", r.catalog_id}, {"score", r.score},
                           {"accepted", r.accepted}});
        *json_out = dup_string(arr.dump());
        return *json_out ? BTS_OK : BTS_ERROR;
    } catch (const std::exception& e) {
        m->last_error = e.what();
        return BTS_ERROR;
    }
}

BTS_EXPORT bts_status bts_matcher_set_threshold(bts_matcher* m, double threshold) {
    if (!m) return BTS_INVALID_HANDLE;
    m->index.set_threshold(threshold);
    return BTS_OK;
}

} // extern "C"
