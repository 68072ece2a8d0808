// Exercises the shared-library C surface end to end: handles, status codes,
// JSON outputs, and a full pipeline run driven purely through btsupply.h.
#include "doctest.h"

#include "btsupply.h"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string catalog_path() {
    return std::string(BTSUPPLY_SOURCE_DIR) + "/data/sample_catalog.tsv";
}

struct StringOut {
    char* s = nullptr;
    ~StringOut() { bts_string_free(s); }
};

} // namespace

TEST_CASE("capi: version and null-argument handling") {
    REQUIRE(bts_version() != nullptr);
    CHECK(std::string(bts_version()).find('.') != std::string::npos);

    CHECK(bts_pipeline_open("nonexistent/path.cfg", nullptr) == BTS_CONFIG_ERROR);
    CHECK(bts_parse_release_name(nullptr, nullptr) == BTS_CONFIG_ERROR);
    int dummy = 0;
    CHECK(bts_classify_file(nullptr, &dummy) == BTS_CONFIG_ERROR);
    CHECK(bts_pipeline_run(nullptr, "parse") == BTS_INVALID_HANDLE);
    CHECK(bts_matcher_match(nullptr, "x", 1, nullptr) == BTS_INVALID_HANDLE);
}

TEST_CASE("capi: missing config file reports a config error with a message") {
    bts_pipeline* p = nullptr;
    CHECK(bts_pipeline_open("definitely/not/here.cfg", &p) == BTS_CONFIG_ERROR);
    CHECK(p == nullptr);
    CHECK(std::string(bts_last_error()).find("cannot open") != std::string::npos);
}

TEST_CASE("capi: parse_release_name returns the parsed fields as JSON") {
    StringOut out;
    REQUIRE(bts_parse_release_name("Riviera.S02E01.WEBRip.x264-ION10.mp4", &out.s) == BTS_OK);
    json j = json::parse(out.s);
    CHECK(j["title"] == "Riviera");
    CHECK(j["season"] == 2);
    CHECK(j["episode"] == 1);
    CHECK(j["source_quality"] == "WEBRip");
    CHECK(j["codec"] == "x264");
    CHECK(j["group"] == "ION10");
    CHECK(j["extension"] == "mp4");
}

TEST_CASE("capi: classify_file") {
    int is_video = -1;
    REQUIRE(bts_classify_file("a/b/movie.MKV", &is_video) == BTS_OK);
    CHECK(is_video == 1);
    REQUIRE(bts_classify_file("notes.nfo", &is_video) == BTS_OK);
    CHECK(is_video == 0);
}

TEST_CASE("capi: matcher handle lifecycle and scoring") {
    bts_matcher* m = nullptr;
    REQUIRE(bts_matcher_open(catalog_path().c_str(), &m) == BTS_OK);
    REQUIRE(m != nullptr);

    StringOut out;
    REQUIRE(bts_matcher_match(m, "shadowhunters the mortal instruments", 3, &out.s) == BTS_OK);
    json results = json::parse(out.s);
    REQUIRE(results.is_array());
    REQUIRE(results.size() >= 2);
    CHECK(results[0]["catalog_id"] == "tt4145054");
    CHECK(results[0]["score"].get<double>() > results[1]["score"].get<double>());
    CHECK(results[0]["accepted"] == false); // no threshold set yet

    double top = results[0]["score"].get<double>();
    REQUIRE(bts_matcher_set_threshold(m, top - 0.001) == BTS_OK);
    StringOut out2;
    REQUIRE(bts_matcher_match(m, "shadowhunters the mortal instruments", 3, &out2.s) == BTS_OK);
    json again = json::parse(out2.s);
    CHECK(again[0]["accepted"] == true);
    CHECK(again[1]["accepted"] == false);

    bts_matcher_close(m);

    bts_matcher* bad = nullptr;
    CHECK(bts_matcher_open("no/such/catalog.tsv", &bad) == BTS_CONFIG_ERROR);
    CHECK(bad == nullptr);
}

TEST_CASE("capi: full pipeline run through the shared library") {
    fs::path dir = fs::temp_directory_path() / "btsupply_capi_e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);

    bts_pipeline* p = nullptr;
    REQUIRE(bts_pipeline_open(nullptr, &p) == BTS_OK);
    REQUIRE(p != nullptr);

    auto set = [&](const char* k, const std::string& v) {
        REQUIRE(bts_pipeline_set(p, k, v.c_str()) == BTS_OK);
    };
    set("store", (dir / "capi.db").string());
    set("catalog", catalog_path());
    set("world.seed", "31");
    set("world.nodes", "30");
    set("world.hashes", "60");
    set("crawler.seed", "3");
    set("crawler.rate_limit_qps", "60");
    set("sim.duration_s", "30");
    set("matcher.k_sigma", "1.5");
    set("export.csv_path", (dir / "matched.csv").string());
    set("report.out_dir", (dir / "reports").string());

    for (const char* stage : {"simulate", "parse", "match", "export", "report"}) {
        CAPTURE(stage);
        bts_status rc = bts_pipeline_run(p, stage);
        if (rc != BTS_OK) MESSAGE(bts_pipeline_last_error(p));
        REQUIRE(rc == BTS_OK);
    }
    CHECK(fs::exists(dir / "matched.csv"));
    CHECK(fs::exists(dir / "reports" / "summary.json"));

    // unknown stage is a config error with a message on the handle
    CHECK(bts_pipeline_run(p, "bogus") == BTS_CONFIG_ERROR);
    CHECK(std::string(bts_pipeline_last_error(p)).find("unknown stage") != std::string::npos);

    bts_pipeline_close(p);
}
