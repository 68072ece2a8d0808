#include "doctest.h"

#include "btsupply/release_name.hpp"

#include <random>

using namespace btsup;

namespace {

ReleaseNameParser parser_2025() {
    ReleaseNameParser p;
    p.set_year_bounds(1888, 2026);
    return p;
}

// Independent template-instance generator for the round-trip property.
// Word lists avoid vocabulary tokens and 4-digit shapes on purpose: the
// greedy grammar cannot distinguish a title word that IS a tag.
struct TemplateGen {
    std::mt19937_64 rng;
    explicit TemplateGen(uint64_t seed) : rng(seed) {}

    const std::vector<std::string> words = {"Silver",  "Harbor", "Monsoon", "Paper",
                                            "Kestrel", "Vantage", "Oblique", "Marrow",
                                            "Quiet",   "Ember",   "Sable",   "Vesper"};
    const std::vector<std::string> groups = {"ION10", "NTb", "FLUX", "CAKES", "TBS", "GRP"};
    const std::vector<std::string> resolutions = {"480p", "720p", "1080p", "2160p"};
    const std::vector<std::string> qualities = {"WEBRip", "WEB-DL", "WEB", "BluRay", "HDTV", "CAM"};
    const std::vector<std::string> codecs = {"x264", "x265", "h264", "h265", "XviD"};
    const std::vector<std::string> audios = {"AAC", "AC3", "DTS", "TrueHD", "FLAC"};
    const std::vector<std::string> languages = {"FRENCH", "GERMAN", "RUSSIAN", "POLISH"};
    const std::vector<std::string> flag_names = {"repack",  "proper",       "internal",
                                                 "readnfo", "unrated",      "remastered",
                                                 "3d",      "widescreen",   "hdr",
                                                 "documentary", "directorsCut", "internationalCut"};
    const std::vector<std::string> exts = {"mkv", "mp4", "avi"};

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[rng() % v.size()];
    }
    bool chance(double p) { return double(rng() % 10000) / 10000.0 < p; }

    std::string title_words(int lo, int hi) {
        int k = lo + int(rng() % uint64_t(hi - lo + 1));
        std::string t;
        for (int i = 0; i < k; ++i) {
            if (i) t.push_back(' ');
            t += pick(words);
        }
        return t;
    }

    ParsedName next() {
        ParsedName p;
        p.title = title_words(1, 4);
        bool tv = chance(0.5);
        if (tv) {
            p.season = 1 + int(rng() % 30);
            p.episode = 1 + int(rng() % 99);
            if (chance(0.4)) p.episode_title = title_words(1, 3);
        } else {
            p.year = 1930 + int(rng() % 96); // 1930..2025
        }
        if (chance(0.8)) p.resolution = pick(resolutions);
        if (chance(0.8)) p.source_quality = pick(qualities);
        if (chance(0.8)) p.codec = pick(codecs);
        if (chance(0.3)) p.audio = pick(audios);
        if (chance(0.25)) p.language = pick(languages);
        int nflags = int(rng() % 3);
        for (int i = 0; i < nflags; ++i) p.flags.insert(pick(flag_names));
        if (chance(0.9)) p.release_group = pick(groups);
        if (chance(0.85)) p.container_extension = pick(exts);
        if (chance(0.15)) p.site = "tracker.example";
        return p;
    }
};

} // namespace

TEST_CASE("classify_file by extension") {
    ReleaseNameParser p;
    CHECK(p.classify_file("Riviera.S02E01.WEBRip.x264-ION10.mp4").is_video);
    CHECK(p.classify_file("Riviera.S02E01.WEBRip.x264-ION10.mp4").extension == "mp4");
    CHECK(!p.classify_file("release.nfo").is_video);
    CHECK(p.classify_file("release.nfo").extension == "nfo");
    CHECK(!p.classify_file("archive").is_video);
    CHECK(p.classify_file("archive").extension.empty());
    CHECK(p.classify_file("dir.with.dots/plain").extension.empty());
    CHECK(p.classify_file("UPPER.MKV").is_video);
    CHECK(p.classify_file("show/s01/e01.mkv").is_video);
}

TEST_CASE("parse: appendix low-score filename") {
    auto p = parser_2025().parse("Riviera.S02E01.WEBRip.x264-ION10.mp4");
    CHECK(p.title == "Riviera");
    CHECK(p.season == 2);
    CHECK(p.episode == 1);
    CHECK(p.source_quality == "WEBRip");
    CHECK(p.codec == "x264");
    CHECK(p.release_group == "ION10");
    CHECK(p.container_extension == "mp4");
    CHECK(!p.year.has_value());
    CHECK(!p.resolution.has_value());
    CHECK(p.extras.empty());
}

TEST_CASE("parse: appendix high-score filename") {
    auto p = parser_2025().parse("shadowhunters.the.mortal.instruments.s03e20.1080p.web.h264-tbs.mkv");
    CHECK(p.title == "shadowhunters the mortal instruments");
    CHECK(p.season == 3);
    CHECK(p.episode == 20);
    CHECK(p.resolution == "1080p");
    CHECK(p.source_quality == "WEB");
    CHECK(p.codec == "h264");
    CHECK(p.release_group == "tbs");
    CHECK(p.container_extension == "mkv");
    CHECK(p.extras.empty());
}

TEST_CASE("parse: boxed movie template instance") {
    auto p = parser_2025().parse("Some.Movie.2019.1080p.BluRay.x265-GRP.mkv");
    CHECK(p.title == "Some Movie");
    CHECK(p.year == 2019);
    CHECK(p.resolution == "1080p");
    CHECK(p.source_quality == "BluRay");
    CHECK(p.codec == "x265");
    CHECK(p.release_group == "GRP");
    CHECK(p.container_extension == "mkv");
}

TEST_CASE("parse: episode variants") {
    auto p = parser_2025();
    auto a = p.parse("Show.Name.3x20.HDTV.mkv");
    CHECK(a.season == 3);
    CHECK(a.episode == 20);
    CHECK(a.title == "Show Name");

    auto b = p.parse("Show Name Season 2 Episode 7 720p.mkv");
    CHECK(b.season == 2);
    CHECK(b.episode == 7);
    CHECK(b.title == "Show Name");
    CHECK(b.resolution == "720p");

    // first match wins left-to-right
    auto c = p.parse("Show.S01E02.3x20.HDTV.mkv");
    CHECK(c.season == 1);
    CHECK(c.episode == 2);
}

TEST_CASE("parse: multi-episode span records first episode and flags extras") {
    auto p = parser_2025();
    auto a = p.parse("Show.S01E01E02.720p.mkv");
    CHECK(a.season == 1);
    CHECK(a.episode == 1);
    REQUIRE(a.extras.size() == 1);
    CHECK(a.extras[0].first == "E02");

    auto b = p.parse("Show.S01E01-E02.720p.mkv");
    CHECK(b.season == 1);
    CHECK(b.episode == 1);
    REQUIRE(b.extras.size() == 1);
    CHECK(b.extras[0].first == "-E02");
}

TEST_CASE("parse: episode title between episode tag and next tag") {
    auto p = parser_2025().parse("Great.Show.S04E08.The.Long.Night.720p.HDTV.x264-GRP.mkv");
    CHECK(p.title == "Great Show");
    CHECK(p.episode_title == "The Long Night");
    CHECK(p.resolution == "720p");
    CHECK(p.release_group == "GRP");
}

TEST_CASE("parse: trailing hyphen tokens that are known tags are not groups") {
    auto p = parser_2025();
    auto a = p.parse("Some.Movie.2019.1080p.WEB-DL.mkv");
    CHECK(!a.release_group.has_value());
    CHECK(a.source_quality == "WEB-DL");

    // "-x264" must not become a group; the odd compound token stays in extras
    auto b = p.parse("Some.Movie.2019.720p.HDTV-x264.mkv");
    CHECK(!b.release_group.has_value());
    REQUIRE(b.extras.size() == 1);
    CHECK(b.extras[0].first == "HDTV-x264");
}

TEST_CASE("parse: site tag in leading brackets") {
    auto p = parser_2025().parse("[tracker.site.tld].Some.Movie.2019.1080p.WEBRip.x264-GRP.mkv");
    CHECK(p.site == "tracker.site.tld");
    CHECK(p.title == "Some Movie");
    CHECK(p.year == 2019);
    CHECK(p.release_group == "GRP");

    // leading bracket without a dot is not a site tag
    auto q = parser_2025().parse("[REQ].Some.Movie.2019.1080p.mkv");
    CHECK(!q.site.has_value());
}

TEST_CASE("parse: year bounds and SxxEyy interaction") {
    auto p = parser_2025();
    CHECK(!p.parse("Old.Film.1887.mkv").year.has_value());
    CHECK(p.parse("Old.Film.1888.mkv").year == 1888);
    CHECK(p.parse("New.Film.2026.mkv").year == 2026);
    CHECK(!p.parse("Future.Film.2027.mkv").year.has_value());

    // a year never fires inside an episode token
    auto q = p.parse("Show.S19E88.HDTV.mkv");
    CHECK(!q.year.has_value());
    CHECK(q.season == 19);
    CHECK(q.episode == 88);
}

TEST_CASE("parse: title is non-empty whenever any token exists") {
    auto p = parser_2025();
    CHECK(p.parse("1080p.mkv").title == "1080p");
    CHECK(p.parse("2019.mkv").title == "2019");
    CHECK(p.parse("WEBRip.mkv").title == "WEBRip");
    CHECK(p.parse("...").title.empty()); // no non-delimiter tokens at all
    CHECK(p.parse("x").title == "x");
}

TEST_CASE("parse: sample token lands in extras") {
    auto p = parser_2025().parse("Some.Movie.2019.1080p.BluRay.x264-GRP.sample.mkv");
    bool found = false;
    for (const auto& [tok, pos] : p.extras)
        if (tok == "sample") found = true;
    CHECK(found);
}

TEST_CASE("parse: two-token flags") {
    auto p = parser_2025().parse("Classic.Film.1982.Directors.Cut.2160p.REMUX-GRP.mkv");
    CHECK(p.title == "Classic Film");
    CHECK(p.flags.count("directorsCut") == 1);
    CHECK(p.year == 1982);
    CHECK(p.resolution == "2160p");

    auto q = parser_2025().parse("Another.Film.1990.International.Cut.READ.NFO.1080p.mkv");
    CHECK(q.flags.count("internationalCut") == 1);
    CHECK(q.flags.count("readnfo") == 1);
}

TEST_CASE("parse: vocabulary tokens report canonical spelling, free text keeps case") {
    auto p = parser_2025().parse("my.show.s01e01.webrip.X264-grp.mkv");
    CHECK(p.title == "my show");
    CHECK(p.source_quality == "WEBRip"); // canonical casing
    CHECK(p.codec == "x264");
    CHECK(p.release_group == "grp");     // original casing
}

TEST_CASE("parse: duplicate tag classes keep the first and extras the rest") {
    auto p = parser_2025().parse("Film.2001.1985.720p.1080p.HDTV.WEBRip.mkv");
    CHECK(p.year == 2001);
    CHECK(p.resolution == "720p");
    CHECK(p.source_quality == "HDTV");
    REQUIRE(p.extras.size() == 3);
    CHECK(p.extras[0].first == "1985");
    CHECK(p.extras[1].first == "1080p");
    CHECK(p.extras[2].first == "WEBRip");
}

TEST_CASE("property: template round trip recovers every populated field (1000+ instances)") {
    TemplateGen gen(4242);
    ReleaseNameParser parser = parser_2025();
    for (int i = 0; i < 1500; ++i) {
        ParsedName want = gen.next();
        std::string rendered = want.render();
        CAPTURE(rendered);
        ParsedName got = parser.parse(rendered);
        CHECK(got.title == want.title);
        CHECK(got.year == want.year);
        CHECK(got.season == want.season);
        CHECK(got.episode == want.episode);
        CHECK(got.episode_title == want.episode_title);
        CHECK(got.resolution == want.resolution);
        CHECK(got.source_quality == want.source_quality);
        CHECK(got.codec == want.codec);
        CHECK(got.audio == want.audio);
        CHECK(got.language == want.language);
        CHECK(got.release_group == want.release_group);
        CHECK(got.site == want.site);
        CHECK(got.container_extension == want.container_extension);
        CHECK(got.flags == want.flags);
        CHECK(got.extras.empty());
    }
}

TEST_CASE("property: normalization idempotence on template-conforming names") {
    TemplateGen gen(777);
    ReleaseNameParser parser = parser_2025();
    for (int i = 0; i < 300; ++i) {
        ParsedName first = parser.parse(gen.next().render());
        ParsedName second = parser.parse(first.render());
        CHECK(second.title == first.title);
        CHECK(second.year == first.year);
        CHECK(second.season == first.season);
        CHECK(second.episode == first.episode);
        CHECK(second.episode_title == first.episode_title);
        CHECK(second.resolution == first.resolution);
        CHECK(second.source_quality == first.source_quality);
        CHECK(second.codec == first.codec);
        CHECK(second.flags == first.flags);
        CHECK(second.release_group == first.release_group);
    }
}

TEST_CASE("property: parse is total over a fuzz corpus") {
    std::mt19937_64 rng{31337};
    ReleaseNameParser parser;
    const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._- []()!'&#@\xc3\xa9\xff";
    for (int i = 0; i < 10000; ++i) {
        size_t len = rng() % 120;
        std::string name(len, '\0');
        for (auto& c : name) c = alphabet[rng() % alphabet.size()];
        ParsedName p = parser.parse(name); // must never throw
        bool has_token = false;
        for (char c : name)
            if (c != '.' && c != '_' && c != ' ') has_token = true;
        if (has_token && name.find_first_not_of("._ ") != std::string::npos) {
            // title non-empty for any input with at least one non-delimiter token
            CHECK(!p.title.empty());
        }
    }
}

TEST_CASE("vocabulary: shipped data file matches the builtin tables") {
    TokenVocabulary from_file = TokenVocabulary::load_file(std::string(BTSUPPLY_SOURCE_DIR) +
                                                           "/data/scene_tokens.txt");
    TokenVocabulary builtin = TokenVocabulary::builtin();
    CHECK(from_file.version() == builtin.version());
    for (const char* probe : {"WEBRip", "web-dl", "x264", "FRENCH", "REPACK", "hdr10", "4k"}) {
        auto a = from_file.lookup(probe);
        auto b = builtin.lookup(probe);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        CHECK(a->canonical == b->canonical);
        CHECK(a->cls == b->cls);
    }
    CHECK(from_file.video_extensions() == builtin.video_extensions());
    CHECK(from_file.is_video_extension("MKV"));
    CHECK(!from_file.is_video_extension("nfo"));
    CHECK(from_file.is_known_extension("nfo"));
}
