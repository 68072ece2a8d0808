#include "doctest.h"

#include "btsupply/catalog.hpp"
#include "btsupply/title_match.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

using namespace btsup;

namespace {

// ---------------------------------------------------------------------------
// Independent oracle: its own tokenizer (ASCII corpora only) and a naive
// double-loop BM25 with the same formula definition.

std::vector<std::string> oracle_tokens(std::string_view text, int min_gram, int max_gram) {
    std::string low;
    for (char c : text) low.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    std::vector<std::string> words;
    std::string cur;
    for (char c : low) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    std::vector<std::string> out;
    for (const auto& w : words) {
        if (int(w.size()) < min_gram) {
            out.push_back(w);
        } else {
            for (int g = min_gram; g <= std::min<int>(max_gram, int(w.size())); ++g)
                out.push_back(w.substr(0, size_t(g)));
        }
    }
    return out;
}

double oracle_bm25(const std::vector<std::string>& query,
                   const std::vector<std::vector<std::string>>& docs, size_t target, double k1,
                   double b) {
    double N = double(docs.size());
    double avgdl = 0;
    for (const auto& d : docs) avgdl += double(d.size());
    avgdl /= N;
    double dl = double(docs[target].size());
    double total = 0;
    for (const auto& q : query) {
        size_t df = 0;
        for (const auto& d : docs)
            if (std::find(d.begin(), d.end(), q) != d.end()) ++df;
        size_t tf = 0;
        for (const auto& t : docs[target])
            if (t == q) ++tf;
        if (tf == 0 || df == 0) continue;
        double idf = std::log(1.0 + (N - double(df) + 0.5) / (double(df) + 0.5));
        double tfn = double(tf) * (k1 + 1.0) /
                     (double(tf) + k1 * (1.0 - b + b * dl / avgdl));
        total += idf * tfn;
    }
    return total;
}

std::vector<CatalogEntry> toy_catalog() {
    return {
        {"t1", "On the Riviera", 1951, "movie", {"Comedy"}},
        {"t2", "Casablanca", 1942, "movie", {"Drama"}},
        {"t3", "Harbor Nights", 1999, "movie", {}},
        {"t4", "Midnight Harbor", 2004, "movie", {}},
        {"t5", "The Long Voyage", 1965, "movie", {}},
    };
}

} // namespace

TEST_CASE("analyze: casablanca emits prefixes 4..10") {
    auto tokens = analyze("Casablanca");
    std::vector<std::string> expect = {"casa",      "casab",      "casabl",   "casabla",
                                       "casablan",  "casablanc",  "casablanca"};
    CHECK(tokens == expect);
}

TEST_CASE("analyze: ascii folding") {
    auto tokens = analyze("Am\xc3\xa9lie"); // Amélie
    std::vector<std::string> expect = {"amel", "ameli", "amelie"};
    CHECK(tokens == expect);
}

TEST_CASE("analyze: short words survive whole") {
    auto tokens = analyze("On");
    REQUIRE(tokens.size() == 1);
    CHECK(tokens[0] == "on");

    auto the_xy = analyze("The XY");
    CHECK(the_xy == std::vector<std::string>{"the", "xy"});
}

TEST_CASE("analyze: max_gram caps prefix length") {
    AnalyzerConfig cfg;
    cfg.min_gram = 4;
    cfg.max_gram = 6;
    auto tokens = analyze("casablanca", cfg);
    CHECK(tokens == std::vector<std::string>{"casa", "casab", "casabl"});
}

TEST_CASE("analyze: non-alphanumerics split words; empty for no alnum") {
    auto tokens = analyze("hello-world_2x");
    CHECK(tokens == std::vector<std::string>{"hell", "hello", "worl", "world", "2x"});
    CHECK(analyze("!!! --- ...").empty());
}

TEST_CASE("property: analyze idempotent on its own tokens below max_gram") {
    std::mt19937_64 rng{55};
    for (int i = 0; i < 200; ++i) {
        size_t len = 1 + rng() % 12;
        std::string word(len, '\0');
        for (auto& c : word) c = char('a' + rng() % 26);
        for (const auto& tok : analyze(word)) {
            if (int(tok.size()) >= 15) continue;
            auto again = analyze(tok);
            CHECK(std::find(again.begin(), again.end(), tok) != again.end());
        }
    }
}

TEST_CASE("property: token count grows monotonically with word length up to max_gram") {
    std::string word;
    size_t prev = 0;
    for (int len = 1; len <= 20; ++len) {
        word.push_back(char('a' + len % 26));
        size_t count = analyze(word).size();
        CHECK(count >= prev);
        if (len > 4 && len <= 15) CHECK(count == prev + 1);
        if (len > 15) CHECK(count == prev); // capped by max_gram
        prev = count;
    }
}

TEST_CASE("build_index: trivial and error cases") {
    auto idx = TitleIndex::build({{"only", "Casablanca", 1942, "movie", {}}});
    CHECK(idx.doc_count() == 1);
    CHECK(idx.avg_doc_length() == doctest::Approx(7.0)); // prefixes 4..10

    CHECK_THROWS_AS(TitleIndex::build({}), std::invalid_argument);
    CHECK_THROWS_AS(TitleIndex::build({{"a", "X", {}, "movie", {}},
                                       {"a", "Y", {}, "movie", {}}}),
                    std::invalid_argument);
}

TEST_CASE("build_index: document frequencies equal hand count on a 5-title corpus") {
    auto idx = TitleIndex::build(toy_catalog());
    // "harbor" prefixes appear in t3 and t4
    CHECK(idx.doc_frequency("harb") == 2);
    CHECK(idx.doc_frequency("harbor") == 2);
    // "the" as a short word appears whole in t1 and t5
    CHECK(idx.doc_frequency("the") == 2);
    CHECK(idx.doc_frequency("casa") == 1);
    CHECK(idx.doc_frequency("rivi") == 1);
    CHECK(idx.doc_frequency("nope") == 0);
    // dl hand counts: "On the Riviera" -> on, the, rivi..riviera(4)  = 6
    CHECK(idx.doc_length(0) == 6);
    // "Casablanca" -> 7
    CHECK(idx.doc_length(1) == 7);
}

TEST_CASE("score: zero token overlap scores zero") {
    auto idx = TitleIndex::build(toy_catalog());
    auto q = analyze("zzzz xq");
    CHECK(idx.score(1, q) == 0.0);
}

TEST_CASE("score: single-doc single-term closed form") {
    auto idx = TitleIndex::build({{"d", "zope", {}, "movie", {}}});
    auto q = analyze("zope");
    REQUIRE(q.size() == 1);
    // tf=1, df=1, N=1, dl=avgdl: score = ln(1 + 0.5/1.5) * 1
    double expect = std::log(1.0 + 0.5 / 1.5);
    CHECK(idx.score(0, q) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score: matches the brute-force oracle to 1e-9 relative on random corpora") {
    std::mt19937_64 rng{2718};
    auto word = [&rng]() {
        size_t len = 2 + rng() % 8;
        std::string w(len, '\0');
        for (auto& c : w) c = char('a' + rng() % 6); // narrow alphabet: real overlaps
        return w;
    };
    for (int corpus = 0; corpus < 10; ++corpus) {
        std::vector<CatalogEntry> entries;
        std::vector<std::vector<std::string>> docs;
        size_t n = 2 + rng() % 99;
        for (size_t d = 0; d < n; ++d) {
            std::string title;
            size_t words = 1 + rng() % 8;
            for (size_t wi = 0; wi < words; ++wi) {
                if (wi) title.push_back(' ');
                title += word();
            }
            entries.push_back({"id" + std::to_string(d), title, {}, "movie", {}});
            docs.push_back(oracle_tokens(title, 4, 15));
        }
        auto idx = TitleIndex::build(entries);
        for (int q = 0; q < 5; ++q) {
            std::string query = word() + " " + word();
            auto qtok = oracle_tokens(query, 4, 15);
            for (size_t d = 0; d < n; ++d) {
                double mine = idx.score(d, analyze(query));
                double oracle = oracle_bm25(qtok, docs, d, 1.2, 0.75);
                CAPTURE(corpus);
                CAPTURE(query);
                CAPTURE(d);
                if (oracle == 0.0) {
                    CHECK(mine == 0.0);
                } else {
                    CHECK(std::abs(mine - oracle) / std::abs(oracle) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("match: full ranking equals the oracle ranking on randomized corpora") {
    std::mt19937_64 rng{909};
    auto word = [&rng]() {
        size_t len = 2 + rng() % 8;
        std::string w(len, '\0');
        for (auto& c : w) c = char('a' + rng() % 6);
        return w;
    };
    for (int corpus = 0; corpus < 5; ++corpus) {
        std::vector<CatalogEntry> entries;
        std::vector<std::vector<std::string>> docs;
        size_t n = 5 + rng() % 60;
        for (size_t d = 0; d < n; ++d) {
            std::string title;
            size_t words = 1 + rng() % 8;
            for (size_t wi = 0; wi < words; ++wi) title += (wi ? " " : "") + word();
            entries.push_back({"id" + std::to_string(d), title, {}, "movie", {}});
            docs.push_back(oracle_tokens(title, 4, 15));
        }
        auto idx = TitleIndex::build(entries);
        std::string query = word() + " " + word() + " " + word();
        auto qtok = oracle_tokens(query, 4, 15);

        // oracle ranking: score every doc, drop zeros, sort by (-score, id)
        std::vector<std::pair<double, std::string>> oracle;
        for (size_t d = 0; d < n; ++d) {
            double s = oracle_bm25(qtok, docs, d, 1.2, 0.75);
            if (s > 0) oracle.emplace_back(s, "id" + std::to_string(d));
        }
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        auto mine = idx.match(query, n);
        REQUIRE(mine.size() == oracle.size());
        for (size_t i = 0; i < mine.size(); ++i) {
            CAPTURE(corpus);
            CAPTURE(i);
            CHECK(mine[i].catalog_id == oracle[i].second);
        }
    }
}

TEST_CASE("match: ordering equals oracle ordering and ties break by ascending id") {
    auto entries = toy_catalog();
    entries.push_back({"t0", "Harbor Nights", 2011, "movie", {}}); // exact duplicate title of t3
    auto idx = TitleIndex::build(entries);
    auto results = idx.match("Harbor Nights", 10);
    REQUIRE(results.size() >= 3);
    // t0 and t3 tie exactly; ascending id puts t0 first
    CHECK(results[0].catalog_id == "t0");
    CHECK(results[1].catalog_id == "t3");
    CHECK(results[0].score == doctest::Approx(results[1].score));
    CHECK(results[0].score > results[2].score);
    for (size_t i = 1; i < results.size(); ++i) CHECK(results[i - 1].score >= results[i].score);
}

TEST_CASE("match: appendix ordering is reproduced") {
    // catalog without "Riviera": the article-bearing title is the best match,
    // with a LOW score relative to what the true title would get
    std::vector<CatalogEntry> without = {
        {"tt0043972", "On the Riviera", 1951, "movie", {}},
        {"tt0034583", "Casablanca", 1942, "movie", {}},
        {"tt1270797", "The Mortal Instruments: City of Bones", 2013, "movie", {}},
        {"tt4145054", "Shadowhunters: The Mortal Instruments", 2016, "tv-series", {}},
    };
    auto idx1 = TitleIndex::build(without);
    auto low = idx1.match("Riviera", 5);
    REQUIRE(!low.empty());
    CHECK(low[0].catalog_id == "tt0043972");

    // with "Riviera" present it ranks first, above the partial competitor
    auto with = without;
    with.push_back({"tt5421602", "Riviera", 2017, "tv-series", {}});
    auto idx2 = TitleIndex::build(with);
    auto hi = idx2.match("Riviera", 5);
    REQUIRE(hi.size() >= 2);
    CHECK(hi[0].catalog_id == "tt5421602");
    CHECK(hi[0].score > hi[1].score);
    CHECK(hi[1].catalog_id == "tt0043972"); // the partial-article competitor drops to second

    // full series title: exact entry first, strictly above partial overlap
    auto shadow = idx2.match("shadowhunters the mortal instruments", 5);
    REQUIRE(shadow.size() >= 2);
    CHECK(shadow[0].catalog_id == "tt4145054");
    CHECK(shadow[0].score > shadow[1].score);
    CHECK(shadow[1].catalog_id == "tt1270797");

    // the long full-title match towers over the short partial match within
    // the same corpus (the appendix's 260-vs-18.3 contrast, shape only)
    CHECK(shadow[0].score > 3 * hi[1].score);
}

TEST_CASE("match: no alphanumeric content gives empty result") {
    auto idx = TitleIndex::build(toy_catalog());
    CHECK(idx.match("...---...", 5).empty());
    CHECK(idx.match("", 5).empty());
}

TEST_CASE("match: accepted flags partition exactly at the threshold") {
    auto idx = TitleIndex::build(toy_catalog());
    auto unthresholded = idx.match("Midnight Harbor", 5);
    for (const auto& r : unthresholded) CHECK(!r.accepted); // no threshold set yet

    std::vector<double> best;
    for (const auto& e : toy_catalog()) {
        auto rs = idx.match(e.title, 1);
        REQUIRE(!rs.empty());
        best.push_back(rs[0].score);
    }
    double thr = compute_threshold(best, 0.0); // k=0: the mean
    idx.set_threshold(thr);
    auto results = idx.match("Midnight Harbor", 5);
    for (const auto& r : results) CHECK(r.accepted == (r.score >= thr));
}

TEST_CASE("score monotonicity: extra occurrence of a query term never lowers the score") {
    // controlled fixture: equal analyzed lengths, same corpus
    std::vector<CatalogEntry> entries = {
        {"a", "wolf wolf bird", {}, "movie", {}},
        {"b", "wolf bird bird", {}, "movie", {}},
    };
    auto idx = TitleIndex::build(entries);
    auto q = analyze("wolf");
    CHECK(idx.score(0, q) > idx.score(1, q));
    CHECK(idx.score(1, q) > 0);
}

TEST_CASE("compute_threshold: hand cases") {
    std::vector<double> constant = {5, 5, 5};
    CHECK(compute_threshold(constant, 2.0) == doctest::Approx(5.0));
    std::vector<double> pair = {0, 10};
    CHECK(compute_threshold(pair, 1.0) == doctest::Approx(10.0)); // 5 + 1*5
    CHECK(compute_threshold(pair, 0.0) == doctest::Approx(5.0));
    std::vector<double> empty;
    CHECK_THROWS_AS(compute_threshold(empty, 2.0), std::invalid_argument);
}

TEST_CASE("compute_threshold: 2-sigma tail of a seeded normal sample is ~2.3%") {
    std::mt19937_64 rng{97};
    std::normal_distribution<double> dist(100.0, 15.0);
    std::vector<double> sample(100000);
    for (auto& s : sample) s = dist(rng);
    double thr = compute_threshold(sample, 2.0);
    size_t above = 0;
    for (double s : sample)
        if (s > thr) ++above;
    double pct = 100.0 * double(above) / double(sample.size());
    CHECK(pct == doctest::Approx(2.3).epsilon(0.22)); // 2.3% +/- 0.5 absolute
    CHECK(pct > 1.8);
    CHECK(pct < 2.8);
}

TEST_CASE("catalog: tsv parsing with native and IMDb-style headers") {
    auto native = parse_catalog_tsv("id\ttitle\tyear\tkind\tgenres\n"
                                    "m1\tCasablanca\t1942\tmovie\tDrama,Romance\n"
                                    "m2\tNo Year\t\\N\tmovie\t\\N\n");
    REQUIRE(native.size() == 2);
    CHECK(native[0].id == "m1");
    CHECK(native[0].year == 1942);
    CHECK(native[0].genres == std::vector<std::string>{"Drama", "Romance"});
    CHECK(!native[1].year.has_value());
    CHECK(native[1].genres.empty());

    auto imdb = parse_catalog_tsv(
        "tconst\ttitleType\tprimaryTitle\toriginalTitle\tisAdult\tstartYear\tendYear\truntimeMinutes\tgenres\n"
        "tt0034583\tmovie\tCasablanca\tCasablanca\t0\t1942\t\\N\t102\tDrama,Romance\n"
        "tt5421602\ttvSeries\tRiviera\tRiviera\t0\t2017\t\\N\t45\tDrama\n");
    REQUIRE(imdb.size() == 2);
    CHECK(imdb[0].id == "tt0034583");
    CHECK(imdb[0].title == "Casablanca");
    CHECK(imdb[0].year == 1942);
    CHECK(imdb[0].kind == "movie");
    CHECK(imdb[1].kind == "tvSeries");
    CHECK(catalog_kind_is_tv(imdb[1].kind));
    CHECK(!catalog_kind_is_tv(imdb[0].kind));

    CHECK_THROWS(parse_catalog_tsv("foo\tbar\nx\ty\n"));
}
