#pragma once

#include "btsupply/catalog.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace btsup {

struct AnalyzerConfig {
    int min_gram = 4;
    int max_gram = 15;
    bool lowercase = true;
    bool ascii_fold = true;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct MatchResult {
    std::string catalog_id;
    double score = 0;
    bool accepted = false;
};

// Edge n-gram analysis: lowercase, fold accents to ASCII, split on
// non-alphanumerics, then emit prefixes of length min_gram..max_gram per
// word. Words shorter than min_gram are kept whole so very short titles
// stay matchable.
std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& cfg = {});

// mean + k_sigma * population-stddev over a sample of best-match scores.
// Throws std::invalid_argument on an empty sample.
double compute_threshold(std::span<const double> scores, double k_sigma);

// In-process inverted index over analyzed catalog titles with BM25 ranking
// (Lucene-style non-negative IDF). Immutable once built.
class TitleIndex {
public:
    static TitleIndex build(std::vector<CatalogEntry> entries, AnalyzerConfig acfg = {},
                            Bm25Params params = {}); // throws on empty list / duplicate id

    std::size_t doc_count() const { return entries_.size(); }
    double avg_doc_length() const { return avgdl_; }
    const CatalogEntry& entry(std::size_t doc) const { return entries_[doc]; }
    const CatalogEntry* entry_by_id(std::string_view catalog_id) const;
    std::optional<std::size_t> doc_by_id(std::string_view catalog_id) const;
    std::uint64_t doc_frequency(std::string_view token) const;
    int doc_length(std::size_t doc) const { return doc_len_[doc]; }

    // BM25 of one document against pre-analyzed query tokens (multiset: a
    // token contributes once per occurrence).
    double score(std::size_t doc, const std::vector<std::string>& query_tokens) const;

    // Top-k matches, descending score, ties by ascending catalog id. The
    // accepted flag compares against the current threshold (unset threshold
    // accepts nothing).
    std::vector<MatchResult> match(std::string_view title, std::size_t top_k) const;

    void set_threshold(double threshold) { threshold_ = threshold; }
    std::optional<double> threshold() const { return threshold_; }

    const AnalyzerConfig& analyzer_config() const { return acfg_; }
    const Bm25Params& params() const { return params_; }

private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    std::vector<CatalogEntry> entries_;
    std::vector<int> doc_len_;
    std::map<std::string, std::vector<Posting>> postings_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    double avgdl_ = 0;
    AnalyzerConfig acfg_;
    Bm25Params params_;
    std::optional<double> threshold_;
};

} // namespace btsup
