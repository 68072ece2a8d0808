#include "btsupply/title_match.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace btsup {

namespace {

// ASCII folding for the Latin-1 supplement and the common Latin Extended-A
// letters. Unmapped non-ASCII code points act as word separators.
void fold_append(uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(char(cp));
        return;
    }
    struct Range {
        uint32_t lo, hi;
        const char* rep;
    };
    static const Range kRanges[] = {
        {0x00c0, 0x00c5, "a"}, {0x00c6, 0x00c6, "ae"}, {0x00c7, 0x00c7, "c"},
        {0x00c8, 0x00cb, "e"}, {0x00cc, 0x00cf, "i"},  {0x00d0, 0x00d0, "d"},
        {0x00d1, 0x00d1, "n"}, {0x00d2, 0x00d6, "o"},  {0x00d8, 0x00d8, "o"},
        {0x00d9, 0x00dc, "u"}, {0x00dd, 0x00dd, "y"},  {0x00df, 0x00df, "ss"},
        {0x00e0, 0x00e5, "a"}, {0x00e6, 0x00e6, "ae"}, {0x00e7, 0x00e7, "c"},
        {0x00e8, 0x00eb, "e"}, {0x00ec, 0x00ef, "i"},  {0x00f0, 0x00f0, "d"},
        {0x00f1, 0x00f1, "n"}, {0x00f2, 0x00f6, "o"},  {0x00f8, 0x00f8, "o"},
        {0x00f9, 0x00fc, "u"}, {0x00fd, 0x00fe, "y"},  {0x00ff, 0x00ff, "y"},
        {0x0100, 0x0105, "a"}, {0x0106, 0x010d, "c"},  {0x010e, 0x0111, "d"},
        {0x0112, 0x011b, "e"}, {0x011c, 0x0123, "g"},  {0x0124, 0x0127, "h"},
        {0x0128, 0x0131, "i"}, {0x0134, 0x0135, "j"},  {0x0136, 0x0137, "k"},
        {0x0139, 0x0142, "l"}, {0x0143, 0x0148, "n"},  {0x014c, 0x0151, "o"},
        {0x0152, 0x0153, "oe"}, {0x0154, 0x0159, "r"}, {0x015a, 0x0161, "s"},
        {0x0162, 0x0167, "t"}, {0x0168, 0x0173, "u"},  {0x0174, 0x0175, "w"},
        {0x0176, 0x0178, "y"}, {0x0179, 0x017e, "z"},
    };
    for (const auto& r : kRanges) {
        if (cp >= r.lo && cp <= r.hi) {
            out.append(r.rep);
            return;
        }
    }
    out.push_back(' '); // unmapped: separator
}

// Decodes UTF-8 leniently; invalid bytes become separators.
std::string fold_to_ascii(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        uint32_t cp = 0;
        int len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xe0) == 0xc0 && i + 1 < s.size()) {
            cp = (uint32_t(c & 0x1f) << 6) | (uint32_t(s[i + 1]) & 0x3f);
            len = 2;
        } else if ((c & 0xf0) == 0xe0 && i + 2 < s.size()) {
            cp = (uint32_t(c & 0x0f) << 12) | ((uint32_t(s[i + 1]) & 0x3f) << 6) |
                 (uint32_t(s[i + 2]) & 0x3f);
            len = 3;
        } else if ((c & 0xf8) == 0xf0 && i + 3 < s.size()) {
            cp = (uint32_t(c & 0x07) << 18) | ((uint32_t(s[i + 1]) & 0x3f) << 12) |
                 ((uint32_t(s[i + 2]) & 0x3f) << 6) | (uint32_t(s[i + 3]) & 0x3f);
            len = 4;
        } else {
            cp = ' ';
        }
        fold_append(cp, out);
        i += size_t(len);
    }
    return out;
}

} // namespace

std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& cfg) {
    std::string folded = cfg.ascii_fold ? fold_to_ascii(text) : std::string(text);
    if (cfg.lowercase)
        std::transform(folded.begin(), folded.end(), folded.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });

    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < folded.size()) {
        while (i < folded.size() && !std::isalnum(uint8_t(folded[i]))) ++i;
        size_t start = i;
        while (i < folded.size() && std::isalnum(uint8_t(folded[i]))) ++i;
        if (i == start) continue;
        std::string_view word(folded.data() + start, i - start);
        int len = int(word.size());
        if (len < cfg.min_gram) {
            tokens.emplace_back(word);
        } else {
            int upto = std::min(cfg.max_gram, len);
            for (int g = cfg.min_gram; g <= upto; ++g) tokens.emplace_back(word.substr(0, size_t(g)));
        }
    }
    return tokens;
}

double compute_threshold(std::span<const double> scores, double k_sigma) {
    if (scores.empty()) throw std::invalid_argument("threshold needs a non-empty sample");
    double mean = 0;
    for (double s : scores) mean += s;
    mean /= double(scores.size());
    double var = 0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= double(scores.size()); // population variance
    return mean + k_sigma * std::sqrt(var);
}

TitleIndex TitleIndex::build(std::vector<CatalogEntry> entries, AnalyzerConfig acfg,
                             Bm25Params params) {
    if (entries.empty()) throw std::invalid_argument("title index needs at least one entry");
    if (acfg.min_gram < 1 || acfg.min_gram > acfg.max_gram)
        throw std::invalid_argument("analyzer gram bounds invalid");
    TitleIndex idx;
    idx.acfg_ = acfg;
    idx.params_ = params;
    idx.entries_ = std::move(entries);
    idx.doc_len_.resize(idx.entries_.size());

    double total_len = 0;
    for (size_t d = 0; d < idx.entries_.size(); ++d) {
        const CatalogEntry& e = idx.entries_[d];
        if (!idx.by_id_.emplace(e.id, d).second)
            throw std::invalid_argument("duplicate catalog id: " + e.id);
        auto tokens = analyze(e.title, acfg);
        idx.doc_len_[d] = int(tokens.size());
        total_len += double(tokens.size());
        std::map<std::string, uint32_t> counts;
        for (auto& t : tokens) counts[t]++;
        for (auto& [tok, tf] : counts) idx.postings_[tok].push_back({uint32_t(d), tf});
    }
    idx.avgdl_ = total_len / double(idx.entries_.size());
    return idx;
}

const CatalogEntry* TitleIndex::entry_by_id(std::string_view catalog_id) const {
    auto it = by_id_.find(catalog_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::optional<std::size_t> TitleIndex::doc_by_id(std::string_view catalog_id) const {
    auto it = by_id_.find(catalog_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t TitleIndex::doc_frequency(std::string_view token) const {
    auto it = postings_.find(std::string(token));
    return it == postings_.end() ? 0 : it->second.size();
}

double TitleIndex::score(std::size_t doc, const std::vector<std::string>& query_tokens) const {
    const double N = double(entries_.size());
    const double dl = double(doc_len_[doc]);
    double total = 0;
    for (const auto& tok : query_tokens) {
        auto it = postings_.find(tok);
        if (it == postings_.end()) continue;
        const auto& plist = it->second;
        auto pit = std::lower_bound(plist.begin(), plist.end(), uint32_t(doc),
                                    [](const Posting& p, uint32_t d) { return p.doc < d; });
        if (pit == plist.end() || pit->doc != doc) continue;
        double df = double(plist.size());
        double tf = double(pit->tf);
        double idf = std::log(1.0 + (N - df + 0.5) / (df + 0.5));
        double tfn = tf * (params_.k1 + 1.0) /
                     (tf + params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_));
        total += idf * tfn;
    }
    return total;
}

std::vector<MatchResult> TitleIndex::match(std::string_view title, std::size_t top_k) const {
    auto tokens = analyze(title, acfg_);
    std::vector<MatchResult> out;
    if (tokens.empty() || top_k == 0) return out;

    std::unordered_map<uint32_t, double> scores;
    const double N = double(entries_.size());
    for (const auto& tok : tokens) {
        auto it = postings_.find(tok);
        if (it == postings_.end()) continue;
        double df = double(it->second.size());
        double idf = std::log(1.0 + (N - df + 0.5) / (df + 0.5));
        for (const Posting& p : it->second) {
            double dl = double(doc_len_[p.doc]);
            double tf = double(p.tf);
            double tfn = tf * (params_.k1 + 1.0) /
                         (tf + params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_));
            scores[p.doc] += idf * tfn;
        }
    }

    std::vector<std::pair<uint32_t, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return entries_[a.first].id < entries_[b.first].id;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);

    out.reserve(ranked.size());
    for (const auto& [doc, s] : ranked) {
        MatchResult r;
        r.catalog_id = entries_[doc].id;
        r.score = s;
        r.accepted = threshold_.has_value() && s >= *threshold_;
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace btsup
