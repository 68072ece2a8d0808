#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace btsup {

enum class TokenClass { resolution, quality, codec, audio, language, flag };

// Token vocabularies for the tag classes, loadable from a versioned data
// file (one token class per line: "class: TOKEN TOKEN ALIAS=CANONICAL").
// Matching is case-insensitive; the canonical spelling is what parse reports.
class TokenVocabulary {
public:
    static TokenVocabulary builtin();
    static TokenVocabulary load_file(const std::string& path); // throws on unreadable/bad syntax
    static TokenVocabulary parse_text(std::string_view text);

    void add(TokenClass cls, std::string_view token, std::string_view canonical);
    void add_video_extension(std::string_view ext);
    void add_other_extension(std::string_view ext);

    struct Hit {
        TokenClass cls;
        std::string canonical;
    };
    std::optional<Hit> lookup(std::string_view token) const;
    bool is_video_extension(std::string_view ext) const;   // case-insensitive
    bool is_known_extension(std::string_view ext) const;
    const std::set<std::string>& video_extensions() const { return video_ext_; }
    int version() const { return version_; }

private:
    std::map<std::string, Hit> tokens_; // lowercased token -> hit
    std::set<std::string> video_ext_;   // lowercased
    std::set<std::string> other_ext_;
    int version_ = 1;
};

struct FileClass {
    bool is_video = false;
    std::string extension; // lowercased final extension, empty when none
};

struct ParsedName {
    std::string title;
    std::optional<int> year;
    std::optional<int> season;
    std::optional<int> episode;
    std::optional<std::string> episode_title;
    std::optional<std::string> resolution;
    std::optional<std::string> source_quality;
    std::optional<std::string> codec;
    std::optional<std::string> audio;
    std::optional<std::string> language;
    std::optional<std::string> release_group;
    std::optional<std::string> site;
    std::optional<std::string> container_extension;
    std::set<std::string> flags; // repack, proper, internal, readnfo, unrated,
                                 // remastered, directorsCut, internationalCut,
                                 // documentary, 3d, widescreen, hdr
    std::vector<std::pair<std::string, int>> extras; // unconsumed token -> token index

    // Canonical dotted reassembly in template order; parse(render()) recovers
    // every populated field for template-conforming values.
    std::string render() const;
};

// Scene release-name parser: greedy right-to-left group recognition, then tag
// tokens, leaving the maximal untagged leading span as the title. Dots,
// underscores and spaces are equivalent delimiters. parse never fails;
// unknown tokens land in extras.
class ReleaseNameParser {
public:
    ReleaseNameParser();
    explicit ReleaseNameParser(TokenVocabulary vocab);

    FileClass classify_file(std::string_view path) const;
    ParsedName parse(std::string_view name) const;

    const TokenVocabulary& vocabulary() const { return vocab_; }
    void set_year_bounds(int min_year, int max_year);

private:
    TokenVocabulary vocab_;
    int year_min_ = 1888;
    int year_max_; // defaults to current year + 1
};

} // namespace btsup
