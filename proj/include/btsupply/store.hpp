#pragma once

#include "btsupply/ids.hpp"
#include "btsupply/metadata.hpp"
#include "btsupply/release_name.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

struct sqlite3;

namespace btsup {

class StoreError : public std::runtime_error {
public:
    explicit StoreError(const std::string& msg) : std::runtime_error(msg) {}
};

class UnknownFileError : public StoreError {
public:
    explicit UnknownFileError(std::int64_t file_id)
        : StoreError("annotation references unknown file id " + std::to_string(file_id)) {}
};

struct TorrentRecord {
    std::int64_t row_id = 0;
    InfoHash infohash{};
    std::string name;
    std::uint64_t total_size = 0;
    std::int64_t discovered_on = 0; // UTC epoch seconds
    bool inserted = false;          // false when the infohash was already present
};

struct FileRow {
    std::int64_t row_id = 0;
    std::int64_t torrent_id = 0;
    std::string path; // text, or 0x-hex form for encoding failures
    std::uint64_t size = 0;
    bool is_video = false;
    bool encoding_failed = false;
    bool parsed = false;
};

struct MatchAnnotation {
    std::int64_t file_id = 0;
    std::string catalog_id;
    double score = 0;
    bool accepted = false;
    // catalog metadata associated at match time (kept with the row so the
    // export is self-contained)
    std::string catalog_title;
    std::optional<int> catalog_year;
};

struct StoreCounts {
    std::uint64_t torrents = 0;
    std::uint64_t files = 0; // all rows, including encoding failures
    std::uint64_t encoding_failed = 0;
    std::uint64_t video = 0;     // is_video and passed encoding
    std::uint64_t non_video = 0; // passed encoding, not video
    std::uint64_t candidates = 0;
    std::uint64_t accepted = 0;
    std::uint64_t total_bytes = 0;
};

// Single-file relational store in the published dataset's layout:
// torrents(id, info_hash, name, total_size, discovered_on) and
// files(id, torrent_id, path, size), extended with additive side tables for
// classification, parsed names, and match annotations. One writer at a time;
// readers are unrestricted.
class Store {
public:
    static Store open(const std::string& path); // ":memory:" works
    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    ~Store();

    // Idempotent on infohash: rediscovery neither duplicates nor updates
    // discovered_on. Files (and their encoding flags) insert once.
    TorrentRecord upsert_torrent(const TorrentMeta& meta, std::int64_t discovered_on);

    std::vector<FileRow> files_all() const;
    std::optional<TorrentRecord> torrent_by_hash(const InfoHash& ih) const;

    struct FileClassification {
        std::int64_t file_id = 0;
        bool is_video = false;
        std::optional<ParsedName> parsed; // stored for video files
    };
    void write_classifications(std::span<const FileClassification> rows); // transactional

    // (file_id, parsed title) for video files that parsed to a usable title.
    std::vector<std::pair<std::int64_t, std::string>> video_titles() const;

    // All-or-nothing: any unknown file id rolls the batch back.
    std::size_t annotate_matches(std::span<const MatchAnnotation> annotations);
    std::vector<MatchAnnotation> annotations(bool accepted_only) const;

    // One row per accepted match, RFC-4180, deterministic order.
    // Returns the data-row count (header excluded).
    std::size_t export_matched_csv(const std::string& destination) const;

    StoreCounts counts() const;
    std::vector<std::int64_t> discovery_timestamps() const;
    std::vector<std::uint64_t> file_sizes() const;
    // field: quality | language | site | encoder. Descending count, ties
    // alphabetical. Throws StoreError on unknown fields.
    std::vector<std::pair<std::string, std::uint64_t>> field_breakdown(std::string_view field,
                                                                       std::size_t top_k) const;
    // Distinct catalog ids over accepted annotations.
    std::vector<std::string> accepted_catalog_ids() const;

    void put_meta(std::string_view key, std::string_view value);
    std::optional<std::string> get_meta(std::string_view key) const;

    // Test hook: referential-integrity audit; returns problem descriptions.
    std::vector<std::string> integrity_audit() const;

private:
    explicit Store(sqlite3* db) : db_(db) {}
    sqlite3* db_ = nullptr;
};

} // namespace btsup
