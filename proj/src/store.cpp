#include "btsupply/store.hpp"

#include "btsupply/bytes.hpp"

#include "json.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace btsup {

namespace {

using nlohmann::json;

// Minimal RAII over sqlite3_stmt.
class Stmt {
public:
    Stmt(sqlite3* db, const char* sql) {
        if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK)
            throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
    }
    ~Stmt() { sqlite3_finalize(stmt_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& bind(int idx, std::int64_t v) {
        sqlite3_bind_int64(stmt_, idx, v);
        return *this;
    }
    Stmt& bind(int idx, double v) {
        sqlite3_bind_double(stmt_, idx, v);
        return *this;
    }
    Stmt& bind(int idx, std::string_view v) {
        sqlite3_bind_text(stmt_, idx, v.data(), int(v.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Stmt& bind_blob(int idx, std::string_view v) {
        sqlite3_bind_blob(stmt_, idx, v.data(), int(v.size()), SQLITE_TRANSIENT);
        return *this;
    }
    Stmt& bind_null(int idx) {
        sqlite3_bind_null(stmt_, idx);
        return *this;
    }

    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw StoreError(std::string("step failed: ") + sqlite3_errstr(rc));
    }
    void exec() { step(); }

    std::int64_t col_int(int i) const { return sqlite3_column_int64(stmt_, i); }
    double col_double(int i) const { return sqlite3_column_double(stmt_, i); }
    bool col_null(int i) const { return sqlite3_column_type(stmt_, i) == SQLITE_NULL; }
    std::string col_text(int i) const {
        const unsigned char* p = sqlite3_column_text(stmt_, i);
        return p ? std::string(reinterpret_cast<const char*>(p),
                               size_t(sqlite3_column_bytes(stmt_, i)))
                 : std::string{};
    }
    std::string col_blob(int i) const {
        const void* p = sqlite3_column_blob(stmt_, i);
        return p ? std::string(static_cast<const char*>(p), size_t(sqlite3_column_bytes(stmt_, i)))
                 : std::string{};
    }

private:
    sqlite3_stmt* stmt_ = nullptr;
};

void exec_sql(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown sqlite error";
        sqlite3_free(err);
        throw StoreError("exec failed: " + msg);
    }
}

struct Tx {
    sqlite3* db;
    bool done = false;
    explicit Tx(sqlite3* db) : db(db) { exec_sql(db, "BEGIN IMMEDIATE"); }
    void commit() {
        exec_sql(db, "COMMIT");
        done = true;
    }
    ~Tx() {
        if (!done) sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
    }
};

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS torrents (
  id            INTEGER PRIMARY KEY AUTOINCREMENT,
  info_hash     BLOB NOT NULL UNIQUE,
  name          TEXT NOT NULL,
  total_size    INTEGER NOT NULL CHECK (total_size >= 0),
  discovered_on INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS files (
  id         INTEGER PRIMARY KEY AUTOINCREMENT,
  torrent_id INTEGER NOT NULL REFERENCES torrents(id),
  path       TEXT NOT NULL,
  size       INTEGER NOT NULL CHECK (size >= 0)
);
CREATE INDEX IF NOT EXISTS idx_files_torrent ON files(torrent_id);
CREATE TABLE IF NOT EXISTS file_meta (
  file_id         INTEGER PRIMARY KEY REFERENCES files(id),
  encoding_failed INTEGER NOT NULL DEFAULT 0,
  is_video        INTEGER NOT NULL DEFAULT 0,
  parsed          INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS parsed_names (
  file_id       INTEGER PRIMARY KEY REFERENCES files(id),
  title         TEXT,
  year          INTEGER,
  season        INTEGER,
  episode       INTEGER,
  episode_title TEXT,
  resolution    TEXT,
  quality       TEXT,
  codec         TEXT,
  audio         TEXT,
  language      TEXT,
  release_group TEXT,
  site          TEXT,
  extension     TEXT,
  flags         TEXT,
  extras        TEXT
);
CREATE TABLE IF NOT EXISTS match_annotations (
  file_id       INTEGER PRIMARY KEY REFERENCES files(id),
  catalog_id    TEXT NOT NULL,
  score         REAL NOT NULL,
  accepted      INTEGER NOT NULL,
  catalog_title TEXT,
  catalog_year  INTEGER
);
CREATE TABLE IF NOT EXISTS pipeline_meta (
  key   TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
)sql";

std::string csv_cell(std::string_view raw) {
    bool needs_quote = raw.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quote) return std::string(raw);
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace

Store Store::open(const std::string& path) {
    sqlite3* db = nullptr;
    if (sqlite3_open(path.c_str(), &db) != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
        sqlite3_close(db);
        throw StoreError("cannot open store at " + path + ": " + msg);
    }
    try {
        exec_sql(db, "PRAGMA foreign_keys = ON");
        exec_sql(db, kSchema);
    } catch (...) {
        sqlite3_close(db);
        throw;
    }
    return Store(db);
}

Store::Store(Store&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }

Store& Store::operator=(Store&& other) noexcept {
    if (this != &other) {
        if (db_) sqlite3_close(db_);
        db_ = other.db_;
        other.db_ = nullptr;
    }
    return *this;
}

Store::~Store() {
    if (db_) sqlite3_close(db_);
}

TorrentRecord Store::upsert_torrent(const TorrentMeta& meta, std::int64_t discovered_on) {
    Tx tx(db_);
    TorrentRecord rec;
    rec.infohash = meta.infohash;

    {
        Stmt sel(db_, "SELECT id, name, total_size, discovered_on FROM torrents WHERE info_hash = ?1");
        sel.bind_blob(1, meta.infohash.raw());
        if (sel.step()) {
            rec.row_id = sel.col_int(0);
            rec.name = sel.col_text(1);
            rec.total_size = std::uint64_t(sel.col_int(2));
            rec.discovered_on = sel.col_int(3);
            rec.inserted = false;
            tx.commit();
            return rec;
        }
    }

    {
        Stmt ins(db_,
                 "INSERT INTO torrents (info_hash, name, total_size, discovered_on) "
                 "VALUES (?1, ?2, ?3, ?4)");
        ins.bind_blob(1, meta.infohash.raw())
            .bind(2, meta.name_text)
            .bind(3, std::int64_t(meta.total_size))
            .bind(4, discovered_on)
            .exec();
    }
    rec.row_id = sqlite3_last_insert_rowid(db_);
    rec.name = meta.name_text;
    rec.total_size = meta.total_size;
    rec.discovered_on = discovered_on;
    rec.inserted = true;

    for (const auto& f : meta.files) {
        Stmt ins(db_, "INSERT INTO files (torrent_id, path, size) VALUES (?1, ?2, ?3)");
        ins.bind(1, rec.row_id).bind(2, f.path_text).bind(3, std::int64_t(f.size)).exec();
        std::int64_t file_id = sqlite3_last_insert_rowid(db_);
        Stmt meta_ins(db_, "INSERT INTO file_meta (file_id, encoding_failed) VALUES (?1, ?2)");
        meta_ins.bind(1, file_id).bind(2, std::int64_t(f.encoding_failed ? 1 : 0)).exec();
    }
    tx.commit();
    return rec;
}

std::vector<FileRow> Store::files_all() const {
    std::vector<FileRow> out;
    Stmt q(db_,
           "SELECT f.id, f.torrent_id, f.path, f.size, "
           "COALESCE(m.is_video, 0), COALESCE(m.encoding_failed, 0), COALESCE(m.parsed, 0) "
           "FROM files f LEFT JOIN file_meta m ON m.file_id = f.id ORDER BY f.id");
    while (q.step()) {
        FileRow r;
        r.row_id = q.col_int(0);
        r.torrent_id = q.col_int(1);
        r.path = q.col_text(2);
        r.size = std::uint64_t(q.col_int(3));
        r.is_video = q.col_int(4) != 0;
        r.encoding_failed = q.col_int(5) != 0;
        r.parsed = q.col_int(6) != 0;
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<TorrentRecord> Store::torrent_by_hash(const InfoHash& ih) const {
    Stmt q(db_, "SELECT id, name, total_size, discovered_on FROM torrents WHERE info_hash = ?1");
    q.bind_blob(1, ih.raw());
    if (!q.step()) return std::nullopt;
    TorrentRecord rec;
    rec.row_id = q.col_int(0);
    rec.infohash = ih;
    rec.name = q.col_text(1);
    rec.total_size = std::uint64_t(q.col_int(2));
    rec.discovered_on = q.col_int(3);
    return rec;
}

void Store::write_classifications(std::span<const FileClassification> rows) {
    Tx tx(db_);
    for (const auto& row : rows) {
        {
            Stmt chk(db_, "SELECT 1 FROM files WHERE id = ?1");
            chk.bind(1, row.file_id);
            if (!chk.step()) throw UnknownFileError(row.file_id);
        }
        {
            Stmt up(db_,
                    "INSERT INTO file_meta (file_id, is_video, parsed) VALUES (?1, ?2, 1) "
                    "ON CONFLICT(file_id) DO UPDATE SET is_video = ?2, parsed = 1");
            up.bind(1, row.file_id).bind(2, std::int64_t(row.is_video ? 1 : 0)).exec();
        }
        if (row.parsed) {
            const ParsedName& p = *row.parsed;
            json extras = json::array();
            for (const auto& [tok, pos] : p.extras) extras.push_back({{"token", tok}, {"pos", pos}});
            std::string flags;
            for (const auto& f : p.flags) {
                if (!flags.empty()) flags.push_back(',');
                flags += f;
            }
            Stmt up(db_,
                    "INSERT OR REPLACE INTO parsed_names (file_id, title, year, season, episode, "
                    "episode_title, resolution, quality, codec, audio, language, release_group, "
                    "site, extension, flags, extras) "
                    "VALUES (?1,?2,?3,?4,?5,?6,?7,?8,?9,?10,?11,?12,?13,?14,?15,?16)");
            up.bind(1, row.file_id).bind(2, p.title);
            auto bind_opt_int = [&up](int idx, const std::optional<int>& v) {
                if (v) up.bind(idx, std::int64_t(*v));
                else up.bind_null(idx);
            };
            auto bind_opt_text = [&up](int idx, const std::optional<std::string>& v) {
                if (v) up.bind(idx, *v);
                else up.bind_null(idx);
            };
            bind_opt_int(3, p.year);
            bind_opt_int(4, p.season);
            bind_opt_int(5, p.episode);
            bind_opt_text(6, p.episode_title);
            bind_opt_text(7, p.resolution);
            bind_opt_text(8, p.source_quality);
            bind_opt_text(9, p.codec);
            bind_opt_text(10, p.audio);
            bind_opt_text(11, p.language);
            bind_opt_text(12, p.release_group);
            bind_opt_text(13, p.site);
            bind_opt_text(14, p.container_extension);
            up.bind(15, flags);
            up.bind(16, extras.dump());
            up.exec();
        }
    }
    tx.commit();
}

std::vector<std::pair<std::int64_t, std::string>> Store::video_titles() const {
    std::vector<std::pair<std::int64_t, std::string>> out;
    Stmt q(db_,
           "SELECT p.file_id, p.title FROM parsed_names p "
           "JOIN file_meta m ON m.file_id = p.file_id "
           "WHERE m.is_video = 1 AND m.encoding_failed = 0 AND p.title IS NOT NULL "
           "AND length(p.title) > 0 ORDER BY p.file_id");
    while (q.step()) out.emplace_back(q.col_int(0), q.col_text(1));
    return out;
}

std::size_t Store::annotate_matches(std::span<const MatchAnnotation> annotations) {
    Tx tx(db_);
    std::size_t written = 0;
    for (const auto& a : annotations) {
        {
            Stmt chk(db_, "SELECT 1 FROM files WHERE id = ?1");
            chk.bind(1, a.file_id);
            if (!chk.step()) throw UnknownFileError(a.file_id); // rolls back everything
        }
        Stmt up(db_,
                "INSERT OR REPLACE INTO match_annotations "
                "(file_id, catalog_id, score, accepted, catalog_title, catalog_year) "
                "VALUES (?1, ?2, ?3, ?4, ?5, ?6)");
        up.bind(1, a.file_id).bind(2, a.catalog_id).bind(3, a.score)
            .bind(4, std::int64_t(a.accepted ? 1 : 0));
        up.bind(5, a.catalog_title);
        if (a.catalog_year) up.bind(6, std::int64_t(*a.catalog_year));
        else up.bind_null(6);
        up.exec();
        ++written;
    }
    tx.commit();
    return written;
}

std::vector<MatchAnnotation> Store::annotations(bool accepted_only) const {
    std::vector<MatchAnnotation> out;
    const char* sql = accepted_only
                          ? "SELECT file_id, catalog_id, score, accepted, catalog_title, "
                            "catalog_year FROM match_annotations WHERE accepted = 1 ORDER BY file_id"
                          : "SELECT file_id, catalog_id, score, accepted, catalog_title, "
                            "catalog_year FROM match_annotations ORDER BY file_id";
    Stmt q(db_, sql);
    while (q.step()) {
        MatchAnnotation a;
        a.file_id = q.col_int(0);
        a.catalog_id = q.col_text(1);
        a.score = q.col_double(2);
        a.accepted = q.col_int(3) != 0;
        a.catalog_title = q.col_text(4);
        if (!q.col_null(5)) a.catalog_year = int(q.col_int(5));
        out.push_back(std::move(a));
    }
    return out;
}

std::size_t Store::export_matched_csv(const std::string& destination) const {
    std::ofstream out(destination, std::ios::binary);
    if (!out) throw StoreError("cannot write csv to " + destination);

    out << "infohash,path,size,parsed_title,parsed_year,season,episode,resolution,quality,"
           "codec,language,release_group,site,catalog_id,catalog_title,catalog_year,score\r\n";

    Stmt q(db_,
           "SELECT lower(hex(t.info_hash)), f.path, f.size, "
           "p.title, p.year, p.season, p.episode, p.resolution, p.quality, p.codec, p.language, "
           "p.release_group, p.site, a.catalog_id, a.catalog_title, a.catalog_year, a.score "
           "FROM match_annotations a "
           "JOIN files f ON f.id = a.file_id "
           "JOIN torrents t ON t.id = f.torrent_id "
           "LEFT JOIN parsed_names p ON p.file_id = a.file_id "
           "WHERE a.accepted = 1 "
           "ORDER BY lower(hex(t.info_hash)), f.path, f.id");
    std::size_t rows = 0;
    while (q.step()) {
        std::string line;
        for (int c = 0; c < 17; ++c) {
            if (c) line.push_back(',');
            if (q.col_null(c)) continue;
            if (c == 16) {
                std::ostringstream s;
                s.precision(6);
                s << std::fixed << q.col_double(c);
                line += csv_cell(s.str());
            } else {
                line += csv_cell(q.col_text(c));
            }
        }
        out << line << "\r\n";
        ++rows;
    }
    out.flush();
    if (!out) throw StoreError("i/o failure writing " + destination);
    return rows;
}

StoreCounts Store::counts() const {
    StoreCounts c;
    auto one = [this](const char* sql) {
        Stmt q(db_, sql);
        q.step();
        return std::uint64_t(q.col_int(0));
    };
    c.torrents = one("SELECT COUNT(*) FROM torrents");
    c.files = one("SELECT COUNT(*) FROM files");
    c.encoding_failed =
        one("SELECT COUNT(*) FROM file_meta WHERE encoding_failed = 1");
    c.video = one("SELECT COUNT(*) FROM file_meta WHERE is_video = 1 AND encoding_failed = 0");
    c.non_video =
        one("SELECT COUNT(*) FROM files f LEFT JOIN file_meta m ON m.file_id = f.id "
            "WHERE COALESCE(m.is_video, 0) = 0 AND COALESCE(m.encoding_failed, 0) = 0");
    c.candidates = one("SELECT COUNT(*) FROM match_annotations");
    c.accepted = one("SELECT COUNT(*) FROM match_annotations WHERE accepted = 1");
    c.total_bytes = one("SELECT COALESCE(SUM(total_size), 0) FROM torrents");
    return c;
}

std::vector<std::int64_t> Store::discovery_timestamps() const {
    std::vector<std::int64_t> out;
    Stmt q(db_, "SELECT discovered_on FROM torrents ORDER BY discovered_on, id");
    while (q.step()) out.push_back(q.col_int(0));
    return out;
}

std::vector<std::uint64_t> Store::file_sizes() const {
    std::vector<std::uint64_t> out;
    Stmt q(db_, "SELECT size FROM files ORDER BY id");
    while (q.step()) out.push_back(std::uint64_t(q.col_int(0)));
    return out;
}

std::vector<std::pair<std::string, std::uint64_t>>
Store::field_breakdown(std::string_view field, std::size_t top_k) const {
    std::string column;
    if (field == "quality") column = "quality";
    else if (field == "language") column = "language";
    else if (field == "site") column = "site";
    else if (field == "encoder") column = "release_group";
    else throw StoreError("unknown breakdown field: " + std::string(field));

    std::string sql = "SELECT " + column + ", COUNT(*) AS n FROM parsed_names WHERE " + column +
                      " IS NOT NULL AND length(" + column +
                      ") > 0 GROUP BY " + column + " ORDER BY n DESC, " + column + " ASC";
    Stmt q(db_, sql.c_str());
    std::vector<std::pair<std::string, std::uint64_t>> out;
    while (q.step() && out.size() < top_k)
        out.emplace_back(q.col_text(0), std::uint64_t(q.col_int(1)));
    return out;
}

std::vector<std::string> Store::accepted_catalog_ids() const {
    std::vector<std::string> out;
    Stmt q(db_,
           "SELECT DISTINCT catalog_id FROM match_annotations WHERE accepted = 1 ORDER BY catalog_id");
    while (q.step()) out.push_back(q.col_text(0));
    return out;
}

void Store::put_meta(std::string_view key, std::string_view value) {
    Stmt q(db_, "INSERT OR REPLACE INTO pipeline_meta (key, value) VALUES (?1, ?2)");
    q.bind(1, key).bind(2, value).exec();
}

std::optional<std::string> Store::get_meta(std::string_view key) const {
    Stmt q(db_, "SELECT value FROM pipeline_meta WHERE key = ?1");
    q.bind(1, key);
    if (!q.step()) return std::nullopt;
    return q.col_text(0);
}

std::vector<std::string> Store::integrity_audit() const {
    std::vector<std::string> problems;
    auto check = [&](const char* sql, const char* what) {
        Stmt q(db_, sql);
        q.step();
        if (q.col_int(0) != 0)
            problems.push_back(std::string(what) + ": " + std::to_string(q.col_int(0)));
    };
    check("SELECT COUNT(*) FROM files f LEFT JOIN torrents t ON t.id = f.torrent_id "
          "WHERE t.id IS NULL",
          "orphan files");
    check("SELECT COUNT(*) FROM file_meta m LEFT JOIN files f ON f.id = m.file_id "
          "WHERE f.id IS NULL",
          "orphan file_meta");
    check("SELECT COUNT(*) FROM parsed_names p LEFT JOIN files f ON f.id = p.file_id "
          "WHERE f.id IS NULL",
          "orphan parsed_names");
    check("SELECT COUNT(*) FROM match_annotations a LEFT JOIN files f ON f.id = a.file_id "
          "WHERE f.id IS NULL",
          "orphan annotations");
    check("SELECT COUNT(*) FROM torrents t WHERE t.total_size <> "
          "(SELECT COALESCE(SUM(size), 0) FROM files WHERE torrent_id = t.id)",
          "total_size mismatches");
    return problems;
}

} // namespace btsup
