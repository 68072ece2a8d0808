#include "btsupply/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace btsup {

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return out;
}

bool missing(const std::string& cell) { return cell.empty() || cell == "\\N"; }

int find_column(const std::vector<std::string>& header,
                std::initializer_list<std::string_view> names) {
    for (size_t i = 0; i < header.size(); ++i)
        for (auto n : names)
            if (header[i] == n) return int(i);
    return -1;
}

} // namespace

bool catalog_kind_is_tv(std::string_view kind) {
    return kind.find("tv") != std::string_view::npos ||
           kind.find("Series") != std::string_view::npos ||
           kind.find("series") != std::string_view::npos ||
           kind.find("episode") != std::string_view::npos ||
           kind.find("Episode") != std::string_view::npos;
}

std::vector<CatalogEntry> parse_catalog_tsv(std::string_view text) {
    std::vector<CatalogEntry> out;
    size_t pos = 0;
    bool header_done = false;
    int col_id = -1, col_title = -1, col_year = -1, col_kind = -1, col_genres = -1;

    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        auto cells = split_tabs(line);
        if (!header_done) {
            col_id = find_column(cells, {"id", "tconst"});
            col_title = find_column(cells, {"title", "primaryTitle"});
            col_year = find_column(cells, {"year", "startYear"});
            col_kind = find_column(cells, {"kind", "titleType"});
            col_genres = find_column(cells, {"genres"});
            if (col_id < 0 || col_title < 0)
                throw std::runtime_error("catalog header must name id/tconst and title/primaryTitle columns");
            header_done = true;
            continue;
        }

        auto cell = [&cells](int idx) -> std::string {
            return idx >= 0 && size_t(idx) < cells.size() ? cells[idx] : std::string{};
        };

        CatalogEntry e;
        e.id = cell(col_id);
        e.title = cell(col_title);
        if (missing(e.id) || missing(e.title)) continue;
        std::string year = cell(col_year);
        if (!missing(year)) {
            int y = 0;
            auto [p, ec] = std::from_chars(year.data(), year.data() + year.size(), y);
            if (ec == std::errc{} && p == year.data() + year.size()) e.year = y;
        }
        std::string kind = cell(col_kind);
        if (!missing(kind)) e.kind = kind;
        std::string genres = cell(col_genres);
        if (!missing(genres)) {
            size_t gstart = 0;
            while (gstart <= genres.size()) {
                size_t comma = genres.find(',', gstart);
                std::string g = comma == std::string::npos ? genres.substr(gstart)
                                                           : genres.substr(gstart, comma - gstart);
                if (!g.empty()) e.genres.push_back(g);
                if (comma == std::string::npos) break;
                gstart = comma + 1;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<CatalogEntry> load_catalog_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open catalog file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    return parse_catalog_tsv(text);
}

} // namespace btsup
