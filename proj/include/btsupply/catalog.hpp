#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace btsup {

// One reference title. Mirrors the indexed record of a film/TV catalog.
struct CatalogEntry {
    std::string id;
    std::string title;
    std::optional<int> year;
    std::string kind; // movie | tv-series | episode (IMDb titleType values accepted)
    std::vector<std::string> genres;
};

// Tab-separated with a header row. Columns are matched by name so both the
// native layout (id, title, year, kind, genres) and IMDb title.basics dumps
// (tconst, titleType, primaryTitle, startYear, genres) load directly.
// "\N" and empty cells mean missing. Throws std::runtime_error on a header
// without id/title columns.
std::vector<CatalogEntry> parse_catalog_tsv(std::string_view text);
std::vector<CatalogEntry> load_catalog_tsv(const std::string& path);

bool catalog_kind_is_tv(std::string_view kind);

} // namespace btsup
