#pragma once

#include "btsupply/catalog.hpp"
#include "btsupply/store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace btsup {

struct SummaryStats {
    std::uint64_t torrents = 0;
    std::uint64_t files_total = 0;      // all files, including encoding failures
    std::uint64_t files_passed = 0;     // passed encoding checks
    std::uint64_t encoding_failures = 0;
    std::uint64_t video = 0;
    std::uint64_t non_video = 0;
    std::uint64_t candidates = 0;       // files with a best match recorded
    std::uint64_t accepted = 0;         // of which above threshold
    double match_rate_pct = 0;          // 100 * candidates / video
    double final_match_rate_pct = 0;    // 100 * accepted / video
    double mean_files_per_torrent = 0;  // files_total / torrents
    std::uint64_t total_bytes = 0;
};

SummaryStats summarize(const Store& store);

enum class WeekStatus { down, degraded, normal };

// A week is down when nothing was discovered and degraded below 10,000
// discoveries.
inline constexpr std::uint64_t kDegradedWeekThreshold = 10000;

struct WeekBucket {
    int iso_year = 0;
    int iso_week = 0;
    std::int64_t week_start = 0; // Monday 00:00 UTC, epoch seconds
    std::uint64_t count = 0;
    WeekStatus status = WeekStatus::down;
};

struct WeeklyReport {
    std::vector<WeekBucket> weeks; // consecutive ISO weeks, first to last discovery
    double uptime_nondown_pct = 0;
    double uptime_nondegraded_pct = 0; // stricter reading: degraded counts as downtime
};

WeeklyReport weekly_discovery(const Store& store);

struct SizeBin {
    double lo = 0, hi = 0; // bytes
    std::uint64_t count = 0;
    double cdf = 0; // cumulative fraction at the bin's upper edge
};

struct SizeDistribution {
    std::vector<SizeBin> bins;
    std::uint64_t total = 0;
};

// Logarithmic bins over [min,max]. Throws StoreError when the store has no
// files.
SizeDistribution size_distribution(const Store& store, int log_bins);

// quality | language | site | encoder straight from parsed names.
std::vector<std::pair<std::string, std::uint64_t>> breakdown(const Store& store,
                                                             std::string_view field,
                                                             std::size_t top_k);

// genre requires the catalog: counts genres of accepted-matched titles.
std::vector<std::pair<std::string, std::uint64_t>> genre_breakdown(
    const Store& store, const std::vector<CatalogEntry>& catalog, std::size_t top_k);

struct YearCoverage {
    int year = 0;
    std::uint64_t matched_titles = 0;
    std::uint64_t catalog_titles = 0;
    double coverage_pct = 0;
};

// Distinct accepted-matched titles per release year against the catalog;
// years absent from the catalog are excluded.
std::vector<YearCoverage> coverage_by_year(const Store& store,
                                           const std::vector<CatalogEntry>& catalog);

// ISO-8601 week helpers (UTC).
struct IsoWeek {
    int year = 0;
    int week = 0;
    std::int64_t monday_epoch = 0;
};
IsoWeek iso_week_of(std::int64_t epoch_seconds);

// Writes the full report set (CSV + JSON + SVG) into out_dir.
// Returns the list of files written (paths relative to out_dir).
std::vector<std::string> write_reports(const Store& store,
                                       const std::vector<CatalogEntry>* catalog,
                                       const std::string& out_dir);

} // namespace btsup
