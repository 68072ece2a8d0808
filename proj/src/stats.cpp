#include "btsupply/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace btsup {

namespace {

using nlohmann::json;

// Days-to-civil per Howard Hinnant's algorithms.
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = unsigned(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = std::int64_t(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = int(yy + (m <= 2));
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = unsigned(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + std::int64_t(doe) - 719468;
}

int iso_weeks_in_year(int y) {
    auto p = [](int year) { return (year + year / 4 - year / 100 + year / 400) % 7; };
    return 52 + ((p(y) == 4 || p(y - 1) == 3) ? 1 : 0);
}

std::string format_pct(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << v;
    return s.str();
}

std::string week_status_name(WeekStatus s) {
    switch (s) {
    case WeekStatus::down: return "down";
    case WeekStatus::degraded: return "degraded";
    case WeekStatus::normal: return "normal";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Tiny SVG emitters for the report plots.

std::string svg_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                          const std::vector<std::string>& colors, const std::string& title) {
    const int w = 900, h = 360, mx = 60, my = 40;
    double maxv = 1;
    for (const auto& [_, v] : bars) maxv = std::max(maxv, v);
    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    s << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
    double bw = bars.empty() ? 1.0 : double(w - 2 * mx) / double(bars.size());
    for (size_t i = 0; i < bars.size(); ++i) {
        double bh = (h - 2 * my) * bars[i].second / maxv;
        s << "<rect x='" << mx + double(i) * bw << "' y='" << h - my - bh << "' width='"
          << std::max(1.0, bw - 1) << "' height='" << bh << "' fill='"
          << (colors.empty() ? std::string("#4878a8") : colors[i % colors.size()]) << "'/>\n";
    }
    s << "<line x1='" << mx << "' y1='" << h - my << "' x2='" << w - mx << "' y2='" << h - my
      << "' stroke='black'/>\n";
    if (!bars.empty()) {
        s << "<text x='" << mx << "' y='" << h - my + 16 << "' font-size='11'>" << bars.front().first
          << "</text>\n";
        s << "<text x='" << w - mx << "' y='" << h - my + 16
          << "' text-anchor='end' font-size='11'>" << bars.back().first << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_line_overlay(const std::vector<double>& ys, const std::string& color) {
    // polyline in the same 900x360 viewport as svg_bar_chart
    const int w = 900, h = 360, mx = 60, my = 40;
    if (ys.empty()) return {};
    double maxv = 1e-12;
    for (double v : ys) maxv = std::max(maxv, v);
    std::ostringstream s;
    s << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (size_t i = 0; i < ys.size(); ++i) {
        double x = mx + (double(i) + 0.5) * double(w - 2 * mx) / double(ys.size());
        double y = h - my - (h - 2 * my) * ys[i] / maxv;
        s << x << "," << y << " ";
    }
    s << "'/>\n";
    return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw StoreError("cannot write report file " + p.string());
    out << content;
}

} // namespace

IsoWeek iso_week_of(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    if (epoch_seconds < 0 && epoch_seconds % 86400 != 0) --days;
    int wd = int(((days % 7) + 10) % 7 + 1); // 1970-01-01 is a Thursday; Mon=1..Sun=7
    std::int64_t monday = days - (wd - 1);

    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    std::int64_t jan1 = days_from_civil(y, 1, 1);
    int ordinal = int(days - jan1) + 1;

    IsoWeek out;
    out.monday_epoch = monday * 86400;
    int w = (ordinal - wd + 10) / 7;
    if (w < 1) {
        out.year = y - 1;
        out.week = iso_weeks_in_year(y - 1);
    } else if (w > iso_weeks_in_year(y)) {
        out.year = y + 1;
        out.week = 1;
    } else {
        out.year = y;
        out.week = w;
    }
    return out;
}

SummaryStats summarize(const Store& store) {
    StoreCounts c = store.counts();
    SummaryStats s;
    s.torrents = c.torrents;
    s.files_total = c.files;
    s.encoding_failures = c.encoding_failed;
    s.files_passed = c.files - c.encoding_failed;
    s.video = c.video;
    s.non_video = c.non_video;
    s.candidates = c.candidates;
    s.accepted = c.accepted;
    s.total_bytes = c.total_bytes;
    if (c.video > 0) {
        s.match_rate_pct = 100.0 * double(c.candidates) / double(c.video);
        s.final_match_rate_pct = 100.0 * double(c.accepted) / double(c.video);
    }
    if (c.torrents > 0) s.mean_files_per_torrent = double(c.files) / double(c.torrents);
    return s;
}

WeeklyReport weekly_discovery(const Store& store) {
    WeeklyReport report;
    auto stamps = store.discovery_timestamps();
    if (stamps.empty()) return report;

    std::map<std::int64_t, std::uint64_t> per_monday;
    for (auto ts : stamps) per_monday[iso_week_of(ts).monday_epoch]++;

    std::int64_t first = per_monday.begin()->first;
    std::int64_t last = per_monday.rbegin()->first;
    std::uint64_t up = 0, strict_up = 0, total = 0;
    for (std::int64_t monday = first; monday <= last; monday += 7 * 86400) {
        WeekBucket b;
        IsoWeek wk = iso_week_of(monday);
        b.iso_year = wk.year;
        b.iso_week = wk.week;
        b.week_start = monday;
        auto it = per_monday.find(monday);
        b.count = it == per_monday.end() ? 0 : it->second;
        b.status = b.count == 0                        ? WeekStatus::down
                   : b.count < kDegradedWeekThreshold ? WeekStatus::degraded
                                                      : WeekStatus::normal;
        if (b.status != WeekStatus::down) ++up;
        if (b.status == WeekStatus::normal) ++strict_up;
        ++total;
        report.weeks.push_back(b);
    }
    report.uptime_nondown_pct = 100.0 * double(up) / double(total);
    report.uptime_nondegraded_pct = 100.0 * double(strict_up) / double(total);
    return report;
}

SizeDistribution size_distribution(const Store& store, int log_bins) {
    auto sizes = store.file_sizes();
    if (sizes.empty()) throw StoreError("size distribution over an empty store");
    if (log_bins < 1) throw StoreError("log_bins must be positive");

    double lo = double(*std::min_element(sizes.begin(), sizes.end()));
    double hi = double(*std::max_element(sizes.begin(), sizes.end()));
    lo = std::max(lo, 1.0);
    hi = std::max(hi, lo);

    SizeDistribution dist;
    dist.total = sizes.size();
    double llo = std::log10(lo), lhi = std::log10(hi);
    int bins = lhi == llo ? 1 : log_bins;
    double width = lhi == llo ? 1.0 : (lhi - llo) / double(bins);

    dist.bins.resize(size_t(bins));
    for (int i = 0; i < bins; ++i) {
        dist.bins[size_t(i)].lo = std::pow(10.0, llo + width * i);
        dist.bins[size_t(i)].hi = std::pow(10.0, llo + width * (i + 1));
    }
    for (auto v : sizes) {
        double x = std::log10(std::max<double>(1.0, double(v)));
        int idx = lhi == llo ? 0 : int((x - llo) / width);
        idx = std::clamp(idx, 0, bins - 1);
        dist.bins[size_t(idx)].count++;
    }
    std::uint64_t cum = 0;
    for (auto& b : dist.bins) {
        cum += b.count;
        b.cdf = double(cum) / double(dist.total);
    }
    return dist;
}

std::vector<std::pair<std::string, std::uint64_t>> breakdown(const Store& store,
                                                             std::string_view field,
                                                             std::size_t top_k) {
    return store.field_breakdown(field, top_k);
}

std::vector<std::pair<std::string, std::uint64_t>> genre_breakdown(
    const Store& store, const std::vector<CatalogEntry>& catalog, std::size_t top_k) {
    std::map<std::string, const CatalogEntry*> by_id;
    for (const auto& e : catalog) by_id[e.id] = &e;
    std::map<std::string, std::uint64_t> counts;
    for (const auto& a : store.annotations(true)) {
        auto it = by_id.find(a.catalog_id);
        if (it == by_id.end()) continue;
        for (const auto& g : it->second->genres) counts[g]++;
    }
    std::vector<std::pair<std::string, std::uint64_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.size() > top_k) out.resize(top_k);
    return out;
}

std::vector<YearCoverage> coverage_by_year(const Store& store,
                                           const std::vector<CatalogEntry>& catalog) {
    std::map<int, std::uint64_t> catalog_by_year;
    std::map<std::string, int> id_year;
    for (const auto& e : catalog) {
        if (!e.year) continue;
        catalog_by_year[*e.year]++;
        id_year[e.id] = *e.year;
    }
    std::map<int, std::set<std::string>> matched_by_year;
    for (const auto& id : store.accepted_catalog_ids()) {
        auto it = id_year.find(id);
        if (it == id_year.end()) continue; // year absent from catalog: excluded
        matched_by_year[it->second].insert(id);
    }
    std::vector<YearCoverage> out;
    for (const auto& [year, total] : catalog_by_year) {
        YearCoverage c;
        c.year = year;
        c.catalog_titles = total;
        auto it = matched_by_year.find(year);
        c.matched_titles = it == matched_by_year.end() ? 0 : it->second.size();
        c.coverage_pct = total == 0 ? 0 : 100.0 * double(c.matched_titles) / double(total);
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> write_reports(const Store& store,
                                       const std::vector<CatalogEntry>* catalog,
                                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(fs::path(out_dir) / name, content);
        written.push_back(name);
    };

    // summary
    SummaryStats s = summarize(store);
    json sj = {
        {"torrents", s.torrents},
        {"files_total", s.files_total},
        {"files_passed_encoding", s.files_passed},
        {"encoding_failures", s.encoding_failures},
        {"video_files", s.video},
        {"non_video_files", s.non_video},
        {"candidate_matches", s.candidates},
        {"accepted_matches", s.accepted},
        {"match_rate_pct", s.match_rate_pct},
        {"final_match_rate_pct", s.final_match_rate_pct},
        {"mean_files_per_torrent", s.mean_files_per_torrent},
        {"total_bytes", s.total_bytes},
    };
    emit("summary.json", sj.dump(2) + "\n");
    {
        std::ostringstream csv;
        csv << "statistic,count\n";
        csv << "torrents," << s.torrents << "\n";
        csv << "files_total," << s.files_total << "\n";
        csv << "files_passed_encoding," << s.files_passed << "\n";
        csv << "encoding_failures," << s.encoding_failures << "\n";
        csv << "video_files," << s.video << "\n";
        csv << "non_video_files," << s.non_video << "\n";
        csv << "candidate_matches," << s.candidates << "\n";
        csv << "accepted_matches," << s.accepted << "\n";
        csv << "match_rate_pct," << format_pct(s.match_rate_pct) << "\n";
        csv << "final_match_rate_pct," << format_pct(s.final_match_rate_pct) << "\n";
        csv << "mean_files_per_torrent," << format_pct(s.mean_files_per_torrent) << "\n";
        csv << "total_bytes," << s.total_bytes << "\n";
        emit("summary.csv", csv.str());
    }

    // weekly discovery
    WeeklyReport weekly = weekly_discovery(store);
    {
        std::ostringstream csv;
        csv << "iso_year,iso_week,week_start_epoch,torrents_discovered,status\n";
        std::vector<std::pair<std::string, double>> bars;
        std::vector<std::string> colors;
        for (const auto& w : weekly.weeks) {
            csv << w.iso_year << "," << w.iso_week << "," << w.week_start << "," << w.count << ","
                << week_status_name(w.status) << "\n";
            bars.emplace_back(std::to_string(w.iso_year) + "-W" + std::to_string(w.iso_week),
                              double(w.count));
            colors.push_back(w.status == WeekStatus::down       ? "#c03030"
                             : w.status == WeekStatus::degraded ? "#e08030"
                                                                : "#4878a8");
        }
        csv << "# uptime_nondown_pct," << format_pct(weekly.uptime_nondown_pct) << "\n";
        csv << "# uptime_nondegraded_pct," << format_pct(weekly.uptime_nondegraded_pct) << "\n";
        emit("weekly_discovery.csv", csv.str());
        std::string svg = svg_bar_chart(bars, colors, "Torrents discovered per ISO week");
        emit("weekly_discovery.svg", svg);
    }

    // file sizes
    if (store.counts().files > 0) {
        SizeDistribution dist = size_distribution(store, 40);
        std::ostringstream csv;
        csv << "bin_lo_bytes,bin_hi_bytes,count,cdf\n";
        std::vector<std::pair<std::string, double>> bars;
        std::vector<double> cdf;
        for (const auto& b : dist.bins) {
            csv << std::fixed << b.lo << "," << b.hi << "," << b.count << "," << b.cdf << "\n";
            bars.emplace_back("", double(b.count));
            cdf.push_back(b.cdf);
        }
        emit("file_sizes.csv", csv.str());
        std::string svg = svg_bar_chart(bars, {}, "File sizes (log bins) with CDF overlay");
        size_t close = svg.rfind("</svg>");
        svg.insert(close, svg_line_overlay(cdf, "#c03030"));
        emit("file_sizes.svg", svg);
    }

    // breakdowns
    for (const char* field : {"quality", "language", "site", "encoder"}) {
        auto rows = breakdown(store, field, 25);
        std::ostringstream csv;
        csv << field << ",count\n";
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& [value, count] : rows) {
            csv << value << "," << count << "\n";
            bars.emplace_back(value, double(count));
        }
        emit(std::string("breakdown_") + field + ".csv", csv.str());
    }
    if (catalog) {
        auto rows = genre_breakdown(store, *catalog, 25);
        std::ostringstream csv;
        csv << "genre,count\n";
        for (const auto& [value, count] : rows) csv << value << "," << count << "\n";
        emit("breakdown_genre.csv", csv.str());
    }

    // match score distribution with the stored threshold
    {
        auto all = store.annotations(false);
        if (!all.empty()) {
            std::ostringstream csv;
            csv << "file_id,catalog_id,score,accepted\n";
            for (const auto& a : all) {
                std::ostringstream sc;
                sc.precision(6);
                sc << std::fixed << a.score;
                csv << a.file_id << "," << a.catalog_id << "," << sc.str() << ","
                    << (a.accepted ? 1 : 0) << "\n";
            }
            if (auto thr = store.get_meta("match_threshold")) csv << "# threshold," << *thr << "\n";
            emit("match_scores.csv", csv.str());
        }
    }

    // coverage by year
    if (catalog) {
        auto cov = coverage_by_year(store, *catalog);
        std::ostringstream csv;
        csv << "year,matched_titles,catalog_titles,coverage_pct\n";
        std::vector<std::pair<std::string, double>> bars;
        std::vector<double> pct;
        for (const auto& c : cov) {
            csv << c.year << "," << c.matched_titles << "," << c.catalog_titles << ","
                << format_pct(c.coverage_pct) << "\n";
            bars.emplace_back(std::to_string(c.year), double(c.matched_titles));
            pct.push_back(c.coverage_pct);
        }
        emit("coverage_by_year.csv", csv.str());
        std::string svg = svg_bar_chart(bars, {}, "Matched titles by release year, coverage % overlay");
        size_t close = svg.rfind("</svg>");
        svg.insert(close, svg_line_overlay(pct, "#c03030"));
        emit("coverage_by_year.svg", svg);
    }

    return written;
}

} // namespace btsup
