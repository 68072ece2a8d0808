#include "btsupply/pipeline.hpp"

#include "btsupply/catalog.hpp"
#include "btsupply/crawler.hpp"
#include "btsupply/metadata.hpp"
#include "btsupply/net_live.hpp"
#include "btsupply/release_name.hpp"
#include "btsupply/simnet.hpp"
#include "btsupply/stats.hpp"
#include "btsupply/store.hpp"
#include "btsupply/title_match.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace btsup {

namespace {

std::string basename_of(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

WorldConfig world_from_config(const Config& wc) {
    WorldConfig w;
    w.seed = std::uint64_t(wc.get_int("seed", 1));
    w.node_count = std::size_t(wc.get_int("nodes", 0));
    w.infohash_count = std::size_t(wc.get_int("hashes", 0));
    w.packet_loss = wc.get_double("loss_rate", 0.0);
    w.latency_mean_ms = wc.get_double("latency_ms", 15.0);
    w.latency_sigma = wc.get_double("latency_sigma", 0.4);
    w.replication = int(wc.get_int("replication", 8));
    w.neighbors_nearest = std::size_t(wc.get_int("neighbors_nearest", 8));
    w.neighbors_random = std::size_t(wc.get_int("neighbors_random", 8));
    w.silent_fraction = wc.get_double("silent_fraction", 0.0);
    w.droppy_fraction = wc.get_double("droppy_fraction", 0.0);
    w.drop_p = wc.get_double("drop_p", 0.3);
    w.sample_batch = std::size_t(wc.get_int("sample_batch", 20));
    w.sample_interval_s = wc.get_int("sample_interval_s", 10);
    w.sample_interval_jitter = wc.get_double("sample_interval_jitter", 0.5);
    w.announce_prob = wc.get_double("announce_prob", 0.3);
    w.epoch_start_s = wc.get_int("epoch_start", 1546128000);
    w.multi_file_prob = wc.get_double("multi_file_prob", 0.45);
    w.junk_prob = wc.get_double("junk_prob", 0.2);
    w.bad_utf8_prob = wc.get_double("bad_utf8_prob", 0.03);
    w.large_info_prob = wc.get_double("large_info_prob", 0.05);
    if (w.node_count == 0) throw ConfigError("world config must set nodes >= 1");
    return w;
}

} // namespace

const std::vector<std::string>& Pipeline::stage_names() {
    static const std::vector<std::string> names = {"simulate", "crawl", "parse",
                                                   "match",    "export", "report"};
    return names;
}

std::string Pipeline::require(std::string_view key) const {
    auto v = cfg_.get(key);
    if (!v || v->empty())
        throw ConfigError("missing required config key: " + std::string(key));
    return *v;
}

void Pipeline::run(std::string_view stage) {
    if (stage == "simulate") stage_simulate();
    else if (stage == "crawl") stage_crawl();
    else if (stage == "parse") stage_parse();
    else if (stage == "match") stage_match();
    else if (stage == "export") stage_export();
    else if (stage == "report") stage_report();
    else throw ConfigError("unknown stage: " + std::string(stage));
}

static CrawlerConfig crawler_from_config(const Config& cfg) {
    CrawlerConfig cc;
    cc.max_neighbors = std::size_t(cfg.get_int("crawler.max_neighbors", 10000));
    cc.query_timeout_us = cfg.get_int("crawler.timeout_ms", 2000) * 1000;
    cc.retries = int(cfg.get_int("crawler.retries", 2));
    cc.rate_limit_qps = cfg.get_double("crawler.rate_limit_qps", 500.0);
    cc.k = int(cfg.get_int("crawler.k", 8));
    cc.alpha = int(cfg.get_int("crawler.alpha", 3));
    cc.seed = std::uint64_t(cfg.get_int("crawler.seed", 7));
    cc.use_sampling = cfg.get_bool("crawler.use_sampling", true);
    if (cc.max_neighbors < 1) throw ConfigError("crawler.max_neighbors must be >= 1");
    return cc;
}

void Pipeline::stage_simulate() {
    std::string store_path = require("store");

    Config world_cfg;
    if (auto world_file = cfg_.get("world")) {
        world_cfg = Config::parse_file(*world_file);
    } else {
        // inline world.* keys
        for (const auto& [k, v] : cfg_.entries())
            if (k.rfind("world.", 0) == 0) world_cfg.set(std::string_view(k).substr(6), v);
    }
    WorldConfig wc = world_from_config(world_cfg);

    std::vector<CatalogEntry> titles;
    if (auto catalog = cfg_.get("catalog")) titles = load_catalog_tsv(*catalog);

    SimWorld world = SimWorld::build(wc, titles);

    CrawlerConfig cc = crawler_from_config(cfg_);
    std::size_t bootstrap_n = std::size_t(cfg_.get_int("sim.bootstrap_nodes", 3));
    cc.bootstrap = world.node_endpoints(bootstrap_n);
    std::int64_t duration_us = cfg_.get_int("sim.duration_s", 60) * 1'000'000;

    CrawlTrace trace;
    try {
        trace = world.run_crawl(cc, duration_us);
    } catch (const BootstrapFailure& e) {
        throw PipelineRuntimeError(e.what());
    }

    Store store = Store::open(store_path);
    std::size_t fetched = 0, failures = 0;
    for (const auto& d : trace.discoveries) {
        std::vector<Endpoint> sources{d.source};
        for (const auto& ep : world.holders(d.hash))
            if (ep != d.source) sources.push_back(ep);
        bool ok = false;
        for (const auto& ep : sources) {
            try {
                auto stream = world.connect(ep);
                TorrentMeta meta = fetch_metadata(d.hash, *stream);
                store.upsert_torrent(meta, d.at_us / 1'000'000);
                ok = true;
                break;
            } catch (const FetchError&) {
                continue;
            }
        }
        ok ? void(++fetched) : void(++failures);
    }

    if (auto trace_path = cfg_.get("sim.trace_csv")) {
        std::ofstream out(*trace_path, std::ios::binary);
        if (!out) throw PipelineRuntimeError("cannot write trace csv to " + *trace_path);
        out << trace_to_csv(trace);
    }

    store.put_meta("sim.seed", std::to_string(wc.seed));
    store.put_meta("sim.discovered", std::to_string(trace.discoveries.size()));
    store.put_meta("sim.fetched", std::to_string(fetched));
    store.put_meta("sim.fetch_failures", std::to_string(failures));
    std::cerr << "simulate: " << trace.discoveries.size() << " discovered, " << fetched
              << " fetched, " << failures << " failed\n";
}

void Pipeline::stage_crawl() {
    std::string store_path = require("store");
    std::string mode = cfg_.get_or("mode", "live");
    if (mode == "sim") {
        stage_simulate();
        return;
    }
    if (mode != "live") throw ConfigError("mode must be sim or live, got: " + mode);

    LiveCrawlOptions opts;
    opts.crawler = crawler_from_config(cfg_);
    auto bootstrap_specs = cfg_.get_list("crawler.bootstrap");
    for (const auto& spec : bootstrap_specs) {
        auto ep = resolve_endpoint(spec);
        if (!ep) throw ConfigError("cannot resolve bootstrap node: " + spec);
        opts.crawler.bootstrap.push_back(*ep);
    }
    if (opts.crawler.bootstrap.empty())
        throw ConfigError("live crawl needs crawler.bootstrap = host:port[,host:port...]");
    opts.crawl_duration_s = cfg_.get_int("crawl.duration_s", 600);
    opts.bind_port = std::uint16_t(cfg_.get_int("crawl.bind_port", 6881));
    opts.max_fetches = std::size_t(cfg_.get_int("crawl.max_fetches", 1000));

    Store store = Store::open(store_path);
    auto stats = run_live_crawl(
        opts,
        [&store](const TorrentMeta& meta, const Discovery& d) {
            store.upsert_torrent(meta, d.at_us / 1'000'000);
        },
        [](const HeartBeat& hb) {
            std::cerr << "crawl: neighbors=" << hb.neighbors << " qps=" << hb.queries_per_s
                      << " dps=" << hb.discoveries_per_s << " total=" << hb.discovered_total
                      << "\n";
        });
    std::cerr << "crawl: discovered=" << stats.discovered << " fetched=" << stats.fetched
              << " failures=" << stats.fetch_failures << "\n";
}

void Pipeline::stage_parse() {
    std::string store_path = require("store");
    Store store = Store::open(store_path);

    ReleaseNameParser parser = cfg_.has("tokens")
                                   ? ReleaseNameParser(TokenVocabulary::load_file(require("tokens")))
                                   : ReleaseNameParser();

    std::vector<Store::FileClassification> rows;
    for (const auto& f : store.files_all()) {
        Store::FileClassification c;
        c.file_id = f.row_id;
        if (f.encoding_failed) {
            c.is_video = false; // failed paths are hex text; they stay out of both partitions
        } else {
            FileClass fc = parser.classify_file(f.path);
            c.is_video = fc.is_video;
            if (fc.is_video) c.parsed = parser.parse(basename_of(f.path));
        }
        rows.push_back(std::move(c));
    }
    store.write_classifications(rows);
    std::cerr << "parse: classified " << rows.size() << " files\n";
}

void Pipeline::stage_match() {
    std::string store_path = require("store");
    std::string catalog_path = require("catalog");
    auto entries = load_catalog_tsv(catalog_path);
    if (entries.empty()) throw ConfigError("catalog has no entries: " + catalog_path);

    AnalyzerConfig acfg;
    acfg.min_gram = int(cfg_.get_int("matcher.min_gram", 4));
    acfg.max_gram = int(cfg_.get_int("matcher.max_gram", 15));
    Bm25Params params;
    params.k1 = cfg_.get_double("matcher.k1", 1.2);
    params.b = cfg_.get_double("matcher.b", 0.75);
    double k_sigma = cfg_.get_double("matcher.k_sigma", 2.0);
    if (k_sigma < 0) throw ConfigError("matcher.k_sigma must be >= 0");

    TitleIndex index = TitleIndex::build(std::move(entries), acfg, params);

    Store store = Store::open(store_path);
    auto titles = store.video_titles();

    std::vector<std::pair<std::int64_t, MatchResult>> best;
    std::vector<double> scores;
    for (const auto& [file_id, title] : titles) {
        auto results = index.match(title, 1);
        if (results.empty()) continue; // no token overlap anywhere: not a candidate
        best.emplace_back(file_id, results[0]);
        scores.push_back(results[0].score);
    }

    if (best.empty()) {
        std::cerr << "match: no candidates among " << titles.size() << " video files\n";
        return;
    }

    double threshold = compute_threshold(scores, k_sigma);
    std::vector<MatchAnnotation> annotations;
    annotations.reserve(best.size());
    for (const auto& [file_id, result] : best) {
        MatchAnnotation a;
        a.file_id = file_id;
        a.catalog_id = result.catalog_id;
        a.score = result.score;
        a.accepted = result.score >= threshold;
        if (const CatalogEntry* e = index.entry_by_id(result.catalog_id)) {
            a.catalog_title = e->title;
            a.catalog_year = e->year;
        }
        annotations.push_back(std::move(a));
    }
    std::size_t written = store.annotate_matches(annotations);

    std::ostringstream thr;
    thr.precision(9);
    thr << std::fixed << threshold;
    store.put_meta("match_threshold", thr.str());
    std::ostringstream ks;
    ks.precision(3);
    ks << std::fixed << k_sigma;
    store.put_meta("match_k_sigma", ks.str());

    std::size_t accepted = 0;
    for (const auto& a : annotations)
        if (a.accepted) ++accepted;
    std::cerr << "match: " << written << " candidates, " << accepted << " accepted at threshold "
              << thr.str() << "\n";
}

void Pipeline::stage_export() {
    std::string store_path = require("store");
    std::string csv_path = cfg_.get_or("export.csv_path", "matched_subset.csv");
    Store store = Store::open(store_path);
    std::size_t rows = store.export_matched_csv(csv_path);
    std::cerr << "export: " << rows << " rows -> " << csv_path << "\n";
}

void Pipeline::stage_report() {
    std::string store_path = require("store");
    std::string out_dir = cfg_.get_or("report.out_dir", "reports");
    Store store = Store::open(store_path);

    std::vector<CatalogEntry> entries;
    bool have_catalog = false;
    if (auto catalog = cfg_.get("catalog")) {
        entries = load_catalog_tsv(*catalog);
        have_catalog = true;
    }
    auto written = write_reports(store, have_catalog ? &entries : nullptr, out_dir);
    std::cerr << "report: wrote " << written.size() << " files to " << out_dir << "\n";
}

} // namespace btsup
