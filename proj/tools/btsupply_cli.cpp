// Command-line front end over the btsupply C API.
//
// Subcommands mirror the pipeline stages: simulate, crawl, parse, match,
// export, report. Everything is file+flag driven; logs go to stderr and
// machine-readable output goes to the files named in the configuration.

#include "btsupply.h"

#include "CLI11.hpp"

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct PipelineCloser {
    void operator()(bts_pipeline* p) const { bts_pipeline_close(p); }
};
using PipelinePtr = std::unique_ptr<bts_pipeline, PipelineCloser>;

int run_stage(const std::string& stage, const std::string& config_path,
              const std::vector<std::pair<std::string, std::string>>& overrides) {
    bts_pipeline* raw = nullptr;
    bts_status rc = bts_pipeline_open(config_path.empty() ? nullptr : config_path.c_str(), &raw);
    if (rc != BTS_OK) {
        std::fprintf(stderr, "error: %s\n", bts_last_error());
        return rc == BTS_CONFIG_ERROR ? 2 : 1;
    }
    PipelinePtr pipeline(raw);

    for (const auto& [key, value] : overrides) {
        if (bts_pipeline_set(pipeline.get(), key.c_str(), value.c_str()) != BTS_OK) {
            std::fprintf(stderr, "error: cannot set %s\n", key.c_str());
            return 2;
        }
    }

    rc = bts_pipeline_run(pipeline.get(), stage.c_str());
    if (rc != BTS_OK) {
        std::fprintf(stderr, "error: %s\n", bts_pipeline_last_error(pipeline.get()));
        return rc == BTS_CONFIG_ERROR ? 2 : 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"btsupply: DHT torrent-supply measurement pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "configuration file (key = value lines)");

    std::vector<std::pair<std::string, std::string>> overrides;
    auto add_override = [&overrides](const std::string& key) {
        return [&overrides, key](const std::string& value) { overrides.emplace_back(key, value); };
    };

    // shared knobs
    std::string store, catalog, tokens;
    app.add_option_function<std::string>("--store", add_override("store"), "store database path");
    app.add_option_function<std::string>("--catalog", add_override("catalog"),
                                         "catalog TSV (id, title, year, kind, genres)");
    app.add_option_function<std::string>("--tokens", add_override("tokens"),
                                         "scene token vocabulary file");
    app.add_option_function<std::string>("--max-neighbors", add_override("crawler.max_neighbors"),
                                         "concurrent neighbor cap");
    app.add_option_function<std::string>("--k-sigma", add_override("matcher.k_sigma"),
                                         "acceptance threshold sigma multiplier");
    app.add_option_function<std::string>("--min-gram", add_override("matcher.min_gram"),
                                         "edge n-gram minimum length");
    app.add_option_function<std::string>("--max-gram", add_override("matcher.max_gram"),
                                         "edge n-gram maximum length");

    auto* simulate = app.add_subcommand("simulate", "crawl + fetch against a simulated DHT world");
    simulate->add_option_function<std::string>("--world", add_override("world"),
                                               "world config file");
    simulate->add_option_function<std::string>("--duration", add_override("sim.duration_s"),
                                               "virtual crawl duration, seconds");
    simulate->add_option_function<std::string>("--trace", add_override("sim.trace_csv"),
                                               "write the discovery trace CSV here");
    simulate->add_option_function<std::string>("--seed", add_override("crawler.seed"),
                                               "crawler rng seed");

    auto* crawl = app.add_subcommand("crawl", "crawl the live DHT (mode = live) or a sim world");
    crawl->add_option_function<std::string>("--mode", add_override("mode"), "live or sim");
    crawl->add_option_function<std::string>("--bootstrap", add_override("crawler.bootstrap"),
                                            "comma-separated host:port list");
    crawl->add_option_function<std::string>("--duration", add_override("crawl.duration_s"),
                                            "crawl duration, seconds");
    crawl->add_option_function<std::string>("--bind-port", add_override("crawl.bind_port"),
                                            "UDP port to bind");

    auto* parse = app.add_subcommand("parse", "classify files and parse release names");
    (void)parse;

    auto* match = app.add_subcommand("match", "match parsed titles against the catalog");
    (void)match;

    auto* exp = app.add_subcommand("export", "export the accepted-match subset as CSV");
    exp->add_option_function<std::string>("--out", add_override("export.csv_path"),
                                          "destination CSV path");

    auto* report = app.add_subcommand("report", "write descriptive statistics and plots");
    report->add_option_function<std::string>("--out-dir", add_override("report.out_dir"),
                                             "report output directory");

    // global flags remain usable after the subcommand name
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    std::string stage = app.get_subcommands().front()->get_name();
    return run_stage(stage, config_path, overrides);
}
