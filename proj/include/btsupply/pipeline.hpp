#pragma once

#include "btsupply/config.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace btsup {

class PipelineRuntimeError : public std::runtime_error {
public:
    explicit PipelineRuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Stage orchestration behind the CLI: each stage reads the store the
// previous stage wrote and is independently re-runnable. Configuration
// errors (missing paths, bad keys) throw ConfigError; anything failing
// mid-run throws PipelineRuntimeError.
class Pipeline {
public:
    explicit Pipeline(Config cfg) : cfg_(std::move(cfg)) {}

    static const std::vector<std::string>& stage_names(); // simulate crawl parse match export report
    void run(std::string_view stage);

    const Config& config() const { return cfg_; }
    void set(std::string_view key, std::string_view value) { cfg_.set(key, value); }

private:
    void stage_simulate();
    void stage_crawl();
    void stage_parse();
    void stage_match();
    void stage_export();
    void stage_report();

    std::string require(std::string_view key) const; // ConfigError when missing

    Config cfg_;
};

} // namespace btsup
