#pragma once

#include "btsupply/crawler.hpp"
#include "btsupply/metadata.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace btsup {

// "host:port" with numeric or DNS host.
std::optional<Endpoint> resolve_endpoint(const std::string& spec);

struct LiveCrawlOptions {
    CrawlerConfig crawler;
    std::int64_t crawl_duration_s = 600;
    std::uint16_t bind_port = 6881;
    std::size_t max_fetches = 1000;       // stop fetching after this many successes
    std::size_t peers_per_hash = 8;       // candidates tried in xor-closeness order
    FetchOptions fetch;
};

struct LiveCrawlStats {
    std::size_t discovered = 0;
    std::size_t fetched = 0;
    std::size_t fetch_failures = 0;
};

// UDP crawl against the public DHT followed by TCP metadata fetches.
// The sink receives each validated TorrentMeta with its discovery record.
LiveCrawlStats run_live_crawl(const LiveCrawlOptions& opts,
                              const std::function<void(const TorrentMeta&, const Discovery&)>& sink,
                              const std::function<void(const HeartBeat&)>& telemetry);

} // namespace btsup
