#pragma once

#include "btsupply/catalog.hpp"
#include "btsupply/crawler.hpp"
#include "btsupply/ids.hpp"
#include "btsupply/krpc.hpp"
#include "btsupply/metadata.hpp"
#include "btsupply/routing_table.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace btsup {

struct WorldConfig {
    std::uint64_t seed = 1;
    std::size_t node_count = 0;
    std::size_t infohash_count = 0;
    double packet_loss = 0.0;
    double latency_mean_ms = 15.0;
    double latency_sigma = 0.4;
    int replication = 8;              // each hash lives on its k closest nodes
    std::size_t neighbors_nearest = 8;
    std::size_t neighbors_random = 8;
    double silent_fraction = 0.0;     // profile: never responds
    double droppy_fraction = 0.0;     // profile: drops responses with drop_p
    double drop_p = 0.3;
    std::size_t sample_batch = 20;
    std::int64_t sample_interval_s = 10;
    double sample_interval_jitter = 0.5; // per-node spread, fraction of the interval
    double announce_prob = 0.3;       // chance a contacted node announces back
    std::int64_t epoch_start_s = 1546128000; // virtual wall origin, 2018-12-30T00:00Z
    double multi_file_prob = 0.45;
    double junk_prob = 0.2;           // non-media torrents
    double bad_utf8_prob = 0.03;      // file names with encoding failures
    double large_info_prob = 0.05;    // info dicts spanning several 16 KiB pieces
};

// Per-connection peer behavior knobs for metadata serving.
struct SimPeerBehavior {
    bool refuse_handshake = false;
    bool no_extension = false;
    bool reject_requests = false;
    bool corrupt_piece = false;
    bool reverse_piece_delivery = false; // buffer, then deliver pieces in reverse
};

// Scripted serving side of the metadata extension protocol, driven entirely
// by in-memory byte exchange.
class SimMetadataServer {
public:
    using BlobLookup = std::function<const std::string*(const InfoHash&)>;
    SimMetadataServer(BlobLookup lookup, SimPeerBehavior behavior = {});

    void on_bytes(std::string_view in, std::string& out);

private:
    void process(std::string& out);

    BlobLookup lookup_;
    SimPeerBehavior behavior_;
    std::string buf_;
    bool handshaken_ = false;
    bool closed_ = false;
    const std::string* blob_ = nullptr;
    int client_metadata_id_ = 2; // from the client's extended handshake
    std::vector<std::pair<std::size_t, std::string>> held_; // for reversed delivery
    std::size_t expected_pieces_ = 0;
    std::size_t requests_seen_ = 0;
};

class SimPeerStream : public PeerStream {
public:
    SimPeerStream(SimMetadataServer::BlobLookup lookup, SimPeerBehavior behavior = {});
    void write(std::string_view data) override;
    std::size_t read_some(char* buf, std::size_t cap, int timeout_ms) override;

private:
    SimMetadataServer server_;
    std::string inbox_;
};

struct CrawlTrace {
    std::vector<Discovery> discoveries;
    std::vector<HeartBeat> heartbeats;
    NodeId crawler_id{};
    std::int64_t virtual_end_us = 0;
};

// Deterministic in-memory DHT world. Identical config (same seed) builds an
// identical world, and a crawl over a freshly built world yields an
// identical trace.
class SimWorld {
public:
    static SimWorld build(const WorldConfig& cfg);
    static SimWorld build(const WorldConfig& cfg, const std::vector<CatalogEntry>& titles);

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<InfoHash>& all_hashes() const { return hashes_; }
    const std::string* metadata_for(const InfoHash& ih) const;
    std::vector<Endpoint> holders(const InfoHash& ih) const;
    std::vector<Endpoint> node_endpoints(std::size_t n) const;
    // Ground-truth oracle: brute-force k nearest responsive node ids.
    std::vector<NodeId> closest_node_ids(const Key160& target, std::size_t k) const;
    const WorldConfig& config() const { return cfg_; }
    std::int64_t epoch_start_us() const { return cfg_.epoch_start_s * 1'000'000; }

    // Runs the real crawler against this world for `duration_us` of virtual
    // time. Mutates node-side state (sample cursors, learned contacts), so
    // determinism comparisons should use freshly built worlds.
    CrawlTrace run_crawl(const CrawlerConfig& crawler_cfg, std::int64_t duration_us);

    // Same event loop with scripted actions at virtual offsets from start.
    using ScriptStep = std::pair<std::int64_t, std::function<void(Crawler&)>>;
    CrawlTrace run_with(const CrawlerConfig& crawler_cfg, std::int64_t duration_us,
                        std::vector<ScriptStep> script);

    // Joins the network, then resolves the k closest nodes to target at the
    // half-way mark of the virtual budget.
    std::optional<LookupResult> run_lookup(const CrawlerConfig& crawler_cfg, const Key160& target,
                                           bool want_peers, std::int64_t duration_us);

    // Virtual peer-wire connection for metadata fetching.
    std::unique_ptr<PeerStream> connect(const Endpoint& peer, SimPeerBehavior behavior = {}) const;

private:
    struct VNode {
        NodeId id;
        Endpoint ep;
        enum class Profile { always, droppy, silent } profile = Profile::always;
        double drop_p = 0;
        std::unique_ptr<RoutingTable> table;
        std::unique_ptr<DhtResponder> responder;
        std::vector<InfoHash> held;
        // announce flow towards the crawler
        bool poked = false;
        int announce_stage = 0; // 0 idle, 1 waiting for token, 2 done
        std::optional<InfoHash> announce_hash;
    };

    SimWorld() = default;

    std::vector<std::unique_ptr<VNode>> nodes_;
    std::map<Endpoint, std::size_t> by_endpoint_;
    std::vector<InfoHash> hashes_;
    std::map<InfoHash, std::string> metadata_;
    std::map<InfoHash, std::vector<std::size_t>> holders_;
    WorldConfig cfg_;
};

// Trace export: at_us,infohash,source per line.
std::string trace_to_csv(const CrawlTrace& trace);

} // namespace btsup
