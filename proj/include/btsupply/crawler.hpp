#pragma once

#include "btsupply/ids.hpp"
#include "btsupply/krpc.hpp"
#include "btsupply/routing_table.hpp"
#include "btsupply/transport.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace btsup {

struct CrawlerConfig {
    std::size_t max_neighbors = 10000;
    std::vector<Endpoint> bootstrap;
    std::int64_t query_timeout_us = 2'000'000;
    int retries = 2;
    double rate_limit_qps = 500.0;
    int k = 8;
    int alpha = 3;
    std::int64_t heartbeat_interval_us = 1'000'000;
    std::uint64_t seed = 1;
    // Discovery mix: BEP51 sampling when peers support it, passive
    // observation of incoming get_peers/announce traffic always on.
    bool use_sampling = true;
};

struct Discovery {
    InfoHash hash;
    Endpoint source;
    std::int64_t at_us = 0;
};

struct HeartBeat {
    std::int64_t at_us = 0;
    std::size_t neighbors = 0;
    double queries_per_s = 0;
    double discoveries_per_s = 0;
    std::size_t discovered_total = 0;
};

struct LookupResult {
    bool ok = false; // false: no queried peer ever responded
    Key160 target{};
    std::vector<Contact> closest;     // sorted by ascending xor distance
    std::vector<Endpoint> peers;      // get_peers values, when requested
};

class BootstrapFailure : public std::runtime_error {
public:
    BootstrapFailure() : std::runtime_error("no bootstrap nodes configured") {}
};

// DHT walker. Maintains up to max_neighbors concurrent neighbor
// relationships, harvests infohashes from sample_infohashes responses and
// from incoming announce/get_peers traffic, and deduplicates emissions over
// the lifetime of the run.
class Crawler {
public:
    Crawler(const CrawlerConfig& cfg, NodeId own_id, PacketSender& out);

    void start(std::int64_t now_us); // throws BootstrapFailure when bootstrap empty
    void on_packet(const Endpoint& from, std::string_view payload, std::int64_t now_us);
    void on_tick(std::int64_t now_us);

    // Iterative lookup of the k closest nodes to target; completion fires
    // from within on_packet/on_tick. With want_peers, get_peers is used and
    // compact peer values accumulate in the result.
    void lookup(const Key160& target, bool want_peers,
                std::function<void(const LookupResult&)> done);

    std::function<void(const Discovery&)> on_discovery;
    std::function<void(const HeartBeat&)> on_heartbeat;

    const RoutingTable& table() const { return table_; }
    std::size_t neighbor_count() const { return neighbors_.size(); }
    std::size_t discovered_count() const { return seen_.size(); }
    const NodeId& own_id() const { return own_id_; }

private:
    struct Pending {
        Endpoint ep;
        std::optional<NodeId> node; // unknown for bootstrap contacts
        Method method = Method::ping;
        Key160 target{};
        std::int64_t sent_us = 0;
        int retries_left = 0;
        int lookup_id = -1;
    };

    struct NeighborState {
        Endpoint ep;
        std::int64_t next_sample_due_us = 0;
        bool supports_sampling = true;
    };

    struct LookupCandidate {
        NodeId id;
        Endpoint ep;
        enum class State { fresh, inflight, responded, failed } state = State::fresh;
    };

    struct LookupState {
        Key160 target{};
        bool want_peers = false;
        std::vector<LookupCandidate> candidates;
        std::vector<Endpoint> peers;
        int inflight = 0;
        bool any_response = false;
        bool finished = false;
        std::function<void(const LookupResult&)> done;
    };

    std::string next_tid();
    bool rate_allow(std::int64_t now_us);
    void send_query(const Endpoint& ep, std::optional<NodeId> node, Method m, const Key160& target,
                    std::int64_t now_us, int lookup_id, int retries_left);
    void note_contact(const NodeId& id, const Endpoint& ep, std::int64_t now_us);
    void emit(const InfoHash& ih, const Endpoint& source, std::int64_t now_us);
    void handle_response(const KrpcMessage& msg, const Endpoint& from, std::int64_t now_us);
    void fail_pending(const std::string& tid, Pending& p, std::int64_t now_us);
    void advance_lookup(int lookup_id, std::int64_t now_us);
    void add_lookup_candidates(LookupState& ls, const std::vector<std::pair<NodeId, Endpoint>>& nodes);

    CrawlerConfig cfg_;
    NodeId own_id_;
    PacketSender& out_;
    RoutingTable table_;
    DhtResponder responder_;

    std::map<std::string, Pending> pending_;
    std::uint16_t tid_counter_ = 0;
    std::map<NodeId, NeighborState> neighbors_;
    std::deque<std::pair<std::optional<NodeId>, Endpoint>> probe_queue_;
    std::unordered_set<InfoHash, InfoHashHash> seen_;
    std::unordered_set<std::uint64_t> queued_eps_; // dedup for probe queue

    std::map<int, LookupState> lookups_;
    int next_lookup_id_ = 0;

    std::mt19937_64 rng_;
    double rate_budget_ = 0;
    std::int64_t rate_last_us_ = 0;
    std::int64_t now_us_ = 0;
    std::int64_t last_heartbeat_us_ = 0;
    std::uint64_t queries_sent_ = 0, queries_at_last_beat_ = 0;
    std::uint64_t discoveries_at_last_beat_ = 0;
    bool started_ = false;
};

} // namespace btsup
