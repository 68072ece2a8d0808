#pragma once

#include "btsupply/bencode.hpp"
#include "btsupply/ids.hpp"
#include "btsupply/routing_table.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace btsup {

enum class MsgKind { query, response, error };

enum class Method { ping, find_node, get_peers, announce_peer, sample_infohashes, unknown };

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);

// One KRPC datagram. `args` is the "a" dict for queries and the "r" dict for
// responses; untouched for errors.
struct KrpcMessage {
    std::string tid;
    MsgKind kind = MsgKind::query;
    Method method = Method::unknown;
    std::string raw_method;
    bencode::Value args{bencode::Value::Dict{}};
    int error_code = 0;
    std::string error_message;

    std::optional<NodeId> sender_id() const;
};

// Throws bencode::Error on undecodable payloads, std::runtime_error on
// structurally invalid KRPC envelopes.
KrpcMessage parse_krpc(std::string_view payload);

std::string encode_query(std::string_view tid, Method m, bencode::Value args);
std::string encode_response(std::string_view tid, bencode::Value ret);
std::string encode_error(std::string_view tid, int code, std::string_view message);

// Compact node info: 20-byte id + 4-byte IPv4 + 2-byte port, concatenated.
std::string pack_compact_nodes(const std::vector<Contact>& contacts);
std::vector<std::pair<NodeId, Endpoint>> unpack_compact_nodes(std::string_view raw);

// Announce tokens: HMAC of the requester's compact address under a secret
// rotated every 5 minutes; the previous secret stays valid for one window.
class TokenManager {
public:
    explicit TokenManager(std::uint64_t seed, std::int64_t rotate_interval_us = 300'000'000);
    std::string issue(const Endpoint& requester, std::int64_t now_us);
    bool validate(const Endpoint& requester, std::string_view token, std::int64_t now_us);

private:
    void maybe_rotate(std::int64_t now_us);
    std::string secret_, prev_secret_;
    std::int64_t rotate_interval_us_;
    std::int64_t last_rotate_us_ = 0;
    std::uint64_t counter_;
};

// Per-infohash peer lists accumulated from validated announces.
class PeerStore {
public:
    explicit PeerStore(std::size_t max_peers_per_hash = 64) : cap_(max_peers_per_hash) {}
    void add(const InfoHash& ih, const Endpoint& peer);
    std::vector<Endpoint> peers_for(const InfoHash& ih) const;

private:
    std::size_t cap_;
    std::map<InfoHash, std::vector<Endpoint>> peers_;
};

// KRPC error codes per DHT conventions.
inline constexpr int kErrGeneric = 201;
inline constexpr int kErrServer = 202;
inline constexpr int kErrProtocol = 203;
inline constexpr int kErrMethodUnknown = 204;

struct ResponderConfig {
    std::size_t sample_batch = 20;   // infohashes per sample response
    std::int64_t sample_interval_s = 10;
};

// Query-answering half of a DHT node: serves ping/find_node/get_peers/
// announce_peer/sample_infohashes against a routing table and local state.
// Used by the crawler for incoming traffic and by simulated nodes.
class DhtResponder {
public:
    DhtResponder(NodeId own_id, RoutingTable* table, std::uint64_t token_seed,
                 ResponderConfig cfg = {});

    void add_local_hash(const InfoHash& ih);
    const std::vector<InfoHash>& local_hashes() const { return local_hashes_; }
    PeerStore& peer_store() { return peers_; }

    // Fired for every infohash surfaced by incoming get_peers / announce_peer
    // traffic; this is the crawler's passive discovery channel.
    std::function<void(const InfoHash&, const Endpoint&)> on_observed_infohash;

    // Returns the encoded response datagram (or nullopt when none is owed,
    // e.g. for responses/errors routed here by mistake).
    std::optional<std::string> handle(const KrpcMessage& msg, const Endpoint& from,
                                      std::int64_t now_us);

private:
    NodeId own_id_;
    RoutingTable* table_;
    TokenManager tokens_;
    PeerStore peers_;
    ResponderConfig cfg_;
    std::vector<InfoHash> local_hashes_;
    std::size_t sample_cursor_ = 0;
};

} // namespace btsup
