#include "btsupply/krpc.hpp"

#include "btsupply/sha1.hpp"

#include <algorithm>
#include <stdexcept>

namespace btsup {

using bencode::Value;

std::string_view method_name(Method m) {
    switch (m) {
    case Method::ping: return "ping";
    case Method::find_node: return "find_node";
    case Method::get_peers: return "get_peers";
    case Method::announce_peer: return "announce_peer";
    case Method::sample_infohashes: return "sample_infohashes";
    case Method::unknown: break;
    }
    return "unknown";
}

Method method_from_name(std::string_view name) {
    if (name == "ping") return Method::ping;
    if (name == "find_node") return Method::find_node;
    if (name == "get_peers") return Method::get_peers;
    if (name == "announce_peer") return Method::announce_peer;
    if (name == "sample_infohashes") return Method::sample_infohashes;
    return Method::unknown;
}

std::optional<NodeId> KrpcMessage::sender_id() const {
    const Value* id = args.find("id");
    if (!id || !id->is_bytes() || id->as_bytes().size() != 20) return std::nullopt;
    return NodeId{key160_from_bytes(id->as_bytes())};
}

KrpcMessage parse_krpc(std::string_view payload) {
    auto decoded = bencode::decode(payload);
    const Value& root = decoded.value;
    if (!root.is_dict()) throw std::runtime_error("krpc: root is not a dict");
    const Value* t = root.find("t");
    const Value* y = root.find("y");
    if (!t || !t->is_bytes() || !y || !y->is_bytes())
        throw std::runtime_error("krpc: missing t/y");

    KrpcMessage msg;
    msg.tid = t->as_bytes();
    const std::string& kind = y->as_bytes();
    if (kind == "q") {
        msg.kind = MsgKind::query;
        const Value* q = root.find("q");
        const Value* a = root.find("a");
        if (!q || !q->is_bytes() || !a || !a->is_dict())
            throw std::runtime_error("krpc: query missing q/a");
        msg.raw_method = q->as_bytes();
        msg.method = method_from_name(msg.raw_method);
        msg.args = *a;
    } else if (kind == "r") {
        msg.kind = MsgKind::response;
        const Value* r = root.find("r");
        if (!r || !r->is_dict()) throw std::runtime_error("krpc: response missing r");
        msg.args = *r;
    } else if (kind == "e") {
        msg.kind = MsgKind::error;
        const Value* e = root.find("e");
        if (!e || !e->is_list() || e->as_list().size() < 2 || !e->as_list()[0].is_int() ||
            !e->as_list()[1].is_bytes())
            throw std::runtime_error("krpc: malformed error payload");
        msg.error_code = static_cast<int>(e->as_list()[0].as_int());
        msg.error_message = e->as_list()[1].as_bytes();
    } else {
        throw std::runtime_error("krpc: unknown message kind");
    }
    return msg;
}

std::string encode_query(std::string_view tid, Method m, Value args) {
    Value root{Value::Dict{}};
    root.set("t", Value(tid));
    root.set("y", Value("q"));
    root.set("q", Value(method_name(m)));
    root.set("a", std::move(args));
    return bencode::encode(root);
}

std::string encode_response(std::string_view tid, Value ret) {
    Value root{Value::Dict{}};
    root.set("t", Value(tid));
    root.set("y", Value("r"));
    root.set("r", std::move(ret));
    return bencode::encode(root);
}

std::string encode_error(std::string_view tid, int code, std::string_view message) {
    Value root{Value::Dict{}};
    root.set("t", Value(tid));
    root.set("y", Value("e"));
    root.set("e", Value::list({Value(int64_t{code}), Value(message)}));
    return bencode::encode(root);
}

std::string pack_compact_nodes(const std::vector<Contact>& contacts) {
    std::string out;
    out.reserve(contacts.size() * 26);
    for (const auto& c : contacts) {
        out.append(c.id.raw());
        out.append(pack_compact_peer(c.ep));
    }
    return out;
}

std::vector<std::pair<NodeId, Endpoint>> unpack_compact_nodes(std::string_view raw) {
    std::vector<std::pair<NodeId, Endpoint>> out;
    if (raw.size() % 26 != 0) return out;
    for (size_t off = 0; off + 26 <= raw.size(); off += 26) {
        NodeId id{key160_from_bytes(raw.substr(off, 20))};
        auto ep = unpack_compact_peer(raw.substr(off + 20, 6));
        if (ep) out.emplace_back(id, *ep);
    }
    return out;
}

TokenManager::TokenManager(std::uint64_t seed, std::int64_t rotate_interval_us)
    : rotate_interval_us_(rotate_interval_us), counter_(seed) {
    secret_ = std::to_string(counter_++) + "-token-secret";
    prev_secret_ = secret_;
}

void TokenManager::maybe_rotate(std::int64_t now_us) {
    while (now_us - last_rotate_us_ >= rotate_interval_us_) {
        prev_secret_ = secret_;
        secret_ = std::to_string(counter_++) + "-token-secret";
        last_rotate_us_ += rotate_interval_us_;
    }
}

std::string TokenManager::issue(const Endpoint& requester, std::int64_t now_us) {
    maybe_rotate(now_us);
    Sha1Digest d = hmac_sha1(secret_, pack_compact_peer(requester));
    return std::string(reinterpret_cast<char*>(d.data()), 8);
}

bool TokenManager::validate(const Endpoint& requester, std::string_view token,
                            std::int64_t now_us) {
    maybe_rotate(now_us);
    std::string addr = pack_compact_peer(requester);
    for (const std::string& secret : {secret_, prev_secret_}) {
        Sha1Digest d = hmac_sha1(secret, addr);
        if (token == std::string_view(reinterpret_cast<char*>(d.data()), 8)) return true;
    }
    return false;
}

void PeerStore::add(const InfoHash& ih, const Endpoint& peer) {
    auto& list = peers_[ih];
    if (std::find(list.begin(), list.end(), peer) != list.end()) return;
    if (list.size() >= cap_) return;
    list.push_back(peer);
}

std::vector<Endpoint> PeerStore::peers_for(const InfoHash& ih) const {
    auto it = peers_.find(ih);
    return it == peers_.end() ? std::vector<Endpoint>{} : it->second;
}

DhtResponder::DhtResponder(NodeId own_id, RoutingTable* table, std::uint64_t token_seed,
                           ResponderConfig cfg)
    : own_id_(own_id), table_(table), tokens_(token_seed), cfg_(cfg) {}

void DhtResponder::add_local_hash(const InfoHash& ih) {
    if (std::find(local_hashes_.begin(), local_hashes_.end(), ih) == local_hashes_.end())
        local_hashes_.push_back(ih);
}

std::optional<std::string> DhtResponder::handle(const KrpcMessage& msg, const Endpoint& from,
                                                std::int64_t now_us) {
    if (msg.kind != MsgKind::query) return std::nullopt;

    auto sender = msg.sender_id();
    if (!sender) return encode_error(msg.tid, kErrProtocol, "missing or malformed id");
    if (table_) table_->insert(*sender, from, now_us);

    auto target_key = [&](const char* field) -> std::optional<Key160> {
        const Value* v = msg.args.find(field);
        if (!v || !v->is_bytes() || v->as_bytes().size() != 20) return std::nullopt;
        return key160_from_bytes(v->as_bytes());
    };

    switch (msg.method) {
    case Method::ping: {
        Value r{Value::Dict{}};
        r.set("id", Value(own_id_.raw()));
        return encode_response(msg.tid, std::move(r));
    }
    case Method::find_node: {
        auto target = target_key("target");
        if (!target) return encode_error(msg.tid, kErrProtocol, "missing target");
        Value r{Value::Dict{}};
        r.set("id", Value(own_id_.raw()));
        r.set("nodes", Value(pack_compact_nodes(table_ ? table_->closest(*target, table_->k())
                                                       : std::vector<Contact>{})));
        return encode_response(msg.tid, std::move(r));
    }
    case Method::get_peers: {
        auto target = target_key("info_hash");
        if (!target) return encode_error(msg.tid, kErrProtocol, "missing info_hash");
        InfoHash ih{*target};
        if (on_observed_infohash) on_observed_infohash(ih, from);
        Value r{Value::Dict{}};
        r.set("id", Value(own_id_.raw()));
        r.set("token", Value(tokens_.issue(from, now_us)));
        auto known = peers_.peers_for(ih);
        if (!known.empty()) {
            Value::List values;
            for (const auto& ep : known) values.push_back(Value(pack_compact_peer(ep)));
            r.set("values", Value(std::move(values)));
        } else {
            r.set("nodes", Value(pack_compact_nodes(table_ ? table_->closest(*target, table_->k())
                                                           : std::vector<Contact>{})));
        }
        return encode_response(msg.tid, std::move(r));
    }
    case Method::announce_peer: {
        auto target = target_key("info_hash");
        const Value* token = msg.args.find("token");
        if (!target || !token || !token->is_bytes())
            return encode_error(msg.tid, kErrProtocol, "missing info_hash or token");
        if (!tokens_.validate(from, token->as_bytes(), now_us))
            return encode_error(msg.tid, kErrProtocol, "token mismatch");
        Endpoint peer = from;
        const Value* implied = msg.args.find("implied_port");
        const Value* port = msg.args.find("port");
        if ((!implied || !implied->is_int() || implied->as_int() == 0)) {
            if (!port || !port->is_int() || port->as_int() <= 0 || port->as_int() > 65535)
                return encode_error(msg.tid, kErrProtocol, "missing or invalid port");
            peer.port = static_cast<uint16_t>(port->as_int());
        }
        InfoHash ih{*target};
        peers_.add(ih, peer);
        if (on_observed_infohash) on_observed_infohash(ih, from);
        Value r{Value::Dict{}};
        r.set("id", Value(own_id_.raw()));
        return encode_response(msg.tid, std::move(r));
    }
    case Method::sample_infohashes: {
        auto target = target_key("target");
        if (!target) return encode_error(msg.tid, kErrProtocol, "missing target");
        std::string samples;
        std::size_t n = std::min(cfg_.sample_batch, local_hashes_.size());
        for (std::size_t i = 0; i < n; ++i) {
            samples.append(local_hashes_[(sample_cursor_ + i) % local_hashes_.size()].raw());
        }
        if (!local_hashes_.empty())
            sample_cursor_ = (sample_cursor_ + n) % local_hashes_.size();
        Value r{Value::Dict{}};
        r.set("id", Value(own_id_.raw()));
        r.set("interval", Value(int64_t{cfg_.sample_interval_s}));
        r.set("num", Value(int64_t(local_hashes_.size())));
        r.set("samples", Value(samples));
        r.set("nodes", Value(pack_compact_nodes(table_ ? table_->closest(*target, table_->k())
                                                       : std::vector<Contact>{})));
        return encode_response(msg.tid, std::move(r));
    }
    case Method::unknown:
        return encode_error(msg.tid, kErrMethodUnknown, "method unknown");
    }
    return std::nullopt;
}

} // namespace btsup
