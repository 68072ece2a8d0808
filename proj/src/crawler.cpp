#include "btsupply/crawler.hpp"

#include <algorithm>

namespace btsup {

using bencode::Value;

namespace {

Key160 random_key(std::mt19937_64& rng) {
    Key160 k;
    for (auto& b : k) b = uint8_t(rng() & 0xff);
    return k;
}

uint64_t ep_key(const Endpoint& ep) { return (uint64_t(ep.ip) << 16) | ep.port; }

} // namespace

Crawler::Crawler(const CrawlerConfig& cfg, NodeId own_id, PacketSender& out)
    : cfg_(cfg), own_id_(own_id), out_(out), table_(own_id, cfg.k),
      responder_(own_id, &table_, cfg.seed ^ 0x746f6b656eull), rng_(cfg.seed) {
    responder_.on_observed_infohash = [this](const InfoHash& ih, const Endpoint& from) {
        emit(ih, from, now_us_);
    };
}

void Crawler::start(std::int64_t now_us) {
    if (cfg_.bootstrap.empty()) throw BootstrapFailure();
    started_ = true;
    now_us_ = now_us;
    rate_last_us_ = now_us;
    last_heartbeat_us_ = now_us;
    for (const auto& ep : cfg_.bootstrap) {
        send_query(ep, std::nullopt, Method::find_node, own_id_.bytes, now_us, -1, cfg_.retries);
    }
}

std::string Crawler::next_tid() {
    for (int attempts = 0; attempts < 70000; ++attempts) {
        ++tid_counter_;
        std::string tid(2, '\0');
        tid[0] = char(tid_counter_ >> 8);
        tid[1] = char(tid_counter_ & 0xff);
        if (!pending_.count(tid)) return tid;
    }
    throw std::runtime_error("transaction table exhausted");
}

// Token bucket over outbound queries. send_query always debits; scheduled
// work (probes, re-samples, retries) first checks there is budget, while
// lookup traffic may briefly drive the budget negative and stalls the
// scheduled work instead.
bool Crawler::rate_allow(std::int64_t now_us) {
    double elapsed_s = double(now_us - rate_last_us_) / 1e6;
    rate_last_us_ = now_us;
    rate_budget_ = std::min(rate_budget_ + elapsed_s * cfg_.rate_limit_qps,
                            std::max(1.0, cfg_.rate_limit_qps));
    return rate_budget_ >= 1.0;
}

void Crawler::send_query(const Endpoint& ep, std::optional<NodeId> node, Method m,
                         const Key160& target, std::int64_t now_us, int lookup_id,
                         int retries_left) {
    std::string tid = next_tid();
    Value args{Value::Dict{}};
    args.set("id", Value(own_id_.raw()));
    switch (m) {
    case Method::find_node:
    case Method::sample_infohashes:
        args.set("target", Value(key160_to_bytes(target)));
        break;
    case Method::get_peers:
        args.set("info_hash", Value(key160_to_bytes(target)));
        break;
    default:
        break;
    }
    pending_[tid] = Pending{ep, node, m, target, now_us, retries_left, lookup_id};
    ++queries_sent_;
    rate_budget_ -= 1.0;
    out_.send(ep, encode_query(tid, m, std::move(args)));
}

void Crawler::note_contact(const NodeId& id, const Endpoint& ep, std::int64_t now_us) {
    if (id == own_id_) return;
    table_.insert(id, ep, now_us);
    if (neighbors_.count(id)) return;
    if (neighbors_.size() + probe_queue_.size() >= cfg_.max_neighbors) return;
    if (!queued_eps_.insert(ep_key(ep)).second) return;
    probe_queue_.emplace_back(id, ep);
}

void Crawler::emit(const InfoHash& ih, const Endpoint& source, std::int64_t now_us) {
    if (!seen_.insert(ih).second) return;
    if (on_discovery) on_discovery(Discovery{ih, source, now_us});
}

void Crawler::on_packet(const Endpoint& from, std::string_view payload, std::int64_t now_us) {
    now_us_ = now_us;
    KrpcMessage msg;
    try {
        msg = parse_krpc(payload);
    } catch (const std::exception&) {
        return; // undecodable datagrams are dropped
    }

    if (msg.kind == MsgKind::query) {
        auto reply = responder_.handle(msg, from, now_us);
        if (reply) out_.send(from, std::move(*reply));
        if (auto sender = msg.sender_id()) note_contact(*sender, from, now_us);
        return;
    }

    auto it = pending_.find(msg.tid);
    if (it == pending_.end()) return;        // unsolicited or late
    if (it->second.ep != from) return;       // tid spoofed from another address
    Pending p = std::move(it->second);
    pending_.erase(it);

    if (msg.kind == MsgKind::error) {
        // The peer is alive but refused; treat as a response without data.
        if (p.node) table_.record_response(*p.node, now_us);
        if (p.method == Method::sample_infohashes && p.node) {
            auto n = neighbors_.find(*p.node);
            if (n != neighbors_.end()) n->second.supports_sampling = false;
        }
        if (p.lookup_id >= 0) {
            auto ls = lookups_.find(p.lookup_id);
            if (ls != lookups_.end()) {
                for (auto& c : ls->second.candidates)
                    if (p.node && c.id == *p.node && c.state == LookupCandidate::State::inflight) {
                        c.state = LookupCandidate::State::responded;
                        ls->second.any_response = true;
                        --ls->second.inflight;
                    }
                advance_lookup(p.lookup_id, now_us);
            }
        }
        return;
    }

    handle_response(msg, from, now_us);

    auto sender = msg.sender_id();
    if (!sender) return;

    if (p.node && *p.node != *sender) {
        // Responder changed identity; keep the new one.
        table_.record_timeout(*p.node);
    }
    table_.insert(*sender, from, now_us);
    table_.record_response(*sender, now_us);

    // Promote to neighbor.
    if (!neighbors_.count(*sender) && neighbors_.size() < cfg_.max_neighbors) {
        NeighborState ns;
        ns.ep = from;
        ns.next_sample_due_us = now_us; // due immediately
        neighbors_[*sender] = ns;
    }

    if (p.method == Method::sample_infohashes) {
        auto n = neighbors_.find(*sender);
        if (n != neighbors_.end()) {
            int64_t interval_s = 10;
            if (const Value* iv = msg.args.find("interval"); iv && iv->is_int())
                interval_s = std::clamp<int64_t>(iv->as_int(), 1, 21600);
            n->second.next_sample_due_us = now_us + interval_s * 1'000'000;
        }
    }

    if (p.lookup_id >= 0) {
        auto ls = lookups_.find(p.lookup_id);
        if (ls != lookups_.end()) {
            LookupState& l = ls->second;
            for (auto& c : l.candidates) {
                if (c.id == *sender && c.state == LookupCandidate::State::inflight) {
                    c.state = LookupCandidate::State::responded;
                    l.any_response = true;
                    --l.inflight;
                }
            }
            if (const Value* nodes = msg.args.find("nodes"); nodes && nodes->is_bytes())
                add_lookup_candidates(l, unpack_compact_nodes(nodes->as_bytes()));
            if (l.want_peers) {
                if (const Value* values = msg.args.find("values"); values && values->is_list()) {
                    for (const auto& v : values->as_list()) {
                        if (!v.is_bytes()) continue;
                        if (auto ep = unpack_compact_peer(v.as_bytes())) {
                            if (std::find(l.peers.begin(), l.peers.end(), *ep) == l.peers.end())
                                l.peers.push_back(*ep);
                        }
                    }
                }
            }
            advance_lookup(p.lookup_id, now_us);
        }
    }
}

void Crawler::handle_response(const KrpcMessage& msg, const Endpoint& from, std::int64_t now_us) {
    if (const Value* nodes = msg.args.find("nodes"); nodes && nodes->is_bytes()) {
        for (const auto& [id, ep] : unpack_compact_nodes(nodes->as_bytes()))
            note_contact(id, ep, now_us);
    }
    if (const Value* samples = msg.args.find("samples"); samples && samples->is_bytes()) {
        const std::string& raw = samples->as_bytes();
        for (size_t off = 0; off + 20 <= raw.size(); off += 20)
            emit(InfoHash{key160_from_bytes(std::string_view(raw).substr(off, 20))}, from, now_us);
    }
}

void Crawler::fail_pending(const std::string& tid, Pending& p, std::int64_t now_us) {
    if (p.retries_left > 0 && rate_allow(now_us)) {
        send_query(p.ep, p.node, p.method, p.target, now_us, p.lookup_id, p.retries_left - 1);
        return;
    }
    if (p.node) {
        table_.record_timeout(*p.node);
        // Unresponsive neighbors stop being neighbors.
        auto n = neighbors_.find(*p.node);
        if (n != neighbors_.end() && table_.find(*p.node) &&
            table_.find(*p.node)->state == Liveness::bad)
            neighbors_.erase(n);
    }
    if (p.lookup_id >= 0) {
        auto ls = lookups_.find(p.lookup_id);
        if (ls != lookups_.end()) {
            for (auto& c : ls->second.candidates) {
                if (p.node && c.id == *p.node && c.state == LookupCandidate::State::inflight) {
                    c.state = LookupCandidate::State::failed;
                    --ls->second.inflight;
                }
            }
            advance_lookup(p.lookup_id, now_us);
        }
    }
    (void)tid;
}

void Crawler::on_tick(std::int64_t now_us) {
    if (!started_) return;
    now_us_ = now_us;

    // Expire transactions.
    std::vector<std::string> expired;
    for (auto& [tid, p] : pending_)
        if (now_us - p.sent_us >= cfg_.query_timeout_us) expired.push_back(tid);
    for (const auto& tid : expired) {
        auto it = pending_.find(tid);
        if (it == pending_.end()) continue;
        Pending p = std::move(it->second);
        pending_.erase(it);
        fail_pending(tid, p, now_us);
    }

    // Probe newly learned contacts (graph expansion).
    while (!probe_queue_.empty() && rate_allow(now_us)) {
        auto [node, ep] = probe_queue_.front();
        probe_queue_.pop_front();
        queued_eps_.erase(ep_key(ep));
        send_query(ep, node, Method::find_node, random_key(rng_), now_us, -1, 0);
    }

    // Re-sample neighbors that are due.
    if (cfg_.use_sampling) {
        for (auto& [id, ns] : neighbors_) {
            if (!ns.supports_sampling) continue;
            if (ns.next_sample_due_us > now_us) continue;
            if (!rate_allow(now_us)) break;
            ns.next_sample_due_us = now_us + 5'000'000; // nudged forward until the reply sets it
            send_query(ns.ep, id, Method::sample_infohashes, random_key(rng_), now_us, -1, 0);
        }
    }

    // Heartbeat telemetry.
    if (on_heartbeat && now_us - last_heartbeat_us_ >= cfg_.heartbeat_interval_us) {
        double dt_s = double(now_us - last_heartbeat_us_) / 1e6;
        HeartBeat hb;
        hb.at_us = now_us;
        hb.neighbors = neighbors_.size();
        hb.queries_per_s = double(queries_sent_ - queries_at_last_beat_) / dt_s;
        hb.discoveries_per_s = double(seen_.size() - discoveries_at_last_beat_) / dt_s;
        hb.discovered_total = seen_.size();
        queries_at_last_beat_ = queries_sent_;
        discoveries_at_last_beat_ = seen_.size();
        last_heartbeat_us_ = now_us;
        on_heartbeat(hb);
    }
}

void Crawler::lookup(const Key160& target, bool want_peers,
                     std::function<void(const LookupResult&)> done) {
    int id = next_lookup_id_++;
    LookupState ls;
    ls.target = target;
    ls.want_peers = want_peers;
    ls.done = std::move(done);
    for (const auto& c : table_.closest(target, cfg_.k * 2))
        ls.candidates.push_back(LookupCandidate{c.id, c.ep, LookupCandidate::State::fresh});
    lookups_[id] = std::move(ls);
    advance_lookup(id, now_us_);
}

void Crawler::add_lookup_candidates(LookupState& ls,
                                    const std::vector<std::pair<NodeId, Endpoint>>& nodes) {
    for (const auto& [id, ep] : nodes) {
        if (id == own_id_) continue;
        bool known = false;
        for (const auto& c : ls.candidates)
            if (c.id == id) {
                known = true;
                break;
            }
        if (!known) ls.candidates.push_back(LookupCandidate{id, ep, LookupCandidate::State::fresh});
    }
    std::sort(ls.candidates.begin(), ls.candidates.end(),
              [&ls](const LookupCandidate& a, const LookupCandidate& b) {
                  return xor_distance(a.id.bytes, ls.target) < xor_distance(b.id.bytes, ls.target);
              });
}

void Crawler::advance_lookup(int lookup_id, std::int64_t now_us) {
    auto it = lookups_.find(lookup_id);
    if (it == lookups_.end()) return;
    LookupState& ls = it->second;
    if (ls.finished) return;

    std::sort(ls.candidates.begin(), ls.candidates.end(),
              [&ls](const LookupCandidate& a, const LookupCandidate& b) {
                  return xor_distance(a.id.bytes, ls.target) < xor_distance(b.id.bytes, ls.target);
              });

    // Query fresh candidates among the k closest not-yet-failed ones.
    while (ls.inflight < cfg_.alpha) {
        LookupCandidate* next = nullptr;
        int considered = 0;
        for (auto& c : ls.candidates) {
            if (c.state == LookupCandidate::State::failed) continue;
            if (++considered > cfg_.k) break;
            if (c.state == LookupCandidate::State::fresh) {
                next = &c;
                break;
            }
        }
        if (!next) break;
        next->state = LookupCandidate::State::inflight;
        ++ls.inflight;
        send_query(next->ep, next->id, ls.want_peers ? Method::get_peers : Method::find_node,
                   ls.target, now_us, lookup_id, cfg_.retries);
    }

    if (ls.inflight > 0) return;

    // Nothing in flight and no fresh candidate left in the top k: converged.
    ls.finished = true;
    LookupResult result;
    result.target = ls.target;
    result.ok = ls.any_response;
    result.peers = ls.peers;
    for (const auto& c : ls.candidates) {
        if (c.state != LookupCandidate::State::responded) continue;
        Contact contact;
        contact.id = c.id;
        contact.ep = c.ep;
        result.closest.push_back(contact);
        if (int(result.closest.size()) >= cfg_.k) break;
    }
    auto done = std::move(ls.done);
    lookups_.erase(it);
    if (done) done(result);
}

} // namespace btsup
