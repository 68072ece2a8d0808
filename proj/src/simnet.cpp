#include "btsupply/simnet.hpp"

#include "btsupply/bytes.hpp"
#include "btsupply/sha1.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace btsup {

using bencode::Value;

namespace {

// ---------------------------------------------------------------------------
// Synthetic torrent generation

const char* const kTitleWords[] = {
    "Midnight", "Harbor",  "Echoes", "Crimson", "Falcon", "Winter",  "Garden", "Silent",
    "Empire",   "Shadow",  "River",  "Golden",  "Letters", "Voyage", "Thunder", "Orchid",
    "Paper",    "Hollow",  "Iron",   "Velvet",  "Northern", "Last",  "Broken",  "Glass",
};
const char* const kGroups[] = {
    "ION10", "NTb", "FLUX", "CAKES", "GGEZ", "SYNCOPY", "TEPES", "EDITH",
    "SPARKS", "AMIABLE", "DRONES", "GECKOS", "ROVERS", "YIFY", "PSA",
};
const char* const kQualities[] = {"BluRay", "WEB-DL", "WEBRip", "HDTV", "DVDRip", "WEB"};
const char* const kResolutions[] = {"720p", "1080p", "2160p", "480p"};
const char* const kCodecs[] = {"x264", "x265", "h264", "XviD"};
const char* const kLanguages[] = {"FRENCH", "GERMAN", "SPANISH", "RUSSIAN", "POLISH", "KOREAN"};
const char* const kJunkNames[] = {
    "project-backup", "linux-distro-netinst", "SoundPack-Vol", "dataset-dump",
    "firmware-update", "wallpapers-collection", "podcast-archive",
};

template <size_t N>
const char* pick(std::mt19937_64& rng, const char* const (&arr)[N]) {
    return arr[rng() % N];
}

std::string dotify(std::string_view title) {
    std::string out;
    bool pending_dot = false;
    for (char c : title) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (pending_dot && !out.empty()) out.push_back('.');
            pending_dot = false;
            out.push_back(c);
        } else {
            pending_dot = true;
        }
    }
    return out;
}

std::string synth_title(std::mt19937_64& rng) {
    int words = 2 + int(rng() % 3);
    std::string t;
    for (int i = 0; i < words; ++i) {
        if (i) t.push_back(' ');
        t += pick(rng, kTitleWords);
    }
    return t;
}

struct SynthTorrent {
    std::string name;
    Value info{Value::Dict{}};
};

uint64_t size_between(std::mt19937_64& rng, uint64_t lo, uint64_t hi) {
    return lo + rng() % (hi - lo);
}

std::string fake_pieces(std::mt19937_64& rng, size_t bytes) {
    std::string s(bytes, '\0');
    for (auto& c : s) c = char(rng() & 0xff);
    return s;
}

// Builds one synthetic info dictionary in the shape real clients produce.
SynthTorrent synth_torrent(std::mt19937_64& rng, const WorldConfig& cfg,
                           const std::vector<const CatalogEntry*>& movies,
                           const std::vector<const CatalogEntry*>& shows, size_t serial) {
    auto roll = [&rng]() { return double(rng() % 10000) / 10000.0; };
    SynthTorrent t;

    size_t pieces_len = cfg.large_info_prob > 0 && roll() < cfg.large_info_prob
                            ? kMetadataPieceSize * 2 + 512 // forces a multi-piece fetch
                            : 20;
    // The serial stamp keeps every blob (and so every infohash) unique.
    std::string pieces = fake_pieces(rng, pieces_len) + std::to_string(serial);

    if (roll() < cfg.junk_prob) {
        std::string base = std::string(pick(rng, kJunkNames)) + "-" + std::to_string(rng() % 90 + 10);
        t.name = base;
        Value::List files;
        int n = 1 + int(rng() % 4);
        for (int i = 0; i < n; ++i) {
            Value f{Value::Dict{}};
            const char* ext = (rng() % 2) ? ".zip" : ".iso";
            f.set("length", Value(int64_t(size_between(rng, 1 << 20, 3ull << 30))));
            f.set("path", Value::list({Value(base + "-part" + std::to_string(i + 1) + ext)}));
            files.push_back(std::move(f));
        }
        t.info.set("files", Value(std::move(files)));
        t.info.set("name", Value(t.name));
        t.info.set("piece length", Value(int64_t{262144}));
        t.info.set("pieces", Value(pieces));
        return t;
    }

    bool tv = roll() < cfg.multi_file_prob;
    std::string title;
    std::optional<int> year;
    if (tv && !shows.empty() && roll() < 0.75) {
        const CatalogEntry* e = shows[rng() % shows.size()];
        title = e->title;
        year = e->year;
    } else if (!tv && !movies.empty() && roll() < 0.75) {
        const CatalogEntry* e = movies[rng() % movies.size()];
        title = e->title;
        year = e->year;
    } else {
        title = synth_title(rng);
        year = 1950 + int(rng() % 74);
    }

    std::string res = pick(rng, kResolutions);
    std::string qual = pick(rng, kQualities);
    std::string codec = pick(rng, kCodecs);
    std::string group = pick(rng, kGroups);
    std::string lang = roll() < 0.25 ? std::string(pick(rng, kLanguages)) + "." : "";
    std::string dotted = dotify(title);

    auto maybe_corrupt_path = [&](std::string p) {
        if (cfg.bad_utf8_prob > 0 && roll() < cfg.bad_utf8_prob) p.insert(p.size() / 2, "\xff\xfe");
        return p;
    };

    if (tv) {
        int season = 1 + int(rng() % 3);
        int episodes = 2 + int(rng() % 8);
        char sbuf[8];
        std::snprintf(sbuf, sizeof sbuf, "S%02d", season);
        t.name = dotted + "." + sbuf + ".COMPLETE." + lang + res + "." + qual + "." + codec + "-" + group;
        Value::List files;
        for (int e = 1; e <= episodes; ++e) {
            char ebuf[16];
            std::snprintf(ebuf, sizeof ebuf, "S%02dE%02d", season, e);
            std::string fname = dotted + "." + ebuf + "." + lang + res + "." + qual + "." + codec +
                                "-" + group + ".mkv";
            Value f{Value::Dict{}};
            f.set("length", Value(int64_t(size_between(rng, 200ull << 20, 2ull << 30))));
            f.set("path", Value::list({Value(maybe_corrupt_path(fname))}));
            files.push_back(std::move(f));
        }
        if (rng() % 2) {
            Value f{Value::Dict{}};
            f.set("length", Value(int64_t(size_between(rng, 1 << 10, 20 << 10))));
            f.set("path", Value::list({Value(group + ".nfo")}));
            files.push_back(std::move(f));
        }
        t.info.set("files", Value(std::move(files)));
        t.info.set("name", Value(t.name));
    } else {
        std::string ybuf = year ? std::to_string(*year) + "." : "";
        const char* ext = (rng() % 4) ? ".mkv" : ".mp4";
        std::string base = dotted + "." + ybuf + lang + res + "." + qual + "." + codec + "-" + group;
        t.name = base + ext;
        if (rng() % 3 == 0) {
            // movie with a sample and credits file alongside the feature
            Value::List files;
            Value main{Value::Dict{}};
            main.set("length", Value(int64_t(size_between(rng, 700ull << 20, 8ull << 30))));
            main.set("path", Value::list({Value(maybe_corrupt_path(base + ext))}));
            files.push_back(std::move(main));
            Value sample{Value::Dict{}};
            sample.set("length", Value(int64_t(size_between(rng, 10 << 20, 60 << 20))));
            sample.set("path",
                       Value::list({Value("Sample"), Value(base + ".sample" + std::string(ext))}));
            files.push_back(std::move(sample));
            Value nfo{Value::Dict{}};
            nfo.set("length", Value(int64_t(size_between(rng, 1 << 10, 20 << 10))));
            nfo.set("path", Value::list({Value(group + ".nfo")}));
            files.push_back(std::move(nfo));
            t.info.set("files", Value(std::move(files)));
            t.info.set("name", Value(base));
            t.name = base;
        } else {
            t.info.set("length", Value(int64_t(size_between(rng, 700ull << 20, 8ull << 30))));
            t.info.set("name", Value(maybe_corrupt_path(t.name)));
        }
    }
    t.info.set("piece length", Value(int64_t{262144}));
    t.info.set("pieces", Value(pieces));
    return t;
}

} // namespace

// ---------------------------------------------------------------------------
// SimMetadataServer

SimMetadataServer::SimMetadataServer(BlobLookup lookup, SimPeerBehavior behavior)
    : lookup_(std::move(lookup)), behavior_(behavior) {}

void SimMetadataServer::on_bytes(std::string_view in, std::string& out) {
    if (closed_) return;
    buf_.append(in.data(), in.size());
    process(out);
}

void SimMetadataServer::process(std::string& out) {
    auto be32 = [](uint32_t v) {
        std::string s(4, '\0');
        s[0] = char(v >> 24);
        s[1] = char(v >> 16);
        s[2] = char(v >> 8);
        s[3] = char(v);
        return s;
    };

    if (!handshaken_) {
        if (buf_.size() < 68) return;
        if (behavior_.refuse_handshake || buf_[0] != 19 ||
            buf_.compare(1, 19, "BitTorrent protocol") != 0) {
            closed_ = true;
            return;
        }
        InfoHash ih{key160_from_bytes(std::string_view(buf_).substr(28, 20))};
        blob_ = lookup_(ih);
        if (!blob_) {
            closed_ = true; // we do not serve this swarm
            return;
        }
        std::string reply;
        reply.push_back(char(19));
        reply.append("BitTorrent protocol");
        std::string reserved(8, '\0');
        if (!behavior_.no_extension) reserved[5] = char(0x10);
        reply.append(reserved);
        reply.append(ih.raw());
        reply.append("-SIM001-seededpeer00");
        out += reply;
        buf_.erase(0, 68);
        handshaken_ = true;
        expected_pieces_ = (blob_->size() + kMetadataPieceSize - 1) / kMetadataPieceSize;

        if (!behavior_.no_extension) {
            Value m{Value::Dict{}};
            m.set("ut_metadata", Value(int64_t{3}));
            Value hs{Value::Dict{}};
            hs.set("m", std::move(m));
            hs.set("metadata_size", Value(int64_t(blob_->size())));
            std::string payload = bencode::encode(hs);
            out += be32(uint32_t(2 + payload.size()));
            out.push_back(char(20));
            out.push_back(char(0));
            out += payload;
        }
    }

    while (buf_.size() >= 4) {
        uint32_t len = (uint32_t(uint8_t(buf_[0])) << 24) | (uint32_t(uint8_t(buf_[1])) << 16) |
                       (uint32_t(uint8_t(buf_[2])) << 8) | uint32_t(uint8_t(buf_[3]));
        if (len == 0) {
            buf_.erase(0, 4);
            continue;
        }
        if (buf_.size() < 4 + len) return;
        std::string payload = buf_.substr(4, len);
        buf_.erase(0, 4 + len);
        if (payload.size() < 2 || uint8_t(payload[0]) != 20) continue;
        uint8_t ext_id = uint8_t(payload[1]);
        std::string body = payload.substr(2);
        if (ext_id == 0) {
            // client's extended handshake: learn where to send data messages
            try {
                auto d = bencode::decode(body);
                if (const Value* m = d.value.find("m")) {
                    if (const Value* mid = m->find("ut_metadata"); mid && mid->is_int())
                        client_metadata_id_ = int(mid->as_int());
                }
            } catch (const bencode::Error&) {
            }
            continue;
        }
        if (ext_id != 3 || !blob_) continue;
        bencode::Decoded d;
        try {
            d = bencode::decode(body);
        } catch (const bencode::Error&) {
            continue;
        }
        const Value* type = d.value.find("msg_type");
        const Value* piece = d.value.find("piece");
        if (!type || !type->is_int() || !piece || !piece->is_int()) continue;
        if (type->as_int() != 0) continue;
        size_t idx = size_t(piece->as_int());
        ++requests_seen_;

        std::string reply_payload;
        if (behavior_.reject_requests) {
            Value r{Value::Dict{}};
            r.set("msg_type", Value(int64_t{2}));
            r.set("piece", Value(int64_t(idx)));
            reply_payload = bencode::encode(r);
        } else {
            size_t off = idx * kMetadataPieceSize;
            if (off >= blob_->size()) continue;
            std::string data = blob_->substr(off, kMetadataPieceSize);
            if (behavior_.corrupt_piece && idx == 0 && !data.empty()) data[0] ^= 0x01;
            Value r{Value::Dict{}};
            r.set("msg_type", Value(int64_t{1}));
            r.set("piece", Value(int64_t(idx)));
            r.set("total_size", Value(int64_t(blob_->size())));
            reply_payload = bencode::encode(r) + data;
        }
        std::string framed;
        framed += be32(uint32_t(2 + reply_payload.size()));
        framed.push_back(char(20));
        framed.push_back(char(client_metadata_id_));
        framed += reply_payload;

        if (behavior_.reverse_piece_delivery) {
            held_.emplace_back(idx, std::move(framed));
            if (requests_seen_ >= expected_pieces_) {
                std::sort(held_.begin(), held_.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first; });
                for (auto& [i, f] : held_) out += f;
                held_.clear();
            }
        } else {
            out += framed;
        }
    }
}

SimPeerStream::SimPeerStream(SimMetadataServer::BlobLookup lookup, SimPeerBehavior behavior)
    : server_(std::move(lookup), behavior) {}

void SimPeerStream::write(std::string_view data) { server_.on_bytes(data, inbox_); }

std::size_t SimPeerStream::read_some(char* buf, std::size_t cap, int /*timeout_ms*/) {
    if (inbox_.empty()) return 0;
    size_t n = std::min(cap, inbox_.size());
    std::memcpy(buf, inbox_.data(), n);
    inbox_.erase(0, n);
    return n;
}

// ---------------------------------------------------------------------------
// World construction

SimWorld SimWorld::build(const WorldConfig& cfg) { return build(cfg, {}); }

SimWorld SimWorld::build(const WorldConfig& cfg, const std::vector<CatalogEntry>& titles) {
    if (cfg.node_count < 1) throw std::invalid_argument("simworld needs at least one node");
    if (cfg.replication < 1) throw std::invalid_argument("replication must be >= 1");
    if (cfg.packet_loss < 0 || cfg.packet_loss >= 1)
        throw std::invalid_argument("packet_loss must be in [0,1)");

    SimWorld w;
    w.cfg_ = cfg;
    std::mt19937_64 rng(cfg.seed);

    std::vector<const CatalogEntry*> movies, shows;
    for (const auto& e : titles)
        (catalog_kind_is_tv(e.kind) ? shows : movies).push_back(&e);

    // Nodes with ids, addresses, responsiveness profiles.
    for (size_t i = 0; i < cfg.node_count; ++i) {
        auto n = std::make_unique<VNode>();
        for (auto& b : n->id.bytes) b = uint8_t(rng() & 0xff);
        n->ep = Endpoint{uint32_t(0x0a000000u + i + 1), 6881};
        double roll = double(rng() % 10000) / 10000.0;
        if (roll < cfg.silent_fraction) {
            n->profile = VNode::Profile::silent;
        } else if (roll < cfg.silent_fraction + cfg.droppy_fraction) {
            n->profile = VNode::Profile::droppy;
            n->drop_p = cfg.drop_p;
        }
        n->table = std::make_unique<RoutingTable>(n->id, 8);
        // Per-node sampling cadence; desynchronized nodes keep the aggregate
        // discovery rate from pulsing in lockstep waves.
        double jitter = cfg.sample_interval_jitter;
        double scale = 1.0 - jitter + 2.0 * jitter * (double(rng() % 10000) / 10000.0);
        auto interval = std::max<std::int64_t>(1, std::int64_t(double(cfg.sample_interval_s) * scale));
        n->responder = std::make_unique<DhtResponder>(
            n->id, n->table.get(), cfg.seed ^ (i * 0x9e3779b97f4a7c15ull),
            ResponderConfig{cfg.sample_batch, interval});
        w.by_endpoint_[n->ep] = i;
        w.nodes_.push_back(std::move(n));
    }

    // Topology: every node knows its nearest neighbors (converged-DHT
    // property that makes greedy lookups land on the true closest set) plus
    // random long links, echoing the random-graph shape of the real network.
    std::vector<size_t> order(cfg.node_count);
    for (size_t i = 0; i < cfg.node_count; ++i) order[i] = i;
    for (size_t i = 0; i < cfg.node_count; ++i) {
        auto& me = *w.nodes_[i];
        std::vector<size_t> others;
        others.reserve(cfg.node_count - 1);
        for (size_t j = 0; j < cfg.node_count; ++j)
            if (j != i) others.push_back(j);
        std::sort(others.begin(), others.end(), [&](size_t a, size_t b) {
            return xor_distance(w.nodes_[a]->id.bytes, me.id.bytes) <
                   xor_distance(w.nodes_[b]->id.bytes, me.id.bytes);
        });
        size_t take = std::min(cfg.neighbors_nearest, others.size());
        for (size_t j = 0; j < take; ++j)
            me.table->insert(w.nodes_[others[j]]->id, w.nodes_[others[j]]->ep, 0);
        for (size_t j = 0; j < cfg.neighbors_random && !others.empty(); ++j) {
            size_t pickidx = others[rng() % others.size()];
            me.table->insert(w.nodes_[pickidx]->id, w.nodes_[pickidx]->ep, 0);
        }
    }

    // Torrents: metadata blob first, infohash is its digest, replicas land on
    // the XOR-closest nodes, and holders know each other as swarm peers.
    for (size_t h = 0; h < cfg.infohash_count; ++h) {
        SynthTorrent t = synth_torrent(rng, cfg, movies, shows, h);
        std::string blob = bencode::encode(t.info);
        Sha1Digest d = sha1(blob);
        InfoHash ih;
        std::copy(d.begin(), d.end(), ih.bytes.begin());
        if (w.metadata_.count(ih)) continue; // digest collision: skip duplicate blob
        w.metadata_[ih] = std::move(blob);
        w.hashes_.push_back(ih);

        std::vector<size_t> ranked = order;
        std::sort(ranked.begin(), ranked.end(), [&](size_t a, size_t b) {
            return xor_distance(w.nodes_[a]->id.bytes, ih.bytes) <
                   xor_distance(w.nodes_[b]->id.bytes, ih.bytes);
        });
        size_t replicas = std::min<size_t>(cfg.replication, ranked.size());
        auto& hold = w.holders_[ih];
        for (size_t r = 0; r < replicas; ++r) {
            size_t idx = ranked[r];
            hold.push_back(idx);
            w.nodes_[idx]->held.push_back(ih);
            w.nodes_[idx]->responder->add_local_hash(ih);
        }
        for (size_t r = 0; r < replicas; ++r)
            for (size_t s = 0; s < replicas; ++s)
                if (r != s)
                    w.nodes_[ranked[r]]->responder->peer_store().add(ih, w.nodes_[ranked[s]]->ep);
    }
    return w;
}

const std::string* SimWorld::metadata_for(const InfoHash& ih) const {
    auto it = metadata_.find(ih);
    return it == metadata_.end() ? nullptr : &it->second;
}

std::vector<Endpoint> SimWorld::holders(const InfoHash& ih) const {
    std::vector<Endpoint> out;
    auto it = holders_.find(ih);
    if (it == holders_.end()) return out;
    for (size_t idx : it->second) out.push_back(nodes_[idx]->ep);
    return out;
}

std::vector<Endpoint> SimWorld::node_endpoints(std::size_t n) const {
    std::vector<Endpoint> out;
    for (size_t i = 0; i < std::min(n, nodes_.size()); ++i) out.push_back(nodes_[i]->ep);
    return out;
}

std::vector<NodeId> SimWorld::closest_node_ids(const Key160& target, std::size_t k) const {
    std::vector<NodeId> ids;
    for (const auto& n : nodes_)
        if (n->profile != VNode::Profile::silent) ids.push_back(n->id);
    std::sort(ids.begin(), ids.end(), [&](const NodeId& a, const NodeId& b) {
        return xor_distance(a.bytes, target) < xor_distance(b.bytes, target);
    });
    if (ids.size() > k) ids.resize(k);
    return ids;
}

std::unique_ptr<PeerStream> SimWorld::connect(const Endpoint& peer, SimPeerBehavior behavior) const {
    auto it = by_endpoint_.find(peer);
    if (it == by_endpoint_.end()) {
        behavior.refuse_handshake = true;
        return std::make_unique<SimPeerStream>([](const InfoHash&) { return nullptr; }, behavior);
    }
    size_t idx = it->second;
    if (nodes_[idx]->profile == VNode::Profile::silent) behavior.refuse_handshake = true;
    auto lookup = [this, idx](const InfoHash& ih) -> const std::string* {
        auto hit = holders_.find(ih);
        if (hit == holders_.end()) return nullptr;
        if (std::find(hit->second.begin(), hit->second.end(), idx) == hit->second.end())
            return nullptr;
        auto mit = metadata_.find(ih);
        return mit == metadata_.end() ? nullptr : &mit->second;
    };
    return std::make_unique<SimPeerStream>(lookup, behavior);
}

// ---------------------------------------------------------------------------
// Crawl simulation

namespace {

struct Event {
    int64_t at;
    uint64_t seq;
    std::function<void()> fn;
};
struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
        return a.at > b.at || (a.at == b.at && a.seq > b.seq);
    }
};

} // namespace

CrawlTrace SimWorld::run_crawl(const CrawlerConfig& crawler_cfg, std::int64_t duration_us) {
    return run_with(crawler_cfg, duration_us, {});
}

std::optional<LookupResult> SimWorld::run_lookup(const CrawlerConfig& crawler_cfg,
                                                 const Key160& target, bool want_peers,
                                                 std::int64_t duration_us) {
    std::optional<LookupResult> out;
    std::vector<ScriptStep> script;
    script.emplace_back(duration_us / 2, [&out, target, want_peers](Crawler& c) {
        c.lookup(target, want_peers, [&out](const LookupResult& r) { out = r; });
    });
    run_with(crawler_cfg, duration_us, std::move(script));
    return out;
}

CrawlTrace SimWorld::run_with(const CrawlerConfig& crawler_cfg, std::int64_t duration_us,
                              std::vector<ScriptStep> script) {
    const int64_t start = epoch_start_us();
    const int64_t end = start + duration_us;
    int64_t now = start;
    uint64_t seq = 0;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
    auto schedule = [&](int64_t at, std::function<void()> fn) {
        queue.push(Event{at, seq++, std::move(fn)});
    };

    std::mt19937_64 trng(cfg_.seed ^ crawler_cfg.seed ^ 0x7472616e73706f72ull);
    std::lognormal_distribution<double> lat_dist(std::log(std::max(0.1, cfg_.latency_mean_ms)),
                                                 cfg_.latency_sigma);
    auto latency_us = [&]() { return int64_t(lat_dist(trng) * 1000.0) + 100; };
    auto lost = [&]() {
        if (cfg_.packet_loss <= 0) return false;
        return double(trng() % 1000000) / 1000000.0 < cfg_.packet_loss;
    };

    CrawlTrace trace;
    const Endpoint crawler_ep{0xc0000001u, 6881};
    NodeId crawler_id;
    {
        std::mt19937_64 idrng(crawler_cfg.seed ^ 0x63726177ull);
        for (auto& b : crawler_id.bytes) b = uint8_t(idrng() & 0xff);
    }
    trace.crawler_id = crawler_id;

    struct QueueSender : PacketSender {
        std::function<void(const Endpoint&, std::string)> fn;
        void send(const Endpoint& to, std::string payload) override { fn(to, std::move(payload)); }
    } sender;

    Crawler crawler(crawler_cfg, crawler_id, sender);
    crawler.on_discovery = [&](const Discovery& d) { trace.discoveries.push_back(d); };
    crawler.on_heartbeat = [&](const HeartBeat& hb) { trace.heartbeats.push_back(hb); };

    // node -> crawler
    auto node_send = [&](const Endpoint& from, std::string payload) {
        if (lost()) return;
        schedule(now + latency_us(), [&crawler, from, payload = std::move(payload), &now]() {
            crawler.on_packet(from, payload, now);
        });
    };

    auto deliver_to_node = [&](size_t idx, const Endpoint& from, const std::string& payload) {
        VNode& n = *nodes_[idx];
        if (n.profile == VNode::Profile::silent) return;
        if (n.profile == VNode::Profile::droppy &&
            double(trng() % 1000000) / 1000000.0 < n.drop_p)
            return;
        KrpcMessage msg;
        try {
            msg = parse_krpc(payload);
        } catch (const std::exception&) {
            return;
        }
        if (msg.kind == MsgKind::query) {
            auto reply = n.responder->handle(msg, from, now);
            if (reply) node_send(n.ep, std::move(*reply));
            // First contact from the crawler may trigger the passive channel:
            // the node fetches a token and announces one of its torrents.
            if (from == crawler_ep && !n.poked) {
                n.poked = true;
                if (!n.held.empty() &&
                    double(trng() % 1000000) / 1000000.0 < cfg_.announce_prob) {
                    n.announce_stage = 1;
                    n.announce_hash = n.held[trng() % n.held.size()];
                    Value args{Value::Dict{}};
                    args.set("id", Value(n.id.raw()));
                    args.set("info_hash", Value(n.announce_hash->raw()));
                    node_send(n.ep, encode_query("gp", Method::get_peers, std::move(args)));
                }
            }
            return;
        }
        if (msg.kind == MsgKind::response && n.announce_stage == 1 && from == crawler_ep) {
            const Value* token = msg.args.find("token");
            if (token && token->is_bytes() && n.announce_hash) {
                n.announce_stage = 2;
                Value args{Value::Dict{}};
                args.set("id", Value(n.id.raw()));
                args.set("info_hash", Value(n.announce_hash->raw()));
                args.set("token", Value(token->as_bytes()));
                args.set("port", Value(int64_t{n.ep.port}));
                node_send(n.ep, encode_query("an", Method::announce_peer, std::move(args)));
            }
        }
    };

    sender.fn = [&](const Endpoint& to, std::string payload) {
        if (lost()) return;
        auto it = by_endpoint_.find(to);
        if (it == by_endpoint_.end()) return; // packets into the void
        size_t idx = it->second;
        schedule(now + latency_us(), [&deliver_to_node, idx, payload = std::move(payload),
                                      crawler_ep]() { deliver_to_node(idx, crawler_ep, payload); });
    };

    crawler.start(now); // throws BootstrapFailure on empty bootstrap list

    constexpr int64_t kTickUs = 50'000;
    std::function<void()> tick = [&]() {
        crawler.on_tick(now);
        if (now + kTickUs <= end) schedule(now + kTickUs, tick);
    };
    schedule(start + kTickUs, tick);

    for (auto& [offset, fn] : script)
        schedule(start + offset, [&crawler, fn = std::move(fn)]() { fn(crawler); });

    while (!queue.empty()) {
        Event ev = queue.top();
        queue.pop();
        if (ev.at > end) break;
        now = ev.at;
        ev.fn();
    }
    trace.virtual_end_us = end;
    return trace;
}

std::string trace_to_csv(const CrawlTrace& trace) {
    std::ostringstream out;
    out << "at_us,infohash,source\n";
    for (const auto& d : trace.discoveries)
        out << d.at_us << "," << d.hash.hex() << "," << d.source.to_string() << "\n";
    return out.str();
}

} // namespace btsup
