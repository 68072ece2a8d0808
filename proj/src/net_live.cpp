#include "btsupply/net_live.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <random>

namespace btsup {

namespace {

int64_t wall_us() {
    using namespace std::chrono;
    return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

sockaddr_in to_sockaddr(const Endpoint& ep) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(ep.ip);
    sa.sin_port = htons(ep.port);
    return sa;
}

Endpoint from_sockaddr(const sockaddr_in& sa) {
    return Endpoint{ntohl(sa.sin_addr.s_addr), ntohs(sa.sin_port)};
}

class UdpSocket : public PacketSender {
public:
    explicit UdpSocket(uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw std::runtime_error("udp socket() failed");
        sockaddr_in bind_addr{};
        bind_addr.sin_family = AF_INET;
        bind_addr.sin_addr.s_addr = htonl(INADDR_ANY);
        bind_addr.sin_port = htons(port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&bind_addr), sizeof bind_addr) < 0) {
            ::close(fd_);
            throw std::runtime_error("udp bind() failed on port " + std::to_string(port));
        }
    }
    ~UdpSocket() override { ::close(fd_); }

    void send(const Endpoint& to, std::string payload) override {
        sockaddr_in sa = to_sockaddr(to);
        ::sendto(fd_, payload.data(), payload.size(), 0, reinterpret_cast<sockaddr*>(&sa),
                 sizeof sa);
    }

    // Dispatches pending datagrams into the crawler; waits up to wait_ms.
    void pump(Crawler& crawler, int wait_ms) {
        pollfd pfd{fd_, POLLIN, 0};
        if (::poll(&pfd, 1, wait_ms) <= 0) return;
        char buf[65536];
        for (;;) {
            sockaddr_in from{};
            socklen_t fromlen = sizeof from;
            ssize_t n = ::recvfrom(fd_, buf, sizeof buf, MSG_DONTWAIT,
                                   reinterpret_cast<sockaddr*>(&from), &fromlen);
            if (n <= 0) break;
            crawler.on_packet(from_sockaddr(from), std::string_view(buf, size_t(n)), wall_us());
        }
    }

private:
    int fd_ = -1;
};

class TcpPeerStream : public PeerStream {
public:
    TcpPeerStream(const Endpoint& peer, int connect_timeout_ms) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw FetchError(FetchErrorKind::handshake_refused, "socket() failed");
        timeval tv{connect_timeout_ms / 1000, (connect_timeout_ms % 1000) * 1000};
        ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        sockaddr_in sa = to_sockaddr(peer);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
            ::close(fd_);
            fd_ = -1;
            throw FetchError(FetchErrorKind::handshake_refused,
                             "connect to " + peer.to_string() + " failed");
        }
    }
    ~TcpPeerStream() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void write(std::string_view data) override {
        size_t off = 0;
        while (off < data.size()) {
            ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n <= 0)
                throw FetchError(FetchErrorKind::piece_timeout, "tcp send failed");
            off += size_t(n);
        }
    }

    std::size_t read_some(char* buf, std::size_t cap, int timeout_ms) override {
        pollfd pfd{fd_, POLLIN, 0};
        if (::poll(&pfd, 1, timeout_ms) <= 0) return 0;
        ssize_t n = ::recv(fd_, buf, cap, 0);
        return n <= 0 ? 0 : size_t(n);
    }

private:
    int fd_ = -1;
};

} // namespace

std::optional<Endpoint> resolve_endpoint(const std::string& spec) {
    size_t colon = spec.rfind(':');
    if (colon == std::string::npos || colon + 1 >= spec.size()) return std::nullopt;
    std::string host = spec.substr(0, colon);
    std::string port = spec.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res) return std::nullopt;
    Endpoint ep = from_sockaddr(*reinterpret_cast<sockaddr_in*>(res->ai_addr));
    freeaddrinfo(res);
    if (ep.port == 0) return std::nullopt;
    return ep;
}

LiveCrawlStats run_live_crawl(const LiveCrawlOptions& opts,
                              const std::function<void(const TorrentMeta&, const Discovery&)>& sink,
                              const std::function<void(const HeartBeat&)>& telemetry) {
    LiveCrawlStats stats;
    UdpSocket socket(opts.bind_port);

    NodeId own;
    std::mt19937_64 rng(opts.crawler.seed ^ uint64_t(wall_us()));
    for (auto& b : own.bytes) b = uint8_t(rng() & 0xff);

    Crawler crawler(opts.crawler, own, socket);
    std::vector<Discovery> discoveries;
    crawler.on_discovery = [&](const Discovery& d) { discoveries.push_back(d); };
    crawler.on_heartbeat = telemetry;
    crawler.start(wall_us());

    const int64_t crawl_end = wall_us() + opts.crawl_duration_s * 1'000'000;
    while (wall_us() < crawl_end) {
        socket.pump(crawler, 20);
        crawler.on_tick(wall_us());
    }
    stats.discovered = discoveries.size();

    // Fetch phase: resolve swarm peers per hash, try them in xor-closeness
    // order, first success wins.
    for (const auto& d : discoveries) {
        if (stats.fetched >= opts.max_fetches) break;
        bool resolved = false;
        LookupResult peers_result;
        crawler.lookup(d.hash.bytes, true, [&](const LookupResult& r) {
            peers_result = r;
            resolved = true;
        });
        const int64_t lookup_end = wall_us() + 15'000'000;
        while (!resolved && wall_us() < lookup_end) {
            socket.pump(crawler, 20);
            crawler.on_tick(wall_us());
        }
        if (!resolved || peers_result.peers.empty()) {
            ++stats.fetch_failures;
            continue;
        }
        auto peers = peers_result.peers;
        std::sort(peers.begin(), peers.end(), [&](const Endpoint& a, const Endpoint& b) {
            // xor-closeness over the packed address, a stable deterministic order
            return pack_compact_peer(a) < pack_compact_peer(b);
        });
        if (peers.size() > opts.peers_per_hash) peers.resize(opts.peers_per_hash);
        bool ok = false;
        for (const auto& peer : peers) {
            try {
                TcpPeerStream stream(peer, 5000);
                TorrentMeta meta = fetch_metadata(d.hash, stream, opts.fetch);
                sink(meta, d);
                ok = true;
                break;
            } catch (const FetchError&) {
                continue;
            }
        }
        ok ? void(++stats.fetched) : void(++stats.fetch_failures);
    }
    return stats;
}

} // namespace btsup
