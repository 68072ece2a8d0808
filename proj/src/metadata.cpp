#include "btsupply/metadata.hpp"

#include "btsupply/bytes.hpp"
#include "btsupply/sha1.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <map>

namespace btsup {

using bencode::Value;

namespace {

constexpr char kProtocolString[] = "BitTorrent protocol";
constexpr uint8_t kExtensionBit = 0x10; // reserved[5]
constexpr uint8_t kMsgExtended = 20;
constexpr uint8_t kOurMetadataId = 2;

[[noreturn]] void fail(FetchErrorKind kind, const std::string& msg) { throw FetchError(kind, msg); }

int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

struct Deadline {
    int64_t start = now_ms();
    int total_ms;
    explicit Deadline(int total) : total_ms(total) {}
    int remaining(int per_read_ms) const {
        int64_t left = total_ms - (now_ms() - start);
        if (left <= 0) return 0;
        return int(std::min<int64_t>(left, per_read_ms));
    }
};

void read_exact(PeerStream& s, char* buf, size_t n, const Deadline& dl, int per_read_ms,
                FetchErrorKind on_timeout, const char* what) {
    size_t got = 0;
    while (got < n) {
        int budget = dl.remaining(per_read_ms);
        if (budget <= 0) fail(on_timeout, std::string("timeout waiting for ") + what);
        size_t r = s.read_some(buf + got, n - got, budget);
        if (r == 0) fail(on_timeout, std::string("peer closed or stalled during ") + what);
        got += r;
    }
}

std::string be32(uint32_t v) {
    std::string s(4, '\0');
    s[0] = char(v >> 24);
    s[1] = char(v >> 16);
    s[2] = char(v >> 8);
    s[3] = char(v);
    return s;
}

uint32_t parse_be32(const char* p) {
    const auto* u = reinterpret_cast<const uint8_t*>(p);
    return (uint32_t(u[0]) << 24) | (uint32_t(u[1]) << 16) | (uint32_t(u[2]) << 8) | uint32_t(u[3]);
}

std::string utf8_or_hex(const std::string& raw, bool& failed) {
    if (is_valid_utf8(raw)) {
        failed = false;
        return raw;
    }
    failed = true;
    return "0x" + to_hex(raw);
}

} // namespace

std::vector<FileEntry> decode_file_entries(const Value& info) {
    if (!info.is_dict()) fail(FetchErrorKind::malformed_info, "info is not a dict");
    const Value* name = info.find("name");
    if (!name || !name->is_bytes()) fail(FetchErrorKind::malformed_info, "info missing name");

    std::vector<FileEntry> out;
    const Value* files = info.find("files");
    if (files) {
        if (!files->is_list() || files->as_list().empty())
            fail(FetchErrorKind::malformed_info, "files is not a non-empty list");
        for (const Value& f : files->as_list()) {
            const Value* path = f.find("path");
            const Value* length = f.find("length");
            if (!path || !path->is_list() || path->as_list().empty() || !length || !length->is_int())
                fail(FetchErrorKind::malformed_info, "file entry missing path/length");
            if (length->as_int() < 0) fail(FetchErrorKind::malformed_info, "negative file size");
            FileEntry e;
            std::string joined;
            for (const Value& comp : path->as_list()) {
                if (!comp.is_bytes()) fail(FetchErrorKind::malformed_info, "path component not bytes");
                e.path_raw.push_back(comp.as_bytes());
                if (!joined.empty()) joined.push_back('/');
                joined.append(comp.as_bytes());
            }
            e.size = uint64_t(length->as_int());
            e.path_text = utf8_or_hex(joined, e.encoding_failed);
            out.push_back(std::move(e));
        }
    } else {
        const Value* length = info.find("length");
        if (!length || !length->is_int())
            fail(FetchErrorKind::malformed_info, "single-file info missing length");
        if (length->as_int() < 0) fail(FetchErrorKind::malformed_info, "negative file size");
        FileEntry e;
        e.path_raw.push_back(name->as_bytes());
        e.size = uint64_t(length->as_int());
        e.path_text = utf8_or_hex(name->as_bytes(), e.encoding_failed);
        out.push_back(std::move(e));
    }
    return out;
}

TorrentMeta torrent_meta_from_info(std::string_view raw_info) {
    bencode::Decoded decoded;
    try {
        decoded = bencode::decode(raw_info);
    } catch (const bencode::Error& e) {
        fail(FetchErrorKind::malformed_info, std::string("info dict does not decode: ") + e.what());
    }
    const Value& info = decoded.value;
    if (decoded.consumed != raw_info.size())
        fail(FetchErrorKind::malformed_info, "trailing bytes after info dict");

    TorrentMeta meta;
    Sha1Digest d = sha1(raw_info);
    std::copy(d.begin(), d.end(), meta.infohash.bytes.begin());
    meta.raw_info.assign(raw_info.data(), raw_info.size());
    meta.files = decode_file_entries(info);
    meta.name = info.find("name")->as_bytes();
    meta.name_text = utf8_or_hex(meta.name, meta.name_encoding_failed);
    if (const Value* pl = info.find("piece length"); pl && pl->is_int() && pl->as_int() >= 0)
        meta.piece_length = uint64_t(pl->as_int());
    for (const auto& f : meta.files) meta.total_size += f.size;
    return meta;
}

TorrentMeta fetch_metadata(const InfoHash& infohash, PeerStream& stream, const FetchOptions& opts) {
    Deadline deadline(opts.total_timeout_ms);
    std::string peer_id = opts.peer_id.empty() ? std::string("-BS0001-harvestmeta0") : opts.peer_id;
    if (peer_id.size() != 20) peer_id.resize(20, '0');

    // 68-octet handshake, extension bit set.
    std::string hs;
    hs.push_back(char(19));
    hs.append(kProtocolString);
    std::string reserved(8, '\0');
    reserved[5] = char(kExtensionBit);
    hs.append(reserved);
    hs.append(infohash.raw());
    hs.append(peer_id);
    stream.write(hs);

    char theirs[68];
    read_exact(stream, theirs, 68, deadline, opts.piece_timeout_ms,
               FetchErrorKind::handshake_refused, "handshake");
    if (theirs[0] != 19 || std::memcmp(theirs + 1, kProtocolString, 19) != 0)
        fail(FetchErrorKind::handshake_refused, "bad protocol string");
    if (std::memcmp(theirs + 28, infohash.raw().data(), 20) != 0)
        fail(FetchErrorKind::handshake_refused, "peer speaks for a different infohash");
    if ((uint8_t(theirs[25]) & kExtensionBit) == 0)
        fail(FetchErrorKind::extension_unsupported, "peer lacks extension protocol bit");

    // Extended handshake: advertise our ut_metadata id.
    Value m{Value::Dict{}};
    m.set("ut_metadata", Value(int64_t{kOurMetadataId}));
    Value exths{Value::Dict{}};
    exths.set("m", std::move(m));
    std::string exths_payload = bencode::encode(exths);
    std::string msg;
    msg += be32(uint32_t(2 + exths_payload.size()));
    msg.push_back(char(kMsgExtended));
    msg.push_back(char(0)); // extended handshake id
    msg += exths_payload;
    stream.write(msg);

    int peer_metadata_id = -1;
    uint64_t metadata_size = 0;

    auto read_message = [&](FetchErrorKind on_timeout) -> std::pair<uint8_t, std::string> {
        for (;;) {
            char lenbuf[4];
            read_exact(stream, lenbuf, 4, deadline, opts.piece_timeout_ms, on_timeout, "message length");
            uint32_t len = parse_be32(lenbuf);
            if (len == 0) continue; // keep-alive
            if (len > 4 * 1024 * 1024) fail(FetchErrorKind::malformed_info, "oversized message");
            std::string payload(len, '\0');
            read_exact(stream, payload.data(), len, deadline, opts.piece_timeout_ms, on_timeout,
                       "message body");
            return {uint8_t(payload[0]), payload.substr(1)};
        }
    };

    // Wait for the peer's extended handshake.
    for (;;) {
        auto [id, payload] = read_message(FetchErrorKind::extension_unsupported);
        if (id != kMsgExtended) continue; // bitfield/have/choke are fine to ignore
        if (payload.empty()) fail(FetchErrorKind::malformed_info, "empty extended message");
        if (uint8_t(payload[0]) != 0) continue; // not the handshake
        bencode::Decoded d;
        try {
            d = bencode::decode(std::string_view(payload).substr(1));
        } catch (const bencode::Error&) {
            fail(FetchErrorKind::malformed_info, "undecodable extended handshake");
        }
        const Value* mdict = d.value.find("m");
        const Value* mid = mdict ? mdict->find("ut_metadata") : nullptr;
        if (!mid || !mid->is_int() || mid->as_int() <= 0)
            fail(FetchErrorKind::extension_unsupported, "peer does not support ut_metadata");
        peer_metadata_id = int(mid->as_int());
        const Value* sz = d.value.find("metadata_size");
        if (!sz || !sz->is_int() || sz->as_int() <= 0)
            fail(FetchErrorKind::extension_unsupported, "peer did not provide metadata_size");
        metadata_size = uint64_t(sz->as_int());
        break;
    }

    if (metadata_size > 64 * 1024 * 1024)
        fail(FetchErrorKind::malformed_info, "implausible metadata size");
    size_t piece_count = size_t((metadata_size + kMetadataPieceSize - 1) / kMetadataPieceSize);

    // Request every piece up front; arrival order is irrelevant.
    for (size_t i = 0; i < piece_count; ++i) {
        Value req{Value::Dict{}};
        req.set("msg_type", Value(int64_t{0}));
        req.set("piece", Value(int64_t(i)));
        std::string payload = bencode::encode(req);
        std::string out;
        out += be32(uint32_t(2 + payload.size()));
        out.push_back(char(kMsgExtended));
        out.push_back(char(peer_metadata_id));
        out += payload;
        stream.write(out);
    }

    std::map<size_t, std::string> pieces;
    while (pieces.size() < piece_count) {
        auto [id, payload] = read_message(FetchErrorKind::piece_timeout);
        if (id != kMsgExtended || payload.empty()) continue;
        if (uint8_t(payload[0]) != kOurMetadataId) continue;
        std::string_view body = std::string_view(payload).substr(1);
        bencode::Decoded d;
        try {
            d = bencode::decode(body);
        } catch (const bencode::Error&) {
            fail(FetchErrorKind::malformed_info, "undecodable metadata message");
        }
        const Value* type = d.value.find("msg_type");
        const Value* piece = d.value.find("piece");
        if (!type || !type->is_int() || !piece || !piece->is_int())
            fail(FetchErrorKind::malformed_info, "metadata message missing fields");
        if (type->as_int() == 2)
            fail(FetchErrorKind::piece_timeout, "peer rejected metadata piece request");
        if (type->as_int() != 1) continue;
        size_t idx = size_t(piece->as_int());
        if (idx >= piece_count) fail(FetchErrorKind::malformed_info, "piece index out of range");
        std::string data(body.substr(d.consumed));
        size_t expect = idx + 1 == piece_count ? size_t(metadata_size - idx * kMetadataPieceSize)
                                               : kMetadataPieceSize;
        if (data.size() != expect) fail(FetchErrorKind::malformed_info, "piece size mismatch");
        pieces[idx] = std::move(data);
    }

    std::string raw;
    raw.reserve(metadata_size);
    for (size_t i = 0; i < piece_count; ++i) raw += pieces[i];

    Sha1Digest digest = sha1(raw);
    if (!std::equal(digest.begin(), digest.end(), infohash.bytes.begin()))
        fail(FetchErrorKind::hash_mismatch, "metadata digest does not match infohash");

    TorrentMeta meta = torrent_meta_from_info(raw);
    return meta;
}

} // namespace btsup
