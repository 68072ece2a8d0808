#pragma once

#include "btsupply/bencode.hpp"
#include "btsupply/ids.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace btsup {

// Byte stream to one peer. Live mode backs this with TCP; the simulator
// backs it with an in-memory scripted peer.
class PeerStream {
public:
    virtual ~PeerStream() = default;
    virtual void write(std::string_view data) = 0;
    // Up to cap bytes; 0 means no data within the timeout (or closed).
    virtual std::size_t read_some(char* buf, std::size_t cap, int timeout_ms) = 0;
};

struct FileEntry {
    std::vector<std::string> path_raw; // components exactly as received
    std::string path_text;             // joined UTF-8, or hex form when invalid
    std::uint64_t size = 0;
    bool encoding_failed = false;
};

struct TorrentMeta {
    InfoHash infohash{};
    std::string name;        // display name, raw bytes
    std::string name_text;   // UTF-8 or hex form
    bool name_encoding_failed = false;
    std::vector<FileEntry> files;
    std::uint64_t piece_length = 0;
    std::uint64_t total_size = 0;
    std::string raw_info;    // exact received octets; sha1(raw_info) == infohash
};

enum class FetchErrorKind {
    handshake_refused,
    extension_unsupported,
    piece_timeout,
    hash_mismatch,
    malformed_info,
};

class FetchError : public std::runtime_error {
public:
    FetchError(FetchErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    FetchErrorKind kind() const { return kind_; }

private:
    FetchErrorKind kind_;
};

struct FetchOptions {
    int total_timeout_ms = 30'000;
    int piece_timeout_ms = 5'000;
    std::string peer_id; // exactly 20 bytes; filled with a default when empty
};

inline constexpr std::size_t kMetadataPieceSize = 16384;

// Peer-wire handshake (extension bit set), ut_metadata negotiation, piece
// download, SHA-1 validation against the requested infohash, bencode decode.
TorrentMeta fetch_metadata(const InfoHash& infohash, PeerStream& stream,
                           const FetchOptions& opts = {});

// Normalized file list from a decoded info dict: single-file torrents become
// one entry whose path is the torrent name. Throws FetchError(malformed_info).
std::vector<FileEntry> decode_file_entries(const bencode::Value& info);

// Builds a TorrentMeta from raw info-dictionary bytes (digest is computed,
// not checked against anything). Throws FetchError(malformed_info).
TorrentMeta torrent_meta_from_info(std::string_view raw_info);

} // namespace btsup
