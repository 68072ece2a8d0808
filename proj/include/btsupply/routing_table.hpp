#pragma once

#include "btsupply/ids.hpp"

#include <cstdint>
#include <vector>

namespace btsup {

enum class Liveness { good, questionable, bad };

struct Contact {
    NodeId id;
    Endpoint ep;
    Liveness state = Liveness::good;
    std::int64_t last_seen_us = 0;
    int failed_queries = 0;
};

enum class InsertOutcome { added, refreshed, replaced_bad, bucket_full_dropped, rejected_self };

// Kademlia k-bucket table. Bucket index for a contact is the shared-prefix
// length of xor(own_id, contact_id), so bucket i holds ids agreeing with ours
// on exactly the first i bits.
class RoutingTable {
public:
    explicit RoutingTable(NodeId own_id, int k = 8);

    InsertOutcome insert(const NodeId& id, const Endpoint& ep, std::int64_t now_us);

    // Liveness transitions: a response marks the contact good and resets its
    // failure count; a timeout degrades good -> questionable -> bad.
    void record_response(const NodeId& id, std::int64_t now_us);
    void record_timeout(const NodeId& id);

    // Up to n contacts ordered by ascending xor distance to target.
    std::vector<Contact> closest(const Key160& target, int n) const;

    const Contact* find(const NodeId& id) const;
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    int bucket_count() const { return 160; }
    int k() const { return k_; }
    const NodeId& own_id() const { return own_id_; }
    const std::vector<Contact>& bucket(int i) const { return buckets_[i]; }

    std::vector<Contact> all_contacts() const;

private:
    NodeId own_id_;
    int k_;
    std::size_t size_ = 0;
    std::vector<std::vector<Contact>> buckets_; // 160 buckets
};

} // namespace btsup
