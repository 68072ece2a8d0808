#include "btsupply/routing_table.hpp"

#include <algorithm>

namespace btsup {

RoutingTable::RoutingTable(NodeId own_id, int k) : own_id_(own_id), k_(k), buckets_(160) {}

InsertOutcome RoutingTable::insert(const NodeId& id, const Endpoint& ep, std::int64_t now_us) {
    if (id == own_id_) return InsertOutcome::rejected_self;
    int idx = shared_prefix_bits(own_id_.bytes, id.bytes);
    auto& bucket = buckets_[idx];

    for (auto& c : bucket) {
        if (c.id == id) {
            c.ep = ep;
            c.last_seen_us = now_us;
            return InsertOutcome::refreshed;
        }
    }

    Contact fresh{id, ep, Liveness::good, now_us, 0};
    if (bucket.size() < static_cast<std::size_t>(k_)) {
        bucket.push_back(fresh);
        ++size_;
        return InsertOutcome::added;
    }
    auto bad = std::find_if(bucket.begin(), bucket.end(),
                            [](const Contact& c) { return c.state == Liveness::bad; });
    if (bad != bucket.end()) {
        *bad = fresh;
        return InsertOutcome::replaced_bad;
    }
    return InsertOutcome::bucket_full_dropped;
}

void RoutingTable::record_response(const NodeId& id, std::int64_t now_us) {
    int idx = shared_prefix_bits(own_id_.bytes, id.bytes);
    if (idx >= 160) return;
    for (auto& c : buckets_[idx]) {
        if (c.id == id) {
            c.state = Liveness::good;
            c.failed_queries = 0;
            c.last_seen_us = now_us;
            return;
        }
    }
}

void RoutingTable::record_timeout(const NodeId& id) {
    int idx = shared_prefix_bits(own_id_.bytes, id.bytes);
    if (idx >= 160) return;
    for (auto& c : buckets_[idx]) {
        if (c.id == id) {
            ++c.failed_queries;
            c.state = c.failed_queries >= 2 ? Liveness::bad : Liveness::questionable;
            return;
        }
    }
}

std::vector<Contact> RoutingTable::closest(const Key160& target, int n) const {
    std::vector<Contact> all = all_contacts();
    auto by_distance = [&target](const Contact& a, const Contact& b) {
        return xor_distance(a.id.bytes, target) < xor_distance(b.id.bytes, target);
    };
    if (all.size() > static_cast<std::size_t>(n)) {
        std::partial_sort(all.begin(), all.begin() + n, all.end(), by_distance);
        all.resize(n);
    } else {
        std::sort(all.begin(), all.end(), by_distance);
    }
    return all;
}

const Contact* RoutingTable::find(const NodeId& id) const {
    int idx = shared_prefix_bits(own_id_.bytes, id.bytes);
    if (idx >= 160) return nullptr;
    for (const auto& c : buckets_[idx])
        if (c.id == id) return &c;
    return nullptr;
}

std::vector<Contact> RoutingTable::all_contacts() const {
    std::vector<Contact> all;
    all.reserve(size_);
    for (const auto& b : buckets_) all.insert(all.end(), b.begin(), b.end());
    return all;
}

} // namespace btsup
