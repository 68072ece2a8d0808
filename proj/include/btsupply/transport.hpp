#pragma once

#include "btsupply/ids.hpp"

#include <string>

namespace btsup {

// Outbound datagram sink. The crawler is a pure state machine: packets come
// in through on_packet, time comes in through on_tick, and everything it
// sends goes out through one of these. Live mode binds this to a UDP socket,
// the simulator binds it to the virtual event queue.
class PacketSender {
public:
    virtual ~PacketSender() = default;
    virtual void send(const Endpoint& to, std::string payload) = 0;
};

} // namespace btsup
