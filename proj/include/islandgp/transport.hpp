#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "islandgp/rng.hpp"

namespace islandgp {

/// One migrant program on the wire. Deliberately carries nothing about the
/// island that sent it.
struct MigrantEnvelope {
    std::string payload; // canonical program text

    friend bool operator==(const MigrantEnvelope&, const MigrantEnvelope&) = default;
};

inline constexpr std::string_view kWireVersion = "AGPX1";

/// `AGPX1\n<program>\n`
std::string encode(const MigrantEnvelope& envelope);

/// nullopt for unknown version tags or framing errors.
std::optional<MigrantEnvelope> decode(std::string_view datagram);

/// Best-effort broadcast. Lost or undecodable datagrams are never reported as
/// errors, only counted.
class Transport {
public:
    virtual ~Transport() = default;

    virtual void send(const MigrantEnvelope& envelope) = 0;
    virtual std::vector<MigrantEnvelope> drain() = 0;

    std::size_t sent() const { return sent_; }
    std::size_t dropped() const { return dropped_; }

protected:
    std::size_t sent_{0};
    std::size_t dropped_{0};
};

/// In-process broadcast bus for lock-step simulation. Every datagram sent by
/// one endpoint is offered to every other endpoint and independently lost
/// with probability `loss`. Sends may come from several threads.
class SimulatedBus {
public:
    SimulatedBus(std::size_t endpoints, double loss, std::uint64_t seed);
    ~SimulatedBus();

    Transport& endpoint(std::size_t i);
    std::size_t size() const { return endpoints_.size(); }
    double loss() const { return loss_; }
    std::size_t lost() const;

private:
    class Endpoint;

    void broadcast(std::size_t from, std::string datagram);
    std::vector<std::string> take(std::size_t to);

    double loss_;
    mutable std::mutex mu_;
    Rng rng_;
    std::size_t lost_{0};
    std::vector<std::vector<std::string>> inboxes_;
    std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

struct UdpPeer {
    std::string host; // dotted IPv4, may be a broadcast address
    std::uint16_t port{0};
};

/// Datagram transport over IPv4 UDP, one envelope per datagram. Receives are
/// non-blocking: drain() returns whatever the kernel has buffered. Echoes of
/// this endpoint's own recent datagrams are discarded.
class UdpTransport : public Transport {
public:
    UdpTransport(std::uint16_t bind_port, std::vector<UdpPeer> peers,
                 std::string bind_host = "0.0.0.0");
    ~UdpTransport() override;

    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    void send(const MigrantEnvelope& envelope) override;
    std::vector<MigrantEnvelope> drain() override;

    std::uint16_t port() const { return port_; }
    /// Throws ConfigError on an address that is not dotted IPv4.
    void set_peers(std::vector<UdpPeer> peers);

private:
    int fd_{-1};
    std::uint16_t port_{0};
    std::vector<UdpPeer> peers_;
    std::deque<std::string> recent_;
};

} // namespace islandgp
