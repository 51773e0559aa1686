#include "islandgp/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <system_error>

#include "islandgp/errors.hpp"

namespace islandgp {

std::string encode(const MigrantEnvelope& envelope) {
    std::string out;
    out.reserve(kWireVersion.size() + envelope.payload.size() + 2);
    out += kWireVersion;
    out += '\n';
    out += envelope.payload;
    out += '\n';
    return out;
}

std::optional<MigrantEnvelope> decode(std::string_view datagram) {
    const auto nl = datagram.find('\n');
    if (nl == std::string_view::npos || datagram.substr(0, nl) != kWireVersion) return std::nullopt;
    auto body = datagram.substr(nl + 1);
    if (body.empty() || body.back() != '\n') return std::nullopt;
    body.remove_suffix(1);
    if (body.empty() || body.find('\n') != std::string_view::npos) return std::nullopt;
    return MigrantEnvelope{std::string(body)};
}

// ---------------------------------------------------------------------------
// Simulated bus

class SimulatedBus::Endpoint : public Transport {
public:
    Endpoint(SimulatedBus& bus, std::size_t index) : bus_(bus), index_(index) {}

    void send(const MigrantEnvelope& envelope) override {
        ++sent_;
        bus_.broadcast(index_, encode(envelope));
    }

    std::vector<MigrantEnvelope> drain() override {
        std::vector<MigrantEnvelope> out;
        for (auto& d : bus_.take(index_)) {
            if (auto env = decode(d)) out.push_back(std::move(*env));
            else ++dropped_;
        }
        return out;
    }

private:
    SimulatedBus& bus_;
    std::size_t index_;
};

SimulatedBus::~SimulatedBus() = default;

Transport& SimulatedBus::endpoint(std::size_t i) { return *endpoints_.at(i); }

SimulatedBus::SimulatedBus(std::size_t endpoints, double loss, std::uint64_t seed)
    : loss_(loss), rng_(make_rng({seed, 0x6c6f7373})), inboxes_(endpoints) {
    if (!(loss >= 0.0 && loss <= 1.0)) throw ConfigError("loss probability must lie in [0,1]");
    for (std::size_t i = 0; i < endpoints; ++i) {
        endpoints_.push_back(std::make_unique<Endpoint>(*this, i));
    }
}

std::size_t SimulatedBus::lost() const {
    std::lock_guard lock(mu_);
    return lost_;
}

void SimulatedBus::broadcast(std::size_t from, std::string datagram) {
    std::lock_guard lock(mu_);
    for (std::size_t to = 0; to < inboxes_.size(); ++to) {
        if (to == from) continue;
        if (uniform01(rng_) < loss_) {
            ++lost_;
            continue;
        }
        inboxes_[to].push_back(datagram);
    }
}

std::vector<std::string> SimulatedBus::take(std::size_t to) {
    std::lock_guard lock(mu_);
    return std::exchange(inboxes_.at(to), {});
}

// ---------------------------------------------------------------------------
// UDP

namespace {

constexpr std::size_t kMaxDatagram = 65507;
constexpr std::size_t kEchoMemory = 64;

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw ConfigError("bad IPv4 address '" + host + "'");
    }
    return addr;
}

} // namespace

UdpTransport::UdpTransport(std::uint16_t bind_port, std::vector<UdpPeer> peers,
                           std::string bind_host) {
    set_peers(std::move(peers));
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
    const int on = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &on, sizeof on);
    ::setsockopt(fd_, SOL_SOCKET, SO_BROADCAST, &on, sizeof on);
    const auto addr = make_addr(bind_host, bind_port);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const int err = errno;
        ::close(fd_);
        throw std::system_error(err, std::generic_category(), "bind");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

void UdpTransport::set_peers(std::vector<UdpPeer> peers) {
    for (const auto& p : peers) make_addr(p.host, p.port);
    peers_ = std::move(peers);
}

UdpTransport::~UdpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void UdpTransport::send(const MigrantEnvelope& envelope) {
    const auto datagram = encode(envelope);
    if (datagram.size() > kMaxDatagram) {
        ++dropped_;
        return;
    }
    ++sent_;
    recent_.push_back(datagram);
    if (recent_.size() > kEchoMemory) recent_.pop_front();
    for (const auto& peer : peers_) {
        const auto addr = make_addr(peer.host, peer.port);
        // Best effort: a failed send is indistinguishable from a lost datagram.
        ::sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<const sockaddr*>(&addr),
                 sizeof addr);
    }
}

std::vector<MigrantEnvelope> UdpTransport::drain() {
    std::vector<MigrantEnvelope> out;
    std::string buf(kMaxDatagram, '\0');
    for (;;) {
        const auto n = ::recv(fd_, buf.data(), buf.size(), MSG_DONTWAIT);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        const std::string_view d(buf.data(), static_cast<std::size_t>(n));
        if (auto echo = std::find(recent_.begin(), recent_.end(), d); echo != recent_.end()) {
            recent_.erase(echo);
            continue;
        }
        if (auto env = decode(d)) out.push_back(std::move(*env));
        else ++dropped_;
    }
    return out;
}

} // namespace islandgp
