#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "islandgp/interpreter.hpp"
#include "islandgp/program.hpp"

namespace islandgp::localisation {

struct Position {
    double x{0.0}; // metres, local flat frame
    double y{0.0};
};

double distance(Position a, Position b);

enum class Provider : std::uint8_t { Gps, Wifi, Cell };
inline constexpr std::size_t kProviderCount = 3;

struct ProviderSpec {
    double accuracy_radius{0.0}; // reported accuracy, metres
    double error_radius{0.0};    // actual fixes fall uniformly in a disc this wide
    double current_ma{0.0};
    int fix_latency_s{0}; // seconds switched on before the first fix
    bool works_indoors{true};
    bool works_outdoors{true};
};

/// GPS 5 m / 140 mA / 10 s outdoors only; WiFi 40 m / 30 mA / 2 s; Cell
/// 400 m / 5 mA / 1 s.
struct ProviderModel {
    std::array<ProviderSpec, kProviderCount> specs;

    static ProviderModel standard();
    const ProviderSpec& operator[](Provider p) const { return specs[static_cast<std::size_t>(p)]; }
    ProviderSpec& operator[](Provider p) { return specs[static_cast<std::size_t>(p)]; }
};

/// Daily current budget from battery capacity over the unplugged part of the day.
struct EnergyBudget {
    double capacity_mah{1400.0};
    double day_hours{22.0};

    /// Whole milliamps: 1400 / 22 = 63.6 gives 63.
    double budget_ma() const;
};

struct Waypoint {
    double t{0.0}; // seconds
    Position at;
};

struct Segment {
    int from_s{0}; // inclusive, 1-based seconds
    int to_s{0};   // inclusive
    bool indoor{false};
};

/// Simulated surroundings for one evaluation: a trajectory, indoor/outdoor
/// segments, and pre-drawn provider errors so repeated evaluations of the same
/// program agree exactly.
class World {
public:
    World(std::vector<Waypoint> trajectory, std::vector<Segment> segments, ProviderModel providers,
          EnergyBudget budget, int duration_s, std::uint64_t seed);

    /// Walk outdoors for 30 s, then sit indoors for 30 s.
    static World standard(std::uint64_t seed = 7);
    static World from_json(const nlohmann::json& doc);

    int duration() const { return duration_s_; }
    const ProviderModel& providers() const { return providers_; }
    const EnergyBudget& budget() const { return budget_; }

    Position truth(int second) const;
    bool indoor(int second) const;
    bool available(Provider p, int second) const;
    /// What provider `p` reports at `second` when it has a fix.
    Position reading(Provider p, int second) const;

    struct Reference {
        Position at;
        double accuracy{0.0};
    };
    /// Best available position with every provider on; nullopt when none works.
    std::optional<Reference> reference(int second) const;

private:
    std::vector<Waypoint> trajectory_;
    std::vector<Segment> segments_;
    ProviderModel providers_;
    EnergyBudget budget_;
    int duration_s_;
    std::vector<std::array<Position, kProviderCount>> errors_; // per second
};

inline constexpr int kMaxDepth = 4;

/// Actions: seq, if_greater, enable_/disable_ gps|wifi|cell, request_update.
/// Numbers: add, mul, last_fix_age, last_accuracy, constants in [0, 60].
PrimitiveSet primitives();

/// 1 - d/(2a) inside the accuracy circle, falling to 0 at twice the accuracy.
double accuracy_fitness(std::optional<Position> program, Position best, double accuracy);

/// max(0, 1 - mean_power / budget).
double energy_fitness(double mean_power_ma, const EnergyBudget& budget);

/// Accept only programs that switch on some provider and ask for a position.
bool localisation_helper(const ProgramTree& tree, const PrimitiveSet& prims);

struct TickRecord {
    int second{0};
    std::optional<Position> program_position;
    std::optional<World::Reference> best;
    double power_ma{0.0};
    double accuracy{0.0};
    double energy{0.0};
};

struct Evaluation {
    double fitness{0.0};
    std::vector<TickRecord> ticks;
    std::optional<int> killed_at;
};

/// Runs the program once per virtual second and averages accuracy x energy.
/// A kill at second k zeroes seconds k..n.
Evaluation evaluate_localisation(const ProgramTree& tree, const PrimitiveSet& prims,
                                 const World& world, const SupervisorPolicy& policy = {200});

} // namespace islandgp::localisation
