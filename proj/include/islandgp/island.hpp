#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "islandgp/evolution.hpp"
#include "islandgp/transport.hpp"

namespace islandgp {

/// When and how programs cross between islands. Generations are numbered from
/// 1 here; an event fires after the evaluation of every i-th generation.
struct MigrationPolicy {
    enum class Mode { None, Migrate, RandomInject };

    int interval{5};
    double rate{0.0};
    Mode mode{Mode::None};

    /// round-half-up(rate * capacity)
    std::size_t count(std::size_t capacity) const;
    bool fires_at(int generation_number) const;
    void check() const;
};

std::string_view to_string(MigrationPolicy::Mode mode);

/// Uniformly chosen distinct members, serialized. The population is untouched.
/// Empty unless `generation_number` is a migration generation.
std::vector<MigrantEnvelope> select_emigrants(const Population& pop, const MigrationPolicy& policy,
                                              int generation_number, const PrimitiveSet& prims,
                                              Rng& rng);

struct AdmitResult {
    std::size_t admitted{0};
    std::size_t rejected{0};
};

/// Appends every envelope that parses and validates as an unevaluated
/// immigrant; anything else is counted and dropped.
AdmitResult admit_immigrants(Population& pop, std::span<const MigrantEnvelope> envelopes,
                             const PrimitiveSet& prims, int max_depth);

/// Appends round(rate * capacity) fresh random programs at injection generations.
std::size_t inject_random(Population& pop, const MigrationPolicy& policy, int generation_number,
                          const PrimitiveSet& prims, int max_depth, const HelperGuard* guard,
                          Rng& rng);

struct IslandConfig {
    const PrimitiveSet* prims{nullptr};
    int max_depth{3};
    std::size_t capacity{10};
    EvolutionStrategy strategy;
    std::optional<HelperGuard> guard;
    Evaluator evaluator;
    std::uint64_t seed{0};
};

struct IslandGenerationRecord {
    GenerationStats stats;
    std::size_t immigrants_admitted{0}; // immigrants or injected programs
    std::size_t emigrants_sent{0};
    std::size_t envelopes_rejected{0};
};

/// One island's population and random streams. Breeding and migration draw
/// from separate streams, so whether emigrants are picked never changes the
/// island's own evolution.
class Island {
public:
    explicit Island(IslandConfig config);

    const Population& population() const { return pop_; }
    const IslandConfig& config() const { return cfg_; }

    void evaluate();
    std::vector<MigrantEnvelope> emigrants(const MigrationPolicy& policy, int generation_number);
    AdmitResult admit(std::span<const MigrantEnvelope> envelopes);
    std::size_t inject(const MigrationPolicy& policy, int generation_number);

    /// Scores newcomers and summarizes the current generation.
    GenerationStats close_generation();
    void breed();

private:
    IslandConfig cfg_;
    Rng evolution_rng_;
    Rng migration_rng_;
    Population pop_;
    std::size_t failures_{0};
};

using GenerationObserver = std::function<void(std::size_t island, const Population&)>;

struct IslandRunConfig {
    std::vector<IslandConfig> islands;
    MigrationPolicy policy;
    int generations{20};
    /// One endpoint per island; required for Mode::Migrate.
    std::vector<Transport*> transports;
    /// Called after each generation is scored, before breeding.
    GenerationObserver observer;
};

using IslandTrajectories = std::vector<std::vector<IslandGenerationRecord>>;

/// Lock-step run: evaluate, migrate at event generations, score newcomers,
/// record, breed. Deterministic given the island seeds and the transport.
IslandTrajectories run_islands(IslandRunConfig config);

/// Free-running single island for datagram mode: at event generations it
/// sends its emigrants and admits whatever has arrived so far.
std::vector<IslandGenerationRecord> run_island_async(IslandConfig config,
                                                     const MigrationPolicy& policy, int generations,
                                                     Transport* transport,
                                                     const GenerationObserver& observer = {});

} // namespace islandgp
