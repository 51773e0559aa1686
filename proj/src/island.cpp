#include "islandgp/island.hpp"

#include <cmath>
#include <numeric>

#include "islandgp/errors.hpp"

namespace islandgp {

std::string_view to_string(MigrationPolicy::Mode mode) {
    switch (mode) {
    case MigrationPolicy::Mode::None: return "none";
    case MigrationPolicy::Mode::Migrate: return "migrate";
    case MigrationPolicy::Mode::RandomInject: return "random";
    }
    return "?";
}

std::size_t MigrationPolicy::count(std::size_t capacity) const {
    return static_cast<std::size_t>(std::floor(rate * static_cast<double>(capacity) + 0.5));
}

bool MigrationPolicy::fires_at(int generation_number) const {
    return mode != Mode::None && interval > 0 && generation_number > 0 &&
           generation_number % interval == 0;
}

void MigrationPolicy::check() const {
    if (mode == Mode::None) return;
    if (interval < 1) throw ConfigError("migration interval must be at least 1");
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("migration rate must lie in [0,1]");
}

std::vector<MigrantEnvelope> select_emigrants(const Population& pop, const MigrationPolicy& policy,
                                              int generation_number, const PrimitiveSet& prims,
                                              Rng& rng) {
    if (policy.mode != MigrationPolicy::Mode::Migrate || !policy.fires_at(generation_number)) {
        return {};
    }
    const std::size_t n = std::min(policy.count(pop.capacity), pop.members.size());
    std::vector<std::size_t> idx(pop.members.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<MigrantEnvelope> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t pick = k + uniform_index(rng, idx.size() - k);
        std::swap(idx[k], idx[pick]);
        out.push_back({serialize(pop.members[idx[k]].tree, prims)});
    }
    return out;
}

AdmitResult admit_immigrants(Population& pop, std::span<const MigrantEnvelope> envelopes,
                             const PrimitiveSet& prims, int max_depth) {
    AdmitResult r;
    for (const auto& env : envelopes) {
        try {
            pop.members.emplace_back(deserialize(env.payload, prims, max_depth), Origin::Immigrant);
            ++r.admitted;
        } catch (const ParseError&) {
            ++r.rejected;
        } catch (const ValidationError&) {
            ++r.rejected;
        }
    }
    return r;
}

std::size_t inject_random(Population& pop, const MigrationPolicy& policy, int generation_number,
                          const PrimitiveSet& prims, int max_depth, const HelperGuard* guard,
                          Rng& rng) {
    if (policy.mode != MigrationPolicy::Mode::RandomInject || !policy.fires_at(generation_number)) {
        return 0;
    }
    const std::size_t n = policy.count(pop.capacity);
    if (n == 0) return 0;
    auto fresh = random_population(prims, max_depth, n, guard, rng);
    for (auto& m : fresh.members) {
        m.origin = Origin::RandomInjected;
        pop.members.push_back(std::move(m));
    }
    return n;
}

// ---------------------------------------------------------------------------
// Island

Island::Island(IslandConfig config)
    : cfg_(std::move(config)),
      evolution_rng_(make_rng({cfg_.seed, 1})),
      migration_rng_(make_rng({cfg_.seed, 2})) {
    if (!cfg_.prims) throw ConfigError("island has no primitive set");
    if (!cfg_.evaluator) throw ConfigError("island has no evaluator");
    if (cfg_.max_depth < 1) throw ConfigError("max depth must be at least 1");
    if (cfg_.capacity < 1) throw ConfigError("capacity must be at least 1");
    cfg_.strategy.check(cfg_.capacity);
    pop_ = random_population(*cfg_.prims, cfg_.max_depth, cfg_.capacity,
                             cfg_.guard ? &*cfg_.guard : nullptr, evolution_rng_);
}

void Island::evaluate() { failures_ = evaluate_population(pop_, cfg_.evaluator).evaluation_failures; }

std::vector<MigrantEnvelope> Island::emigrants(const MigrationPolicy& policy, int generation_number) {
    return select_emigrants(pop_, policy, generation_number, *cfg_.prims, migration_rng_);
}

AdmitResult Island::admit(std::span<const MigrantEnvelope> envelopes) {
    return admit_immigrants(pop_, envelopes, *cfg_.prims, cfg_.max_depth);
}

std::size_t Island::inject(const MigrationPolicy& policy, int generation_number) {
    return inject_random(pop_, policy, generation_number, *cfg_.prims, cfg_.max_depth,
                         cfg_.guard ? &*cfg_.guard : nullptr, migration_rng_);
}

GenerationStats Island::close_generation() {
    failures_ += evaluate_pending(pop_, cfg_.evaluator);
    auto s = summarize(pop_);
    s.evaluation_failures = failures_;
    return s;
}

void Island::breed() {
    pop_ = breed_next_generation(pop_, cfg_.strategy, cfg_.guard ? &*cfg_.guard : nullptr,
                                 *cfg_.prims, cfg_.max_depth, evolution_rng_);
}

// ---------------------------------------------------------------------------
// Runners

IslandTrajectories run_islands(IslandRunConfig config) {
    if (config.generations < 1) throw ConfigError("generations must be at least 1");
    if (config.islands.empty()) throw ConfigError("no islands configured");
    config.policy.check();
    const auto& policy = config.policy;
    const bool migrating = policy.mode == MigrationPolicy::Mode::Migrate;
    if (migrating && config.transports.size() != config.islands.size()) {
        throw ConfigError("migration needs one transport endpoint per island");
    }

    std::vector<Island> islands;
    islands.reserve(config.islands.size());
    for (auto& c : config.islands) islands.emplace_back(std::move(c));

    IslandTrajectories out(islands.size());
    std::vector<IslandGenerationRecord> rec(islands.size());
    for (int g = 1; g <= config.generations; ++g) {
        std::fill(rec.begin(), rec.end(), IslandGenerationRecord{});
        for (auto& isl : islands) isl.evaluate();

        if (policy.fires_at(g)) {
            if (migrating) {
                for (std::size_t k = 0; k < islands.size(); ++k) {
                    for (const auto& env : islands[k].emigrants(policy, g)) {
                        config.transports[k]->send(env);
                        ++rec[k].emigrants_sent;
                    }
                }
                for (std::size_t k = 0; k < islands.size(); ++k) {
                    const auto arrived = config.transports[k]->drain();
                    const auto r = islands[k].admit(arrived);
                    rec[k].immigrants_admitted = r.admitted;
                    rec[k].envelopes_rejected = r.rejected;
                }
            } else {
                for (std::size_t k = 0; k < islands.size(); ++k) {
                    rec[k].immigrants_admitted = islands[k].inject(policy, g);
                }
            }
        }

        for (std::size_t k = 0; k < islands.size(); ++k) {
            rec[k].stats = islands[k].close_generation();
            if (config.observer) config.observer(k, islands[k].population());
            out[k].push_back(rec[k]);
            if (g < config.generations) islands[k].breed();
        }
    }
    return out;
}

std::vector<IslandGenerationRecord> run_island_async(IslandConfig config,
                                                     const MigrationPolicy& policy, int generations,
                                                     Transport* transport,
                                                     const GenerationObserver& observer) {
    if (generations < 1) throw ConfigError("generations must be at least 1");
    policy.check();
    if (policy.mode == MigrationPolicy::Mode::Migrate && !transport) {
        throw ConfigError("migration needs a transport");
    }
    Island island(std::move(config));
    std::vector<IslandGenerationRecord> out;
    for (int g = 1; g <= generations; ++g) {
        IslandGenerationRecord rec;
        island.evaluate();
        if (policy.fires_at(g)) {
            if (policy.mode == MigrationPolicy::Mode::Migrate) {
                for (const auto& env : island.emigrants(policy, g)) {
                    transport->send(env);
                    ++rec.emigrants_sent;
                }
                const auto r = island.admit(transport->drain());
                rec.immigrants_admitted = r.admitted;
                rec.envelopes_rejected = r.rejected;
            } else {
                rec.immigrants_admitted = island.inject(policy, g);
            }
        }
        rec.stats = island.close_generation();
        if (observer) observer(0, island.population());
        out.push_back(rec);
        if (g < generations) island.breed();
    }
    return out;
}

} // namespace islandgp
