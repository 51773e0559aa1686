#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "islandgp/program.hpp"

namespace islandgp {

struct Population {
    std::vector<Individual> members;
    int generation{0};
    std::size_t capacity{0};
    std::size_t helper_rejections{0}; // candidates rejected while breeding this population
    std::size_t helper_fallbacks{0};  // slots admitted with the guard exhausted
};

struct GenerationStats {
    int generation{0};
    double max_fitness{0.0};
    double mean_fitness{0.0};
    double mean_size{0.0};
    double mean_depth{0.0};
    std::size_t members{0};
    std::size_t helper_rejections{0};
    std::size_t evaluation_failures{0};
};

/// Generation-time validity check. Candidates the predicate rejects are rebuilt.
struct HelperGuard {
    std::function<bool(const ProgramTree&)> accepts;
    int max_rebuild_attempts{64};
};

enum class GeneticOperator { Mutation, Crossover, Copy, Random };

std::string_view to_string(GeneticOperator op);

struct SelectorBinding {
    enum class Kind { Wheel };
    struct Pool {
        enum class Kind { NBest, All };
        Kind kind{Kind::All};
        std::size_t n{0};
    };

    std::string name;
    Kind kind{Kind::Wheel};
    Pool pool;

    static SelectorBinding wheel_over_best(std::string name, std::size_t n) {
        return {std::move(name), Kind::Wheel, {Pool::Kind::NBest, n}};
    }
    static SelectorBinding wheel_over_all(std::string name) {
        return {std::move(name), Kind::Wheel, {Pool::Kind::All, 0}};
    }
};

struct StrategyStep {
    std::string selector; // unused for RANDOM
    GeneticOperator op{GeneticOperator::Copy};
    std::size_t count{0};
};

/// Ordered breeding plan: bind selectors, then generate `count` programs per
/// step. Step counts must add up to the population capacity.
struct EvolutionStrategy {
    std::vector<SelectorBinding> selectors;
    std::vector<StrategyStep> steps;

    std::size_t total() const;
    const SelectorBinding* selector(std::string_view name) const;

    /// Throws ConfigError on unknown selectors or counts not summing to capacity.
    void check(std::size_t capacity) const;

    /// Leader copy 1, HR mutation 2, HR crossover 2 (capacity 5).
    static EvolutionStrategy feed_standalone();
    /// Leader copy 1, HR mutation 4, HR crossover 5, random 2 (capacity 12).
    static EvolutionStrategy localisation_standalone();
    /// Leader copy 1, HR mutation 3, crossover over the whole pool for the rest.
    static EvolutionStrategy island(std::size_t capacity);

    static EvolutionStrategy from_json(const nlohmann::json& doc);
    static EvolutionStrategy load(const std::string& path);
    nlohmann::json to_json() const;
};

/// Fitness-proportionate choice; uniform when every fitness is zero.
std::size_t select_wheel(std::span<const double> fitnesses, Rng& rng);
const Individual& select_wheel(std::span<const Individual> pool, Rng& rng);

/// Indices of the n fittest members, best first; ties keep member order.
std::vector<std::size_t> n_best(const Population& pop, std::size_t n);

/// Replace one uniformly chosen subtree with a freshly grown one of the same sort.
ProgramTree mutate(const ProgramTree& tree, const PrimitiveSet& prims, int max_depth, Rng& rng);

/// Graft a sort-compatible proper subtree of `b` into a copy of `a`. Falls back to a
/// copy of `a` after 16 failed attempts.
ProgramTree crossover(const ProgramTree& a, const ProgramTree& b, const PrimitiveSet& prims,
                      int max_depth, Rng& rng);

inline constexpr int kCrossoverRetries = 16;

/// Fresh population of `capacity` random programs, screened by `guard` if given.
Population random_population(const PrimitiveSet& prims, int max_depth, std::size_t capacity,
                             const HelperGuard* guard, Rng& rng);

Population breed_next_generation(const Population& pop, const EvolutionStrategy& strategy,
                                 const HelperGuard* guard, const PrimitiveSet& prims,
                                 int max_depth, Rng& rng);

using Evaluator = std::function<double(const ProgramTree&)>;

/// Scores every member. A throwing evaluator or a result outside [0,1]
/// gives that member fitness 0 and is counted as a failure.
GenerationStats evaluate_population(Population& pop, const Evaluator& evaluator);

/// Scores only members without a fitness (immigrants, injected programs).
std::size_t evaluate_pending(Population& pop, const Evaluator& evaluator);

GenerationStats summarize(const Population& pop);

} // namespace islandgp
