#include "islandgp/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"

namespace islandgp {

std::string_view to_string(GeneticOperator op) {
    switch (op) {
    case GeneticOperator::Mutation: return "MUTATION";
    case GeneticOperator::Crossover: return "CROSSOVER";
    case GeneticOperator::Copy: return "COPY";
    case GeneticOperator::Random: return "RANDOM";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Strategy

std::size_t EvolutionStrategy::total() const {
    return std::accumulate(steps.begin(), steps.end(), std::size_t{0},
                           [](std::size_t acc, const StrategyStep& s) { return acc + s.count; });
}

const SelectorBinding* EvolutionStrategy::selector(std::string_view name) const {
    for (const auto& s : selectors) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

void EvolutionStrategy::check(std::size_t capacity) const {
    for (const auto& step : steps) {
        if (step.op != GeneticOperator::Random && !selector(step.selector)) {
            throw ConfigError("strategy step uses unknown selector '" + step.selector + "'");
        }
    }
    for (const auto& s : selectors) {
        if (s.pool.kind == SelectorBinding::Pool::Kind::NBest && s.pool.n == 0) {
            throw ConfigError("selector '" + s.name + "' has an empty pool");
        }
    }
    if (total() != capacity) {
        throw ConfigError("strategy generates " + std::to_string(total()) +
                          " programs but capacity is " + std::to_string(capacity));
    }
}

EvolutionStrategy EvolutionStrategy::feed_standalone() {
    return {{SelectorBinding::wheel_over_best("HR", 3), SelectorBinding::wheel_over_best("Leader", 1)},
            {{"Leader", GeneticOperator::Copy, 1},
             {"HR", GeneticOperator::Mutation, 2},
             {"HR", GeneticOperator::Crossover, 2}}};
}

EvolutionStrategy EvolutionStrategy::localisation_standalone() {
    return {{SelectorBinding::wheel_over_best("HR", 3), SelectorBinding::wheel_over_best("Leader", 1)},
            {{"Leader", GeneticOperator::Copy, 1},
             {"HR", GeneticOperator::Mutation, 4},
             {"HR", GeneticOperator::Crossover, 5},
             {"", GeneticOperator::Random, 2}}};
}

EvolutionStrategy EvolutionStrategy::island(std::size_t capacity) {
    if (capacity < 4) throw ConfigError("island strategy needs capacity of at least 4");
    return {{SelectorBinding::wheel_over_best("HR", 3), SelectorBinding::wheel_over_best("Leader", 1),
             SelectorBinding::wheel_over_all("All")},
            {{"Leader", GeneticOperator::Copy, 1},
             {"HR", GeneticOperator::Mutation, 3},
             {"All", GeneticOperator::Crossover, capacity - 4}}};
}

namespace {

GeneticOperator parse_operator(const std::string& s) {
    if (s == "MUTATION") return GeneticOperator::Mutation;
    if (s == "CROSSOVER") return GeneticOperator::Crossover;
    if (s == "COPY") return GeneticOperator::Copy;
    if (s == "RANDOM") return GeneticOperator::Random;
    throw ConfigError("unknown genetic operator '" + s + "'");
}

} // namespace

EvolutionStrategy EvolutionStrategy::from_json(const nlohmann::json& doc) {
    EvolutionStrategy out;
    try {
        for (const auto& sel : doc.at("selectors")) {
            SelectorBinding b;
            b.name = sel.at("name").get<std::string>();
            if (sel.value("kind", std::string("WHEEL")) != "WHEEL") {
                throw ConfigError("selector '" + b.name + "': only WHEEL selectors exist");
            }
            const auto& pool = sel.at("pool");
            if (pool.is_string() && pool.get<std::string>() == "all") {
                b.pool = {SelectorBinding::Pool::Kind::All, 0};
            } else {
                b.pool = {SelectorBinding::Pool::Kind::NBest, pool.at("n_best").get<std::size_t>()};
            }
            if (out.selector(b.name)) throw ConfigError("duplicate selector '" + b.name + "'");
            out.selectors.push_back(std::move(b));
        }
        for (const auto& st : doc.at("steps")) {
            StrategyStep step;
            step.op = parse_operator(st.at("operator").get<std::string>());
            step.selector = st.value("selector", std::string());
            step.count = st.at("count").get<std::size_t>();
            out.steps.push_back(std::move(step));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad strategy document: ") + e.what());
    }
    return out;
}

EvolutionStrategy EvolutionStrategy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open strategy file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("strategy file '" + path + "': " + e.what());
    }
    return from_json(doc);
}

nlohmann::json EvolutionStrategy::to_json() const {
    nlohmann::json doc;
    doc["selectors"] = nlohmann::json::array();
    for (const auto& s : selectors) {
        nlohmann::json pool;
        if (s.pool.kind == SelectorBinding::Pool::Kind::All) pool = "all";
        else pool = {{"n_best", s.pool.n}};
        doc["selectors"].push_back({{"name", s.name}, {"kind", "WHEEL"}, {"pool", pool}});
    }
    doc["steps"] = nlohmann::json::array();
    for (const auto& st : steps) {
        nlohmann::json j{{"operator", std::string(to_string(st.op))}, {"count", st.count}};
        if (st.op != GeneticOperator::Random) j["selector"] = st.selector;
        doc["steps"].push_back(std::move(j));
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Selection

std::size_t select_wheel(std::span<const double> fitnesses, Rng& rng) {
    if (fitnesses.empty()) throw UsageError("wheel selection over an empty pool");
    const double total = std::accumulate(fitnesses.begin(), fitnesses.end(), 0.0);
    if (!(total > 0.0)) return uniform_index(rng, fitnesses.size());
    const double spin = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < fitnesses.size(); ++i) {
        if (fitnesses[i] <= 0.0) continue;
        acc += fitnesses[i];
        last_positive = i;
        if (spin < acc) return i;
    }
    return last_positive; // rounding left spin == total
}

const Individual& select_wheel(std::span<const Individual> pool, Rng& rng) {
    std::vector<double> f;
    f.reserve(pool.size());
    for (const auto& ind : pool) {
        if (!ind.fitness) throw UsageError("wheel selection over an unevaluated member");
        f.push_back(*ind.fitness);
    }
    return pool[select_wheel(f, rng)];
}

std::vector<std::size_t> n_best(const Population& pop, std::size_t n) {
    if (n > pop.members.size()) {
        throw UsageError("n_best(" + std::to_string(n) + ") over " +
                         std::to_string(pop.members.size()) + " members");
    }
    for (const auto& m : pop.members) {
        if (!m.fitness) throw UsageError("n_best over an unevaluated member");
    }
    std::vector<std::size_t> idx(pop.members.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return *pop.members[a].fitness > *pop.members[b].fitness;
    });
    idx.resize(n);
    return idx;
}

// ---------------------------------------------------------------------------
// Operators

ProgramTree mutate(const ProgramTree& tree, const PrimitiveSet& prims, int max_depth, Rng& rng) {
    const auto levels = tree.levels();
    const std::size_t at = uniform_index(rng, tree.size());
    const Sort sort = prims.kind(tree[at].kind).result_sort;
    const int budget = std::max(1, max_depth - levels[at] + 1);
    return tree.replace_subtree(at, grow(prims, sort, budget, rng));
}

ProgramTree crossover(const ProgramTree& a, const ProgramTree& b, const PrimitiveSet& prims,
                      int max_depth, Rng& rng) {
    const auto levels_a = a.levels();
    const auto levels_b = b.levels();
    std::vector<std::size_t> candidates;
    for (int attempt = 0; attempt < kCrossoverRetries; ++attempt) {
        const std::size_t at = uniform_index(rng, a.size());
        const Sort sort = prims.kind(a[at].kind).result_sort;
        candidates.clear();
        // Donors are proper subtrees of b; grafting b's root would just copy b.
        for (std::size_t j = 1; j < b.size(); ++j) {
            if (prims.kind(b[j].kind).result_sort == sort) candidates.push_back(j);
        }
        if (candidates.empty()) continue;
        const std::size_t from = candidates[uniform_index(rng, candidates.size())];
        // Depth of b's subtree at `from` = deepest level inside it minus its own level, plus 1.
        const auto end = b.subtree_end(from);
        const int sub_depth =
            *std::max_element(levels_b.begin() + static_cast<std::ptrdiff_t>(from),
                              levels_b.begin() + static_cast<std::ptrdiff_t>(end)) -
            levels_b[from] + 1;
        if (levels_a[at] - 1 + sub_depth > max_depth) continue;
        return a.replace_subtree(at, b.subtree(from));
    }
    return a;
}

// ---------------------------------------------------------------------------
// Breeding

namespace {

struct Breeder {
    const PrimitiveSet& prims;
    int max_depth;
    const HelperGuard* guard;
    Rng& rng;
    std::size_t rejections{0};
    std::size_t fallbacks{0};

    // Calls make() until the guard accepts or the rebuild budget runs out.
    template <class Make>
    ProgramTree screened(Make&& make) {
        ProgramTree t = make();
        if (!guard || !guard->accepts) return t;
        for (int attempt = 0; !guard->accepts(t); ++attempt) {
            ++rejections;
            if (attempt >= guard->max_rebuild_attempts) {
                ++fallbacks;
                break;
            }
            t = make();
        }
        return t;
    }
};

std::vector<Individual> pool_for(const Population& pop, const SelectorBinding& sel) {
    std::vector<Individual> pool;
    if (sel.pool.kind == SelectorBinding::Pool::Kind::All) {
        pool = pop.members;
    } else {
        for (auto i : n_best(pop, std::min(sel.pool.n, pop.members.size()))) {
            pool.push_back(pop.members[i]);
        }
    }
    return pool;
}

} // namespace

Population random_population(const PrimitiveSet& prims, int max_depth, std::size_t capacity,
                             const HelperGuard* guard, Rng& rng) {
    prims.check_buildable();
    Breeder b{prims, max_depth, guard, rng};
    Population pop;
    pop.capacity = capacity;
    for (std::size_t i = 0; i < capacity; ++i) {
        pop.members.emplace_back(b.screened([&] { return build_random_tree(prims, max_depth, rng); }),
                                 Origin::Local);
    }
    pop.helper_rejections = b.rejections;
    pop.helper_fallbacks = b.fallbacks;
    return pop;
}

Population breed_next_generation(const Population& pop, const EvolutionStrategy& strategy,
                                 const HelperGuard* guard, const PrimitiveSet& prims,
                                 int max_depth, Rng& rng) {
    strategy.check(pop.capacity);
    if (pop.members.empty()) throw UsageError("cannot breed from an empty population");
    for (const auto& m : pop.members) {
        if (!m.fitness) throw UsageError("breeding requires every member to be evaluated");
    }

    Breeder b{prims, max_depth, guard, rng};
    Population next;
    next.capacity = pop.capacity;
    next.generation = pop.generation + 1;
    next.members.reserve(pop.capacity);

    for (const auto& step : strategy.steps) {
        if (step.count == 0) continue;
        if (step.op == GeneticOperator::Random) {
            for (std::size_t k = 0; k < step.count; ++k) {
                next.members.emplace_back(
                    b.screened([&] { return build_random_tree(prims, max_depth, rng); }),
                    Origin::RandomInjected);
            }
            continue;
        }
        const auto pool = pool_for(pop, *strategy.selector(step.selector));
        for (std::size_t k = 0; k < step.count; ++k) {
            switch (step.op) {
            case GeneticOperator::Copy: {
                Individual elite = select_wheel(pool, rng);
                elite.origin = Origin::EliteCopy;
                next.members.push_back(std::move(elite));
                break;
            }
            case GeneticOperator::Mutation:
                next.members.emplace_back(b.screened([&] {
                    return mutate(select_wheel(pool, rng).tree, prims, max_depth, rng);
                }),
                                          Origin::Local);
                break;
            case GeneticOperator::Crossover:
                next.members.emplace_back(b.screened([&] {
                    const auto& mum = select_wheel(pool, rng);
                    const auto& dad = select_wheel(pool, rng);
                    return crossover(mum.tree, dad.tree, prims, max_depth, rng);
                }),
                                          Origin::Local);
                break;
            case GeneticOperator::Random: break;
            }
        }
    }
    next.helper_rejections = b.rejections;
    next.helper_fallbacks = b.fallbacks;
    return next;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

bool score(Individual& ind, const Evaluator& evaluator) {
    double f = 0.0;
    bool ok = true;
    try {
        f = evaluator(ind.tree);
        ok = std::isfinite(f) && f >= 0.0 && f <= 1.0;
    } catch (const std::exception& e) {
        std::clog << "islandgp: evaluator failed: " << e.what() << '\n';
        ok = false;
    }
    ind.fitness = ok ? f : 0.0;
    return ok;
}

} // namespace

GenerationStats summarize(const Population& pop) {
    GenerationStats s;
    s.generation = pop.generation;
    s.members = pop.members.size();
    s.helper_rejections = pop.helper_rejections;
    if (pop.members.empty()) return s;
    double sum_f = 0.0, sum_size = 0.0, sum_depth = 0.0;
    for (const auto& m : pop.members) {
        const double f = m.fitness.value_or(0.0);
        s.max_fitness = std::max(s.max_fitness, f);
        sum_f += f;
        sum_size += static_cast<double>(m.size);
        sum_depth += m.depth;
    }
    const auto n = static_cast<double>(pop.members.size());
    s.mean_fitness = sum_f / n;
    s.mean_size = sum_size / n;
    s.mean_depth = sum_depth / n;
    return s;
}

GenerationStats evaluate_population(Population& pop, const Evaluator& evaluator) {
    std::size_t failures = 0;
    for (auto& m : pop.members) {
        if (!score(m, evaluator)) ++failures;
    }
    auto s = summarize(pop);
    s.evaluation_failures = failures;
    return s;
}

std::size_t evaluate_pending(Population& pop, const Evaluator& evaluator) {
    std::size_t failures = 0;
    for (auto& m : pop.members) {
        if (!m.fitness && !score(m, evaluator)) ++failures;
    }
    return failures;
}

} // namespace islandgp
