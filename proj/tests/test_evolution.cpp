#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"
#include "islandgp/evolution.hpp"
#include "islandgp/feed.hpp"
#include "islandgp/localisation.hpp"

using namespace islandgp;

namespace {

Population with_fitness(std::initializer_list<double> fs) {
    PrimitiveSet p(Sort::Number);
    p.add_terminal("x", Sort::Number);
    Population pop;
    for (double f : fs) {
        Individual ind(ProgramTree({{0, 0, 0.0}}), Origin::Local);
        ind.fitness = f;
        pop.members.push_back(ind);
    }
    pop.capacity = pop.members.size();
    return pop;
}

std::size_t count_origin(const Population& pop, Origin o) {
    return static_cast<std::size_t>(std::count_if(pop.members.begin(), pop.members.end(),
                                                  [o](const Individual& m) { return m.origin == o; }));
}

Population evaluated_random(const PrimitiveSet& p, int max_depth, std::size_t capacity, Rng& rng) {
    auto pop = random_population(p, max_depth, capacity, nullptr, rng);
    for (auto& m : pop.members) m.fitness = std::uniform_real_distribution<>(0, 1)(rng);
    return pop;
}

} // namespace

TEST_CASE("wheel: certain winner") {
    auto rng = make_rng({1});
    const std::vector<double> f{1.0, 0.0, 0.0};
    for (int i = 0; i < 1000; ++i) CHECK(select_wheel(f, rng) == 0);
}

TEST_CASE("wheel: all zero degrades to uniform") {
    auto rng = make_rng({2});
    const std::vector<double> f{0.0, 0.0, 0.0};
    std::array<int, 3> hits{};
    for (int i = 0; i < 30000; ++i) ++hits[select_wheel(f, rng)];
    for (int h : hits) CHECK(std::abs(h / 30000.0 - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("wheel: proportional") {
    auto rng = make_rng({3});
    const std::vector<double> f{0.75, 0.25};
    int zero = 0;
    for (int i = 0; i < 30000; ++i) zero += select_wheel(f, rng) == 0;
    CHECK(std::abs(zero / 30000.0 - 0.75) <= 0.02);
}

TEST_CASE("wheel: errors") {
    auto rng = make_rng({4});
    CHECK_THROWS_AS(select_wheel(std::span<const double>{}, rng), UsageError);
    CHECK_THROWS_AS(select_wheel(std::span<const Individual>{}, rng), UsageError);
}

TEST_CASE("n_best ordering and ties") {
    CHECK(n_best(with_fitness({0.2, 0.9, 0.5}), 1) == std::vector<std::size_t>{1});
    CHECK(n_best(with_fitness({0.5, 0.5}), 1) == std::vector<std::size_t>{0});
    CHECK(n_best(with_fitness({0.2, 0.9, 0.5}), 3) == std::vector<std::size_t>{1, 2, 0});
    CHECK_THROWS_AS(n_best(with_fitness({0.2}), 2), UsageError);
}

TEST_CASE("mutate a lone terminal at depth 1") {
    PrimitiveSet p(Sort::Number);
    p.add_function("add", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_terminal("x", Sort::Number);
    p.add_terminal("y", Sort::Number);
    auto rng = make_rng({5});
    for (int i = 0; i < 100; ++i) {
        const auto m = mutate(deserialize("(x)", p, 1), p, 1, rng);
        CHECK(m.size() == 1);
        CHECK(p.kind(m[0].kind).is_leaf());
    }
}

TEST_CASE("operator closure: 10000 mutations and crossovers at depth 3") {
    const auto p = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({6});
    int failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto a = build_random_tree(p, 3, rng);
        const auto b = build_random_tree(p, 3, rng);
        const auto m = mutate(a, p, 3, rng);
        const auto c = crossover(a, b, p, 3, rng);
        failures += validate(m, p, 3).has_value() || depth(m) > 3;
        failures += validate(c, p, 3).has_value() || depth(c) > 3;
    }
    CHECK(failures == 0);
}

TEST_CASE("operator closure with several sorts") {
    const auto p = localisation::primitives();
    auto rng = make_rng({7});
    for (int i = 0; i < 3000; ++i) {
        const auto a = build_random_tree(p, 4, rng);
        const auto b = build_random_tree(p, 4, rng);
        CHECK_FALSE(validate(mutate(a, p, 4, rng), p, 4).has_value());
        CHECK_FALSE(validate(crossover(a, b, p, 4, rng), p, 4).has_value());
        CHECK_FALSE(validate(crossover(a, a, p, 4, rng), p, 4).has_value());
    }
}

TEST_CASE("crossover with no compatible donor returns a copy of a") {
    PrimitiveSet p(Sort::Number);
    p.add_function("add", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_function("run", {Sort::Action}, Sort::Number);
    p.add_function("seq", {Sort::Action, Sort::Action}, Sort::Action);
    p.add_terminal("x", Sort::Number);
    p.add_terminal("go", Sort::Action);
    const auto a = deserialize("(add (x) (x))", p, 3);
    const auto b = deserialize("(run (seq (go) (go)))", p, 3);
    auto rng = make_rng({8});
    for (int i = 0; i < 50; ++i) CHECK(crossover(a, b, p, 3, rng) == a);
}

TEST_CASE("crossover grafts a subtree of b") {
    PrimitiveSet p(Sort::Number);
    p.add_function("add", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_terminal("x", Sort::Number);
    p.add_terminal("y", Sort::Number);
    const auto a = deserialize("(add (x) (x))", p, 2);
    const auto b = deserialize("(add (y) (y))", p, 2);
    auto rng = make_rng({9});
    bool changed = false;
    for (int i = 0; i < 50; ++i) {
        const auto c = crossover(a, b, p, 2, rng);
        CHECK(depth(c) <= 2);
        changed = changed || c != a;
    }
    CHECK(changed);
}

TEST_CASE("strategies: sizes and origins") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({10});

    auto pop5 = evaluated_random(fp, 3, 5, rng);
    const auto next5 = breed_next_generation(pop5, EvolutionStrategy::feed_standalone(), nullptr, fp, 3, rng);
    CHECK(next5.members.size() == 5);
    CHECK(next5.generation == 1);
    CHECK(count_origin(next5, Origin::EliteCopy) == 1);
    // the elite copy is the fittest and keeps its score
    const auto best = n_best(pop5, 1)[0];
    CHECK(next5.members[0].tree == pop5.members[best].tree);
    CHECK(next5.members[0].fitness == pop5.members[best].fitness);
    for (std::size_t i = 1; i < 5; ++i) CHECK_FALSE(next5.members[i].fitness.has_value());

    const auto lp = localisation::primitives();
    auto pop12 = evaluated_random(lp, 4, 12, rng);
    const auto next12 =
        breed_next_generation(pop12, EvolutionStrategy::localisation_standalone(), nullptr, lp, 4, rng);
    CHECK(next12.members.size() == 12);
    CHECK(count_origin(next12, Origin::RandomInjected) == 2);
    CHECK(count_origin(next12, Origin::EliteCopy) == 1);

    auto pop10 = evaluated_random(fp, 3, 10, rng);
    const auto next10 = breed_next_generation(pop10, EvolutionStrategy::island(10), nullptr, fp, 3, rng);
    CHECK(next10.members.size() == 10);
}

TEST_CASE("breeding restores capacity after immigrants") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({11});
    auto pop = evaluated_random(fp, 3, 13, rng);
    pop.capacity = 10;
    CHECK(breed_next_generation(pop, EvolutionStrategy::island(10), nullptr, fp, 3, rng).members.size() ==
          10);
}

TEST_CASE("strategy validation") {
    CHECK_THROWS_AS(EvolutionStrategy::feed_standalone().check(6), ConfigError);
    CHECK_NOTHROW(EvolutionStrategy::feed_standalone().check(5));
    EvolutionStrategy bad = EvolutionStrategy::feed_standalone();
    bad.steps[1].selector = "nobody";
    CHECK_THROWS_AS(bad.check(5), ConfigError);
    CHECK_THROWS_AS(EvolutionStrategy::island(3), ConfigError);

    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({12});
    auto pop = evaluated_random(fp, 3, 6, rng);
    CHECK_THROWS_AS(breed_next_generation(pop, EvolutionStrategy::feed_standalone(), nullptr, fp, 3, rng),
                    ConfigError);
}

TEST_CASE("strategy documents round trip") {
    for (const auto& s : {EvolutionStrategy::feed_standalone(), EvolutionStrategy::localisation_standalone(),
                          EvolutionStrategy::island(10)}) {
        const auto back = EvolutionStrategy::from_json(s.to_json());
        CHECK(back.to_json() == s.to_json());
        CHECK(back.total() == s.total());
    }
    const auto doc = nlohmann::json::parse(R"({
        "selectors": [{"name": "HR", "kind": "WHEEL", "pool": {"n_best": 3}},
                      {"name": "Leader", "kind": "WHEEL", "pool": {"n_best": 1}}],
        "steps": [{"selector": "Leader", "operator": "COPY", "count": 1},
                  {"selector": "HR", "operator": "MUTATION", "count": 2},
                  {"selector": "HR", "operator": "CROSSOVER", "count": 2}]})");
    CHECK(EvolutionStrategy::from_json(doc).to_json() == EvolutionStrategy::feed_standalone().to_json());
    CHECK_THROWS_AS(EvolutionStrategy::from_json(nlohmann::json::parse(R"({"steps": [{"operator": "SPLICE"}]})")),
                    ConfigError);
    CHECK_THROWS_AS(EvolutionStrategy::load("/nonexistent/strategy.json"), ConfigError);
}

TEST_CASE("helper guard screens every new member") {
    const auto lp = localisation::primitives();
    const HelperGuard guard{[&lp](const ProgramTree& t) { return localisation::localisation_helper(t, lp); }, 64};
    auto rng = make_rng({13});
    auto pop = random_population(lp, 4, 12, &guard, rng);
    CHECK(pop.helper_rejections > 0);
    for (auto& m : pop.members) {
        if (pop.helper_fallbacks == 0) CHECK(guard.accepts(m.tree));
        m.fitness = 0.1;
    }
    const auto next = breed_next_generation(pop, EvolutionStrategy::localisation_standalone(), &guard, lp, 4, rng);
    for (const auto& m : next.members) {
        if (next.helper_fallbacks == 0) CHECK(guard.accepts(m.tree));
    }
}

TEST_CASE("helper guard gives up after the rebuild budget") {
    PrimitiveSet p(Sort::Number);
    p.add_terminal("x", Sort::Number);
    const HelperGuard never{[](const ProgramTree&) { return false; }, 64};
    auto rng = make_rng({14});
    const auto pop = random_population(p, 2, 3, &never, rng);
    CHECK(pop.members.size() == 3);
    CHECK(pop.helper_fallbacks == 3);
    CHECK(pop.helper_rejections == 3 * 65);
}

TEST_CASE("evaluation statistics") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({15});
    auto pop = random_population(fp, 3, 5, nullptr, rng);

    auto s = evaluate_population(pop, [](const ProgramTree&) { return 0.0; });
    CHECK(s.max_fitness == 0.0);
    CHECK(s.mean_fitness == 0.0);

    int calls = 0;
    s = evaluate_population(pop, [&](const ProgramTree&) { return calls++ == 2 ? 1.0 : 0.0; });
    CHECK(s.max_fitness == 1.0);
    CHECK(s.mean_fitness == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.mean_depth <= 3.0);
    CHECK(s.members == 5);
}

TEST_CASE("evaluator failures score zero and never abort") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto rng = make_rng({16});
    auto pop = random_population(fp, 3, 4, nullptr, rng);
    int calls = 0;
    const auto s = evaluate_population(pop, [&](const ProgramTree&) -> double {
        switch (calls++) {
        case 0: throw std::runtime_error("boom");
        case 1: return 1.5;
        case 2: return std::nan("");
        default: return 0.5;
        }
    });
    CHECK(s.evaluation_failures == 3);
    CHECK(s.max_fitness == 0.5);
    for (const auto& m : pop.members) CHECK(*m.fitness >= 0.0);
}

TEST_CASE("elitism is monotone under a deterministic evaluator") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    const auto catalog = feed::FeedCatalog::standard();
    auto rng = make_rng({17});
    // expected fitness under the tech reader: deterministic
    const Evaluator eval = [&](const ProgramTree& t) {
        const auto r = feed::run_feed_program(t, fp, catalog, 10);
        if (r.displayed.empty()) return 0.0;
        double clicks = 0;
        for (const auto& it : r.displayed) clicks += catalog.feeds[it.feed].group == feed::Group::Tech ? 0.9 : 0.1;
        return std::min(r.displayed.size() / 10.0, 1.0) * clicks / static_cast<double>(r.displayed.size());
    };
    auto pop = random_population(fp, 3, 5, nullptr, rng);
    double prev = evaluate_population(pop, eval).max_fitness;
    for (int g = 0; g < 30; ++g) {
        pop = breed_next_generation(pop, EvolutionStrategy::feed_standalone(), nullptr, fp, 3, rng);
        const double now = evaluate_population(pop, eval).max_fitness;
        CHECK(now >= prev);
        prev = now;
    }
}

TEST_CASE("seeded determinism of a whole run") {
    const auto fp = feed::primitives(feed::FeedCatalog::standard());
    auto run = [&] {
        auto rng = make_rng({18});
        feed::FeedEvaluator ev(fp, feed::FeedCatalog::standard(),
                               feed::UserModel::tech_reader(feed::FeedCatalog::standard()), 3);
        auto pop = random_population(fp, 3, 5, nullptr, rng);
        std::vector<std::string> trace;
        for (int g = 0; g < 10; ++g) {
            evaluate_population(pop, std::ref(ev));
            for (const auto& m : pop.members) trace.push_back(serialize(m.tree, fp) + format_number(*m.fitness));
            pop = breed_next_generation(pop, EvolutionStrategy::feed_standalone(), nullptr, fp, 3, rng);
        }
        return trace;
    };
    CHECK(run() == run());
}
