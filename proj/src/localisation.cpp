#include "islandgp/localisation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"

namespace islandgp::localisation {

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

ProviderModel ProviderModel::standard() {
    ProviderModel m;
    m[Provider::Gps] = {5.0, 3.0, 140.0, 10, false, true};
    m[Provider::Wifi] = {40.0, 25.0, 30.0, 2, true, true};
    m[Provider::Cell] = {400.0, 300.0, 5.0, 1, true, true};
    return m;
}

double EnergyBudget::budget_ma() const { return std::floor(capacity_mah / day_hours); }

// ---------------------------------------------------------------------------
// World

World::World(std::vector<Waypoint> trajectory, std::vector<Segment> segments,
             ProviderModel providers, EnergyBudget budget, int duration_s, std::uint64_t seed)
    : trajectory_(std::move(trajectory)),
      segments_(std::move(segments)),
      providers_(providers),
      budget_(budget),
      duration_s_(duration_s) {
    if (duration_s_ < 1) throw ConfigError("evaluation duration must be at least 1 s");
    if (trajectory_.empty()) throw ConfigError("trajectory needs at least one waypoint");
    if (!std::is_sorted(trajectory_.begin(), trajectory_.end(),
                        [](const Waypoint& a, const Waypoint& b) { return a.t < b.t; })) {
        throw ConfigError("trajectory waypoints must be in time order");
    }
    if (!(budget_.budget_ma() > 0.0)) throw ConfigError("energy budget must be positive");
    for (const auto& s : providers_.specs) {
        if (!(s.accuracy_radius > 0.0)) throw ConfigError("provider accuracy must be positive");
        if (s.error_radius < 0.0 || s.current_ma < 0.0 || s.fix_latency_s < 0) {
            throw ConfigError("provider parameters must be non-negative");
        }
    }
    Rng rng = make_rng({seed, 0x776f726c64});
    errors_.resize(static_cast<std::size_t>(duration_s_) + 1);
    for (auto& row : errors_) {
        for (std::size_t p = 0; p < kProviderCount; ++p) {
            const double r = providers_.specs[p].error_radius * std::sqrt(uniform01(rng));
            const double theta = 2.0 * std::numbers::pi * uniform01(rng);
            row[p] = {r * std::cos(theta), r * std::sin(theta)};
        }
    }
}

World World::standard(std::uint64_t seed) {
    std::vector<Waypoint> path{{0.0, {0.0, 0.0}}, {30.0, {36.0, 0.0}}, {60.0, {36.0, 0.0}}};
    std::vector<Segment> segments{{1, 30, false}, {31, 60, true}};
    return World(std::move(path), std::move(segments), ProviderModel::standard(), EnergyBudget{}, 60,
                 seed);
}

namespace {

Provider parse_provider(const std::string& name) {
    if (name == "gps") return Provider::Gps;
    if (name == "wifi") return Provider::Wifi;
    if (name == "cell") return Provider::Cell;
    throw ConfigError("unknown provider '" + name + "'");
}

} // namespace

World World::from_json(const nlohmann::json& doc) {
    try {
        auto providers = ProviderModel::standard();
        if (doc.contains("providers")) {
            for (const auto& [name, p] : doc.at("providers").items()) {
                auto& spec = providers[parse_provider(name)];
                spec.accuracy_radius = p.value("accuracy_m", spec.accuracy_radius);
                spec.error_radius = p.value("error_m", spec.error_radius);
                spec.current_ma = p.value("current_ma", spec.current_ma);
                spec.fix_latency_s = p.value("latency_s", spec.fix_latency_s);
                spec.works_indoors = p.value("indoors", spec.works_indoors);
                spec.works_outdoors = p.value("outdoors", spec.works_outdoors);
            }
        }
        std::vector<Waypoint> path;
        for (const auto& w : doc.at("trajectory")) {
            path.push_back({w.at(0).get<double>(), {w.at(1).get<double>(), w.at(2).get<double>()}});
        }
        std::vector<Segment> segments;
        if (doc.contains("segments")) {
            for (const auto& s : doc.at("segments")) {
                segments.push_back(
                    {s.at("from").get<int>(), s.at("to").get<int>(), s.at("indoor").get<bool>()});
            }
        }
        EnergyBudget budget;
        if (doc.contains("budget")) {
            budget.capacity_mah = doc.at("budget").value("capacity_mah", budget.capacity_mah);
            budget.day_hours = doc.at("budget").value("day_hours", budget.day_hours);
        }
        return World(std::move(path), std::move(segments), providers, budget,
                     doc.value("duration_s", 60), doc.value("seed", std::uint64_t{7}));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad world file: ") + e.what());
    }
}

Position World::truth(int second) const {
    const double t = second;
    if (t <= trajectory_.front().t) return trajectory_.front().at;
    if (t >= trajectory_.back().t) return trajectory_.back().at;
    auto hi = std::upper_bound(trajectory_.begin(), trajectory_.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    auto lo = hi - 1;
    const double span = hi->t - lo->t;
    const double u = span > 0.0 ? (t - lo->t) / span : 0.0;
    return {lo->at.x + u * (hi->at.x - lo->at.x), lo->at.y + u * (hi->at.y - lo->at.y)};
}

bool World::indoor(int second) const {
    for (const auto& s : segments_) {
        if (second >= s.from_s && second <= s.to_s) return s.indoor;
    }
    return false;
}

bool World::available(Provider p, int second) const {
    const auto& s = providers_[p];
    return indoor(second) ? s.works_indoors : s.works_outdoors;
}

Position World::reading(Provider p, int second) const {
    const auto idx = static_cast<std::size_t>(std::clamp(second, 0, duration_s_));
    const Position e = errors_[idx][static_cast<std::size_t>(p)];
    const Position t = truth(second);
    return {t.x + e.x, t.y + e.y};
}

std::optional<World::Reference> World::reference(int second) const {
    std::optional<Reference> best;
    for (std::size_t i = 0; i < kProviderCount; ++i) {
        const auto p = static_cast<Provider>(i);
        if (!available(p, second)) continue;
        const double acc = providers_[p].accuracy_radius;
        if (!best || acc < best->accuracy) best = Reference{reading(p, second), acc};
    }
    return best;
}

// ---------------------------------------------------------------------------
// Primitives and fitness

PrimitiveSet primitives() {
    PrimitiveSet p(Sort::Action);
    p.add_function("seq", {Sort::Action, Sort::Action}, Sort::Action);
    p.add_function("if_greater", {Sort::Number, Sort::Number, Sort::Action, Sort::Action},
                   Sort::Action);
    p.add_terminal("enable_gps", Sort::Action);
    p.add_terminal("enable_wifi", Sort::Action);
    p.add_terminal("enable_cell", Sort::Action);
    p.add_terminal("disable_gps", Sort::Action);
    p.add_terminal("disable_wifi", Sort::Action);
    p.add_terminal("disable_cell", Sort::Action);
    p.add_terminal("request_update", Sort::Action);
    p.add_function("add", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_function("mul", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_terminal("last_fix_age", Sort::Number);
    p.add_terminal("last_accuracy", Sort::Number);
    p.add_constant(Sort::Number,
                   [](Rng& rng) { return std::uniform_real_distribution<double>(0.0, 60.0)(rng); });
    return p;
}

double accuracy_fitness(std::optional<Position> program, Position best, double accuracy) {
    if (!program || !(accuracy > 0.0)) return 0.0;
    const double ratio = distance(*program, best) / accuracy;
    if (ratio <= 1.0) return 1.0 - 0.5 * ratio;
    if (ratio <= 2.0) return 0.5 - 0.5 * (ratio - 1.0);
    return 0.0;
}

double energy_fitness(double mean_power_ma, const EnergyBudget& budget) {
    return std::max(0.0, 1.0 - mean_power_ma / budget.budget_ma());
}

bool localisation_helper(const ProgramTree& tree, const PrimitiveSet& prims) {
    bool enables = false;
    bool requests = false;
    for (const auto& n : tree.nodes()) {
        const auto& name = prims.kind(n.kind).name;
        enables = enables || name.starts_with("enable_");
        requests = requests || name == "request_update";
    }
    return enables && requests;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

constexpr double kNoFixSentinel = 1000.0;

struct Device {
    const World& world;
    std::array<bool, kProviderCount> on{};
    std::array<int, kProviderCount> warm_s{}; // whole seconds switched on
    std::optional<Position> position{};
    std::optional<int> last_fix_s{};
    double last_accuracy{kNoFixSentinel};
    int now{0};

    void enable(Provider p) {
        const auto i = static_cast<std::size_t>(p);
        if (!on[i]) {
            on[i] = true;
            warm_s[i] = 0;
        }
    }
    void disable(Provider p) {
        const auto i = static_cast<std::size_t>(p);
        on[i] = false;
        warm_s[i] = 0;
    }
    bool has_fix(Provider p) const {
        const auto i = static_cast<std::size_t>(p);
        return on[i] && warm_s[i] >= world.providers()[p].fix_latency_s && world.available(p, now);
    }
    double request() {
        std::optional<Provider> best;
        for (std::size_t i = 0; i < kProviderCount; ++i) {
            const auto p = static_cast<Provider>(i);
            if (!has_fix(p)) continue;
            if (!best || world.providers()[p].accuracy_radius <
                             world.providers()[*best].accuracy_radius) {
                best = p;
            }
        }
        if (!best) return 0.0;
        position = world.reading(*best, now);
        last_fix_s = now;
        last_accuracy = world.providers()[*best].accuracy_radius;
        return 1.0;
    }
    double power() const {
        double ma = 0.0;
        for (std::size_t i = 0; i < kProviderCount; ++i) {
            if (on[i]) ma += world.providers().specs[i].current_ma;
        }
        return ma;
    }
    void tick() {
        for (std::size_t i = 0; i < kProviderCount; ++i) {
            if (on[i]) ++warm_s[i];
        }
    }
};

} // namespace

Evaluation evaluate_localisation(const ProgramTree& tree, const PrimitiveSet& prims,
                                 const World& world, const SupervisorPolicy& policy) {
    Device dev{world};
    Environment env(prims);
    auto action = [](auto fn) {
        return [fn](std::span<const double>) {
            fn();
            return 0.0;
        };
    };
    env.bind("enable_gps", action([&] { dev.enable(Provider::Gps); }));
    env.bind("enable_wifi", action([&] { dev.enable(Provider::Wifi); }));
    env.bind("enable_cell", action([&] { dev.enable(Provider::Cell); }));
    env.bind("disable_gps", action([&] { dev.disable(Provider::Gps); }));
    env.bind("disable_wifi", action([&] { dev.disable(Provider::Wifi); }));
    env.bind("disable_cell", action([&] { dev.disable(Provider::Cell); }));
    env.bind("request_update", [&](std::span<const double>) { return dev.request(); });
    env.bind("last_fix_age", [&](std::span<const double>) {
        return dev.last_fix_s ? static_cast<double>(dev.now - *dev.last_fix_s) : kNoFixSentinel;
    });
    env.bind("last_accuracy", [&](std::span<const double>) { return dev.last_accuracy; });

    Evaluation ev;
    const int n = world.duration();
    double sum = 0.0;
    for (int s = 1; s <= n; ++s) {
        dev.now = s;
        const auto run = execute(tree, env, policy);
        if (run.killed()) {
            ev.killed_at = s;
            break;
        }
        TickRecord t;
        t.second = s;
        t.program_position = dev.position;
        t.best = world.reference(s);
        t.power_ma = dev.power();
        t.accuracy = t.best ? accuracy_fitness(dev.position, t.best->at, t.best->accuracy) : 0.0;
        t.energy = energy_fitness(t.power_ma, world.budget());
        sum += t.accuracy * t.energy;
        ev.ticks.push_back(t);
        dev.tick();
    }
    ev.fitness = sum / n;
    return ev;
}

} // namespace islandgp::localisation
