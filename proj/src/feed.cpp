#include "islandgp/feed.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"

namespace islandgp::feed {

FeedCatalog FeedCatalog::standard() {
    return {{
        {"techcrunch", 5, Group::Tech},
        {"techland", 5, Group::Tech},
        {"engadget", 5, Group::Tech},
        {"digitaltrends", 5, Group::Tech},
        {"visualloop", 5, Group::Other},
        {"breakvideos", 5, Group::Other},
        {"businessgreen", 5, Group::Other},
    }};
}

FeedCatalog FeedCatalog::from_json(const nlohmann::json& doc) {
    FeedCatalog c;
    try {
        for (const auto& f : doc.at("feeds")) {
            const auto group = f.at("group").get<std::string>();
            if (group != "tech" && group != "other") {
                throw ConfigError("feed group must be 'tech' or 'other', got '" + group + "'");
            }
            c.feeds.push_back({f.at("id").get<std::string>(), f.at("unread").get<int>(),
                               group == "tech" ? Group::Tech : Group::Other});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad feed catalog: ") + e.what());
    }
    c.check();
    return c;
}

std::size_t FeedCatalog::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < feeds.size(); ++i) {
        if (feeds[i].id == id) return i;
    }
    throw ConfigError("unknown feed '" + id + "'");
}

void FeedCatalog::check() const {
    if (feeds.empty()) throw ConfigError("feed catalog is empty");
    for (const auto& f : feeds) {
        if (f.unread < 0) throw ConfigError("feed '" + f.id + "' has negative unread count");
    }
}

UserModel UserModel::tech_reader(const FeedCatalog& catalog, double hit, double miss) {
    UserModel u;
    for (const auto& f : catalog.feeds) u.click_probability.push_back(f.group == Group::Tech ? hit : miss);
    return u;
}

UserModel UserModel::preferring(const FeedCatalog& catalog, const std::vector<std::string>& ids,
                                double hit, double miss) {
    UserModel u;
    u.click_probability.assign(catalog.feeds.size(), miss);
    for (const auto& id : ids) u.click_probability[catalog.index_of(id)] = hit;
    return u;
}

UserModel UserModel::from_json(const FeedCatalog& catalog, const nlohmann::json& doc) {
    UserModel u;
    u.click_probability.assign(catalog.feeds.size(), 0.0);
    try {
        for (const auto& [id, p] : doc.items()) {
            const double prob = p.get<double>();
            if (!(prob >= 0.0 && prob <= 1.0)) {
                throw ConfigError("click probability for '" + id + "' outside [0,1]");
            }
            u.click_probability[catalog.index_of(id)] = prob;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad user model: ") + e.what());
    }
    return u;
}

PrimitiveSet primitives(const FeedCatalog& catalog) {
    PrimitiveSet p(Sort::Number);
    p.add_function("add", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_function("sub", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_function("mul", {Sort::Number, Sort::Number}, Sort::Number);
    p.add_function("if_greater", {Sort::Number, Sort::Number, Sort::Number, Sort::Number},
                   Sort::Number);
    p.add_terminal("group_is_tech", Sort::Number);
    p.add_terminal("unread_count", Sort::Number);
    for (const auto& f : catalog.feeds) p.add_terminal("is_" + f.id, Sort::Number);
    p.add_constant(Sort::Number,
                   [](Rng& rng) { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng); });
    return p;
}

FeedReport run_feed_program(const ProgramTree& tree, const PrimitiveSet& prims,
                            const FeedCatalog& catalog, int desired_qty,
                            const SupervisorPolicy& policy) {
    FeedReport report;
    report.desired_qty = desired_qty;

    std::size_t current = 0;
    Environment env(prims);
    env.bind("group_is_tech", [&](std::span<const double>) {
        return catalog.feeds[current].group == Group::Tech ? 1.0 : 0.0;
    });
    env.bind("unread_count", [&](std::span<const double>) {
        return static_cast<double>(catalog.feeds[current].unread);
    });
    for (std::size_t f = 0; f < catalog.feeds.size(); ++f) {
        env.bind("is_" + catalog.feeds[f].id,
                 [&current, f](std::span<const double>) { return current == f ? 1.0 : 0.0; });
    }

    std::vector<double> score(catalog.feeds.size());
    for (current = 0; current < catalog.feeds.size(); ++current) {
        const auto out = execute(tree, env, policy);
        if (out.killed()) return report;
        score[current] = *out.value;
    }

    std::vector<std::size_t> ranked;
    for (std::size_t f = 0; f < score.size(); ++f) {
        if (score[f] > 0.0) ranked.push_back(f);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const auto wanted = static_cast<std::size_t>(std::max(desired_qty, 0));
    for (int round = 0; report.displayed.size() < wanted; ++round) {
        bool any = false;
        for (std::size_t f : ranked) {
            if (round >= catalog.feeds[f].unread) continue;
            any = true;
            report.displayed.push_back({f, round});
            if (report.displayed.size() == wanted) break;
        }
        if (!any) break;
    }
    return report;
}

void simulate_clicks(FeedReport& report, const UserModel& user, Rng& rng) {
    report.clicked.clear();
    for (const auto& item : report.displayed) {
        if (uniform01(rng) < user.click_probability.at(item.feed)) report.clicked.push_back(item);
    }
}

double feed_fitness(const FeedReport& report) {
    if (report.displayed.empty() || report.desired_qty < 1) return 0.0;
    const auto shown = static_cast<double>(report.displayed.size());
    const double count = std::min(shown / report.desired_qty, 1.0);
    const double clicked = static_cast<double>(report.clicked.size()) / shown;
    return count * clicked;
}

FeedEvaluator::FeedEvaluator(const PrimitiveSet& prims, FeedCatalog catalog, UserModel user,
                             std::uint64_t seed, int desired_qty)
    : prims_(&prims),
      catalog_(std::move(catalog)),
      user_(std::move(user)),
      rng_(make_rng({seed, 0x636c69636b})),
      desired_qty_(desired_qty) {
    catalog_.check();
    if (user_.click_probability.size() != catalog_.feeds.size()) {
        throw ConfigError("user model does not cover every feed");
    }
    if (desired_qty_ < 1) throw ConfigError("desired quantity must be at least 1");
}

double FeedEvaluator::operator()(const ProgramTree& tree) {
    auto report = run_feed_program(tree, *prims_, catalog_, desired_qty_);
    simulate_clicks(report, user_, rng_);
    return feed_fitness(report);
}

} // namespace islandgp::feed
