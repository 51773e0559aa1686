#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "islandgp/interpreter.hpp"
#include "islandgp/program.hpp"

namespace islandgp::feed {

enum class Group { Tech, Other };

struct Feed {
    std::string id;
    int unread{0}; // unread items available per report
    Group group{Group::Other};
};

struct FeedCatalog {
    std::vector<Feed> feeds;

    /// Four technology feeds followed by three others, five unread items each.
    static FeedCatalog standard();
    static FeedCatalog from_json(const nlohmann::json& doc);

    std::size_t index_of(const std::string& id) const;
    void check() const;
};

/// Click probability per catalog feed.
struct UserModel {
    std::vector<double> click_probability;

    /// `hit` for technology feeds, `miss` for the rest.
    static UserModel tech_reader(const FeedCatalog& catalog, double hit = 0.9, double miss = 0.1);
    /// `hit` for the named feeds, `miss` for the rest.
    static UserModel preferring(const FeedCatalog& catalog, const std::vector<std::string>& ids,
                                double hit = 0.9, double miss = 0.1);
    static UserModel from_json(const FeedCatalog& catalog, const nlohmann::json& doc);
};

struct Item {
    std::size_t feed{0};
    int index{0};

    friend bool operator==(const Item&, const Item&) = default;
};

struct FeedReport {
    std::vector<Item> displayed;
    int desired_qty{10};
    std::vector<Item> clicked;
};

inline constexpr int kDefaultDesiredQty = 10;
inline constexpr int kMaxDepth = 3;

/// add, sub, mul, if_greater over Number; `group_is_tech`, `unread_count`,
/// one `is_<feed id>` test per feed, and constants in [-1, 1].
PrimitiveSet primitives(const FeedCatalog& catalog);

/// Scores each feed with the program, then fills the report round-robin from
/// feeds with a positive score, best first. A killed program shows nothing.
FeedReport run_feed_program(const ProgramTree& tree, const PrimitiveSet& prims,
                            const FeedCatalog& catalog, int desired_qty,
                            const SupervisorPolicy& policy = {});

/// Each displayed item is clicked independently with its feed's probability.
void simulate_clicks(FeedReport& report, const UserModel& user, Rng& rng);

/// min(displayed/desired, 1) * clicked/displayed; 0 when nothing is displayed.
double feed_fitness(const FeedReport& report);

/// Fitness callback for one island: one report per evaluation.
class FeedEvaluator {
public:
    FeedEvaluator(const PrimitiveSet& prims, FeedCatalog catalog, UserModel user, std::uint64_t seed,
                  int desired_qty = kDefaultDesiredQty);

    double operator()(const ProgramTree& tree);

    const FeedCatalog& catalog() const { return catalog_; }
    const UserModel& user() const { return user_; }

private:
    const PrimitiveSet* prims_;
    FeedCatalog catalog_;
    UserModel user_;
    Rng rng_;
    int desired_qty_;
};

} // namespace islandgp::feed
