#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"
#include "islandgp/experiment.hpp"

using namespace islandgp;
using namespace islandgp::experiment;

namespace {

ExperimentConfig feed_config(int islands, MigrationPolicy::Mode mode, int iterations = 3) {
    ExperimentConfig c;
    c.app = App::Feed;
    c.islands = islands;
    c.capacity = 10;
    c.generations = 20;
    c.iterations = iterations;
    c.seed = 5;
    c.policy = {5, 0.2, mode};
    return c;
}

std::string csv_of(const Dataset& d) {
    std::ostringstream out;
    write_csv(out, d);
    return out.str();
}

Dataset synthetic(const std::vector<double>& max_by_generation) {
    Dataset d;
    for (int g = 0; g < static_cast<int>(max_by_generation.size()); ++g) {
        Row r;
        r.generation = g;
        r.max_fitness = max_by_generation[static_cast<std::size_t>(g)];
        r.mean_fitness = r.max_fitness / 2;
        d.rows.push_back(r);
    }
    return d;
}

} // namespace

TEST_CASE("row count follows iterations x generations x islands") {
    auto c = feed_config(2, MigrationPolicy::Mode::Migrate, 15);
    const auto d = run_experiment(c);
    CHECK(d.rows.size() == 15 * 20 * 2);
    for (std::size_t i = 1; i < d.rows.size(); ++i) {
        const auto& a = d.rows[i - 1];
        const auto& b = d.rows[i];
        CHECK(std::tie(a.iteration, a.generation, a.island) < std::tie(b.iteration, b.generation, b.island));
    }
    // two emigrants each way at rows 4, 9, 14, 19
    for (const auto& r : d.rows) {
        const bool event = (r.generation + 1) % 5 == 0;
        CHECK(r.emigrants_sent == (event ? 2u : 0u));
        CHECK(r.immigrants_admitted == (event ? 2u : 0u));
    }
}

TEST_CASE("single island with no migration is the standalone baseline") {
    auto c = feed_config(1, MigrationPolicy::Mode::None);
    const auto d = run_experiment(c);
    CHECK(d.rows.size() == 3 * 20);
    for (const auto& r : d.rows) {
        CHECK(r.island == 0);
        CHECK(r.emigrants_sent == 0);
        CHECK(r.immigrants_admitted == 0);
    }
}

TEST_CASE("reruns are byte-identical and seeds matter") {
    auto c = feed_config(2, MigrationPolicy::Mode::Migrate);
    const auto a = csv_of(run_experiment(c));
    CHECK(a == csv_of(run_experiment(c)));
    c.seed = 6;
    CHECK(a != csv_of(run_experiment(c)));

    ExperimentConfig l;
    l.app = App::Localisation;
    l.islands = 2;
    l.iterations = 2;
    l.generations = 6;
    l.policy = {3, 0.3, MigrationPolicy::Mode::RandomInject};
    CHECK(csv_of(run_experiment(l)) == csv_of(run_experiment(l)));
}

TEST_CASE("CSV round trip") {
    const auto d = run_experiment(feed_config(2, MigrationPolicy::Mode::Migrate, 2));
    const auto text = csv_of(d);
    CHECK(text.rfind(std::string(kCsvHeader) + "\r\n", 0) == 0);
    std::istringstream in(text);
    const auto back = read_csv(in);
    CHECK(back.rows.size() == d.rows.size());
    CHECK(csv_of(back) == text);

    std::istringstream bad_header("iteration,generation\r\n");
    CHECK_THROWS(read_csv(bad_header));
    std::istringstream bad_field(std::string(kCsvHeader) + "\r\n0,0,0,x,0,0,0,0,0,0\r\n");
    CHECK_THROWS(read_csv(bad_field));
}

TEST_CASE("aggregates are recomputable from rows") {
    const auto d = run_experiment(feed_config(2, MigrationPolicy::Mode::Migrate, 4));
    const auto agg = aggregate(d);
    REQUIRE(agg.size() == 20);
    for (const auto& a : agg) {
        std::vector<double> maxes, means;
        for (const auto& r : d.rows) {
            if (r.generation != a.generation) continue;
            maxes.push_back(r.max_fitness);
            means.push_back(r.mean_fitness);
        }
        auto stats = [](const std::vector<double>& v) {
            double m = 0;
            for (double x : v) m += x;
            m /= static_cast<double>(v.size());
            double ss = 0;
            for (double x : v) ss += (x - m) * (x - m);
            const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
            return std::array<double, 3>{m, sd, sd / std::sqrt(static_cast<double>(v.size()))};
        };
        const auto mx = stats(maxes);
        const auto mn = stats(means);
        CHECK(a.samples == 8);
        CHECK(a.max_mean == doctest::Approx(mx[0]).epsilon(1e-12));
        CHECK(a.max_sd == doctest::Approx(mx[1]).epsilon(1e-12));
        CHECK(a.max_se == doctest::Approx(mx[2]).epsilon(1e-12));
        CHECK(a.mean_mean == doctest::Approx(mn[0]).epsilon(1e-12));
        CHECK(a.mean_sd == doctest::Approx(mn[1]).epsilon(1e-12));
        CHECK(a.mean_se == doctest::Approx(mn[2]).epsilon(1e-12));
    }
    std::ostringstream s;
    write_summary_csv(s, agg);
    CHECK(s.str().rfind(std::string(kSummaryHeader) + "\r\n", 0) == 0);
}

TEST_CASE("compare runs") {
    std::vector<double> slow(20, 0.5), fast(20, 0.5), never(20, 0.5);
    for (int g = 12; g < 20; ++g) slow[static_cast<std::size_t>(g)] = 0.95;
    for (int g = 4; g < 20; ++g) fast[static_cast<std::size_t>(g)] = 0.9;

    const auto c = compare_runs(synthetic(slow), synthetic(fast), 0.9);
    CHECK(c.baseline_generation == 12);
    CHECK(c.treatment_generation == 4);
    REQUIRE(c.improvement.has_value());
    CHECK(*c.improvement == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const auto same = compare_runs(synthetic(slow), synthetic(slow), 0.9);
    CHECK(same.improvement == 0.0);

    const auto none = compare_runs(synthetic(slow), synthetic(never), 0.9);
    CHECK_FALSE(none.treatment_generation.has_value());
    CHECK_FALSE(none.improvement.has_value());

    CHECK_THROWS_AS(compare_runs(synthetic(slow), synthetic(fast), 0.0), UsageError);
    CHECK_THROWS_AS(compare_runs(synthetic(slow), synthetic(fast), 1.5), UsageError);
    CHECK_NOTHROW(compare_runs(synthetic(slow), synthetic(fast), 1.0));
}

TEST_CASE("config validation") {
    auto ok = feed_config(2, MigrationPolicy::Mode::Migrate);
    CHECK_NOTHROW(ok.check());

    auto c = ok;
    c.islands = 0;
    CHECK_THROWS_AS(c.check(), UsageError);
    c = ok;
    c.policy.interval = 0;
    CHECK_THROWS_AS(c.check(), UsageError);
    c.policy.mode = MigrationPolicy::Mode::None;
    CHECK_NOTHROW(c.check());
    c = ok;
    c.policy.rate = 1.5;
    CHECK_THROWS_AS(c.check(), UsageError);
    c = ok;
    c.loss = -0.5;
    CHECK_THROWS_AS(c.check(), UsageError);
    c = ok;
    c.iterations = 0;
    CHECK_THROWS_AS(c.check(), UsageError);
    c = ok;
    c.app = App::Localisation;
    c.landscape = Landscape::Heterogeneous;
    CHECK_THROWS_AS(c.check(), UsageError);
    c = ok;
    c.strategy = EvolutionStrategy::feed_standalone(); // sized for 5, not 10
    CHECK_THROWS_AS(c.check(), UsageError);
    c.capacity = 5;
    CHECK_NOTHROW(c.check());
    c = ok;
    c.users = std::vector<feed::UserModel>{feed::UserModel::tech_reader(feed::FeedCatalog::standard())};
    CHECK_THROWS_AS(c.check(), UsageError);
    CHECK_THROWS_AS(run_experiment(c), UsageError);
}

TEST_CASE("config documents") {
    const auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({
        "app": "localisation", "islands": 3, "capacity": 12, "generations": 7, "iterations": 2,
        "seed": 9, "interval": 3, "rate": 0.25, "mode": "random", "helper": false})"));
    CHECK(c.app == App::Localisation);
    CHECK(c.islands == 3);
    CHECK(c.capacity == 12);
    CHECK(c.policy.mode == MigrationPolicy::Mode::RandomInject);
    CHECK(c.policy.interval == 3);
    CHECK_FALSE(c.helper);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"app": "chess"})")), UsageError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"mode": "swap"})")), UsageError);
}

TEST_CASE("total loss leaves trajectories as without migration") {
    auto lossy = feed_config(2, MigrationPolicy::Mode::Migrate);
    lossy.loss = 1.0;
    auto none = feed_config(2, MigrationPolicy::Mode::None);
    auto a = run_experiment(lossy);
    const auto b = run_experiment(none);
    REQUIRE(a.rows.size() == b.rows.size());
    bool sent = false;
    for (auto& r : a.rows) {
        sent = sent || r.emigrants_sent > 0;
        r.emigrants_sent = 0; // still sent, just never arrives
    }
    CHECK(sent);
    CHECK(csv_of(a) == csv_of(b));
}

TEST_CASE("heterogeneous landscape uses island-local users") {
    auto c = feed_config(2, MigrationPolicy::Mode::Migrate, 2);
    c.landscape = Landscape::Heterogeneous;
    const auto prefs = heterogeneous_preferences();
    REQUIRE(prefs.size() == 2);
    CHECK(prefs[0] != prefs[1]);
    CHECK(run_experiment(c).rows.size() == 2 * 20 * 2);
}

TEST_CASE("observer sees every island generation") {
    auto c = feed_config(2, MigrationPolicy::Mode::Migrate, 2);
    std::map<std::pair<int, std::size_t>, int> seen;
    run_experiment(c, [&](int m, std::size_t k, const Population& pop) {
        CHECK(pop.members.size() >= c.capacity);
        ++seen[{m, k}];
    });
    CHECK(seen.size() == 4);
    for (const auto& [key, n] : seen) CHECK(n == 20);
}

TEST_CASE("datagram transport runs on loopback") {
    auto c = feed_config(2, MigrationPolicy::Mode::Migrate, 2);
    c.transport = TransportKind::Udp;
    const auto d = run_experiment(c);
    CHECK(d.rows.size() == 2 * 20 * 2);
    std::size_t sent = 0;
    for (const auto& r : d.rows) {
        sent += r.emigrants_sent;
        CHECK(r.max_fitness >= 0.0);
        CHECK(r.max_fitness <= 1.0);
    }
    CHECK(sent == 2 * 2 * 4 * 2);
}

#ifdef ISLANDGP_CLI
TEST_CASE("command line exit codes") {
    const std::string cli = ISLANDGP_CLI;
    const std::string out = "islandgp_cli_test.csv";
    CHECK(std::system((cli + " run --app feed --islands 2 --generations 5 --iterations 1 --interval 2 --rate 0.2"
                             " --mode migrate --out " + out + " > /dev/null 2>&1").c_str()) == 0);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    CHECK(header == std::string(kCsvHeader) + "\r");
    CHECK(std::system((cli + " run --app feed --islands 0 > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((cli + " run --mode sideways > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((cli + " compare --baseline " + out + " --treatment " + out +
                       " --threshold 2 > /dev/null 2>&1").c_str()) != 0);
    std::remove(out.c_str());
}
#endif
