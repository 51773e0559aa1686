#include "islandgp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"

namespace islandgp::experiment {

std::vector<std::vector<std::string>> heterogeneous_preferences() {
    return {{"techcrunch", "engadget"}, {"breakvideos", "digitaltrends"}};
}

void ExperimentConfig::check() const {
    if (islands < 1) throw UsageError("--islands must be at least 1");
    if (capacity < 1) throw UsageError("--capacity must be at least 1");
    if (generations < 1) throw UsageError("--generations must be at least 1");
    if (iterations < 1) throw UsageError("--iterations must be at least 1");
    if (policy.mode != MigrationPolicy::Mode::None) {
        if (policy.interval < 1) throw UsageError("--interval must be at least 1");
        if (!(policy.rate >= 0.0 && policy.rate <= 1.0)) throw UsageError("--rate must lie in [0,1]");
    }
    if (!(loss >= 0.0 && loss <= 1.0)) throw UsageError("--loss must lie in [0,1]");
    if (max_depth && *max_depth < 1) throw UsageError("max depth must be at least 1");
    if (app == App::Localisation && landscape == Landscape::Heterogeneous) {
        throw UsageError("the heterogeneous landscape is defined for the feed app only");
    }
    if (users && users->size() != static_cast<std::size_t>(islands)) {
        throw UsageError("one user model per island is required");
    }
    if (strategy) {
        try {
            strategy->check(capacity);
        } catch (const ConfigError& e) {
            throw UsageError(e.what());
        }
    } else if (capacity < 4) {
        throw UsageError("the default island strategy needs --capacity of at least 4");
    }
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
    ExperimentConfig c;
    try {
        if (doc.contains("app")) {
            const auto app = doc.at("app").get<std::string>();
            if (app == "feed") c.app = App::Feed;
            else if (app == "localisation") c.app = App::Localisation;
            else throw UsageError("unknown app '" + app + "'");
        }
        c.islands = doc.value("islands", c.islands);
        c.capacity = doc.value("capacity", c.capacity);
        c.generations = doc.value("generations", c.generations);
        c.iterations = doc.value("iterations", c.iterations);
        c.seed = doc.value("seed", c.seed);
        c.policy.interval = doc.value("interval", c.policy.interval);
        c.policy.rate = doc.value("rate", c.policy.rate);
        if (doc.contains("mode")) {
            const auto mode = doc.at("mode").get<std::string>();
            if (mode == "migrate") c.policy.mode = MigrationPolicy::Mode::Migrate;
            else if (mode == "random") c.policy.mode = MigrationPolicy::Mode::RandomInject;
            else if (mode == "none") c.policy.mode = MigrationPolicy::Mode::None;
            else throw UsageError("unknown mode '" + mode + "'");
        }
        if (doc.contains("landscape")) {
            const auto l = doc.at("landscape").get<std::string>();
            if (l == "homo") c.landscape = Landscape::Homogeneous;
            else if (l == "hetero") c.landscape = Landscape::Heterogeneous;
            else throw UsageError("unknown landscape '" + l + "'");
        }
        if (doc.contains("transport")) {
            const auto t = doc.at("transport").get<std::string>();
            if (t == "sim") c.transport = TransportKind::Simulated;
            else if (t == "udp") c.transport = TransportKind::Udp;
            else throw UsageError("unknown transport '" + t + "'");
        }
        c.loss = doc.value("loss", c.loss);
        c.helper = doc.value("helper", c.helper);
        if (doc.contains("max_depth")) c.max_depth = doc.at("max_depth").get<int>();
        if (doc.contains("strategy")) {
            const auto& s = doc.at("strategy");
            c.strategy = s.is_string() ? EvolutionStrategy::load(s.get<std::string>())
                                       : EvolutionStrategy::from_json(s);
        }
        if (doc.contains("catalog")) c.catalog = feed::FeedCatalog::from_json(doc.at("catalog"));
        if (doc.contains("users")) {
            const auto catalog = c.catalog.value_or(feed::FeedCatalog::standard());
            std::vector<feed::UserModel> users;
            for (const auto& u : doc.at("users")) {
                users.push_back(feed::UserModel::from_json(catalog, u));
            }
            c.users = std::move(users);
        }
        if (doc.contains("world")) c.world = localisation::World::from_json(doc.at("world"));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad experiment config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return make_rng({base, a, b, c})();
}

constexpr std::uint64_t kIslandStream = 1;
constexpr std::uint64_t kUserStream = 2;
constexpr std::uint64_t kBusStream = 3;

Row to_row(int iteration, int island, const IslandGenerationRecord& r) {
    return {iteration,
            r.stats.generation,
            island,
            r.stats.max_fitness,
            r.stats.mean_fitness,
            r.stats.mean_size,
            r.stats.mean_depth,
            r.immigrants_admitted,
            r.emigrants_sent,
            r.stats.helper_rejections};
}

} // namespace

Dataset run_experiment(const ExperimentConfig& config, const RunObserver& observer) {
    config.check();

    const auto catalog = config.catalog.value_or(feed::FeedCatalog::standard());
    const auto world = config.world.value_or(localisation::World::standard());
    const bool is_feed = config.app == App::Feed;
    const PrimitiveSet prims = is_feed ? feed::primitives(catalog) : localisation::primitives();
    const int max_depth =
        config.max_depth.value_or(is_feed ? feed::kMaxDepth : localisation::kMaxDepth);
    const auto strategy = config.strategy.value_or(EvolutionStrategy::island(config.capacity));

    std::vector<feed::UserModel> users;
    if (is_feed) {
        if (config.users) {
            users = *config.users;
        } else {
            const auto prefs = heterogeneous_preferences();
            for (int k = 0; k < config.islands; ++k) {
                users.push_back(config.landscape == Landscape::Homogeneous
                                    ? feed::UserModel::tech_reader(catalog)
                                    : feed::UserModel::preferring(
                                          catalog, prefs[static_cast<std::size_t>(k) % prefs.size()]));
            }
        }
    }

    std::optional<HelperGuard> guard;
    if (!is_feed && config.helper) {
        guard = HelperGuard{
            [&prims](const ProgramTree& t) { return localisation::localisation_helper(t, prims); }, 64};
    }

    Dataset data;
    for (int m = 0; m < config.iterations; ++m) {
        IslandRunConfig run;
        run.policy = config.policy;
        run.generations = config.generations;
        for (int k = 0; k < config.islands; ++k) {
            const auto ku = static_cast<std::uint64_t>(k);
            const auto mu = static_cast<std::uint64_t>(m);
            IslandConfig ic;
            ic.prims = &prims;
            ic.max_depth = max_depth;
            ic.capacity = config.capacity;
            ic.strategy = strategy;
            ic.guard = guard;
            ic.seed = derive_seed(config.seed, mu, ku, kIslandStream);
            if (is_feed) {
                auto ev = std::make_shared<feed::FeedEvaluator>(
                    prims, catalog, users[static_cast<std::size_t>(k)],
                    derive_seed(config.seed, mu, ku, kUserStream));
                ic.evaluator = [ev](const ProgramTree& t) { return (*ev)(t); };
            } else {
                ic.evaluator = [&prims, &world](const ProgramTree& t) {
                    return localisation::evaluate_localisation(t, prims, world).fitness;
                };
            }
            run.islands.push_back(std::move(ic));
        }
        if (observer) {
            run.observer = [&observer, m](std::size_t island, const Population& pop) {
                observer(m, island, pop);
            };
        }

        IslandTrajectories traj;
        if (config.transport == TransportKind::Simulated) {
            SimulatedBus bus(static_cast<std::size_t>(config.islands), config.loss,
                             derive_seed(config.seed, static_cast<std::uint64_t>(m), 0, kBusStream));
            for (std::size_t k = 0; k < bus.size(); ++k) run.transports.push_back(&bus.endpoint(k));
            traj = run_islands(std::move(run));
        } else {
            std::vector<std::unique_ptr<UdpTransport>> sockets;
            for (int k = 0; k < config.islands; ++k) {
                sockets.push_back(std::make_unique<UdpTransport>(0, std::vector<UdpPeer>{}, "127.0.0.1"));
            }
            for (std::size_t k = 0; k < sockets.size(); ++k) {
                std::vector<UdpPeer> peers;
                for (std::size_t j = 0; j < sockets.size(); ++j) {
                    if (j != k) peers.push_back({"127.0.0.1", sockets[j]->port()});
                }
                sockets[k]->set_peers(std::move(peers));
            }
            traj.resize(sockets.size());
            std::vector<std::thread> threads;
            for (std::size_t k = 0; k < sockets.size(); ++k) {
                threads.emplace_back([&, k] {
                    traj[k] = run_island_async(std::move(run.islands[k]), run.policy, run.generations,
                                               sockets[k].get());
                });
            }
            for (auto& t : threads) t.join();
        }

        for (std::size_t k = 0; k < traj.size(); ++k) {
            for (const auto& r : traj[k]) data.rows.push_back(to_row(m, static_cast<int>(k), r));
        }
    }

    std::sort(data.rows.begin(), data.rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.iteration, a.generation, a.island) <
               std::tie(b.iteration, b.generation, b.island);
    });
    return data;
}

// ---------------------------------------------------------------------------
// Aggregates

std::vector<GenerationAggregate> aggregate(const Dataset& data) {
    std::map<int, std::vector<const Row*>> by_gen;
    for (const auto& r : data.rows) by_gen[r.generation].push_back(&r);

    auto moments = [](const std::vector<double>& v, double& mean, double& sd, double& se) {
        const auto n = static_cast<double>(v.size());
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        se = sd / std::sqrt(n);
    };

    std::vector<GenerationAggregate> out;
    for (const auto& [gen, rows] : by_gen) {
        GenerationAggregate a;
        a.generation = gen;
        a.samples = rows.size();
        std::vector<double> maxes, means;
        for (const Row* r : rows) {
            maxes.push_back(r->max_fitness);
            means.push_back(r->mean_fitness);
        }
        moments(maxes, a.max_mean, a.max_sd, a.max_se);
        moments(means, a.mean_mean, a.mean_sd, a.mean_se);
        out.push_back(a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

// RFC 4180: quote fields containing separators, quotes or line breaks.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    q += '"';
    return q;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

template <class T>
T parse_field(const std::string& s, std::size_t line_no) {
    T v{};
    std::istringstream in(s);
    in >> v;
    if (!in || !in.eof()) {
        throw UsageError("CSV line " + std::to_string(line_no) + ": bad value '" + s + "'");
    }
    return v;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw UsageError("CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

} // namespace

void write_csv(std::ostream& out, const Dataset& data) {
    out << kCsvHeader << "\r\n";
    for (const auto& r : data.rows) {
        out << r.iteration << ',' << r.generation << ',' << r.island << ','
            << csv_field(format_number(r.max_fitness)) << ','
            << csv_field(format_number(r.mean_fitness)) << ','
            << csv_field(format_number(r.mean_size)) << ','
            << csv_field(format_number(r.mean_depth)) << ',' << r.immigrants_admitted << ','
            << r.emigrants_sent << ',' << r.helper_rejections << "\r\n";
    }
}

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw UsageError("empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw UsageError("unexpected CSV header: " + line);
    Dataset d;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 10) {
            throw UsageError("CSV line " + std::to_string(line_no) + ": expected 10 fields");
        }
        Row r;
        r.iteration = parse_field<int>(f[0], line_no);
        r.generation = parse_field<int>(f[1], line_no);
        r.island = parse_field<int>(f[2], line_no);
        r.max_fitness = parse_double(f[3], line_no);
        r.mean_fitness = parse_double(f[4], line_no);
        r.mean_size = parse_double(f[5], line_no);
        r.mean_depth = parse_double(f[6], line_no);
        r.immigrants_admitted = parse_field<std::size_t>(f[7], line_no);
        r.emigrants_sent = parse_field<std::size_t>(f[8], line_no);
        r.helper_rejections = parse_field<std::size_t>(f[9], line_no);
        d.rows.push_back(r);
    }
    return d;
}

void write_summary_csv(std::ostream& out, const std::vector<GenerationAggregate>& summary) {
    out << kSummaryHeader << "\r\n";
    for (const auto& a : summary) {
        out << a.generation << ',' << a.samples << ',' << format_number(a.max_mean) << ','
            << format_number(a.max_sd) << ',' << format_number(a.max_se) << ','
            << format_number(a.mean_mean) << ',' << format_number(a.mean_sd) << ','
            << format_number(a.mean_se) << "\r\n";
    }
}

// ---------------------------------------------------------------------------
// Comparison

std::optional<int> generations_to_threshold(const std::vector<GenerationAggregate>& summary,
                                            double threshold) {
    for (const auto& a : summary) {
        if (a.max_mean >= threshold) return a.generation;
    }
    return std::nullopt;
}

Comparison compare_runs(const Dataset& baseline, const Dataset& treatment, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("threshold must lie in (0,1]");
    Comparison c;
    c.baseline_generation = generations_to_threshold(aggregate(baseline), threshold);
    c.treatment_generation = generations_to_threshold(aggregate(treatment), threshold);
    if (c.baseline_generation && c.treatment_generation) {
        const double b = *c.baseline_generation;
        const double t = *c.treatment_generation;
        if (b > 0.0) c.improvement = 1.0 - t / b;
        else if (t == 0.0) c.improvement = 0.0;
    }
    return c;
}

} // namespace islandgp::experiment
