// islandgp: run island-model GP experiments and compare their outputs.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "islandgp/errors.hpp"
#include "islandgp/experiment.hpp"

using namespace islandgp;
using namespace islandgp::experiment;

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    return read_csv(in);
}

struct RunArgs {
    std::string config_path, strategy_path, catalog_path, world_path;
    std::string app, mode, landscape, transport;
    int islands{0}, generations{0}, iterations{0}, interval{0};
    std::size_t capacity{0};
    double rate{0.0}, loss{0.0};
    std::uint64_t seed{0};
    bool helper{true};
    std::string out{"-"}, summary;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Island-model genetic programming experiments"};
    cli.require_subcommand(1);

    RunArgs a;
    auto* run = cli.add_subcommand("run", "Run M seeded experiments and write a per-generation CSV");
    run->add_option("--config", a.config_path, "JSON experiment config; flags override it");
    auto* o_app = run->add_option("--app", a.app, "Application")
                      ->check(CLI::IsMember({"feed", "localisation"}));
    auto* o_islands = run->add_option("--islands", a.islands, "Number of islands");
    auto* o_capacity = run->add_option("--capacity", a.capacity, "Population size per island");
    auto* o_generations = run->add_option("--generations", a.generations, "Generations per run");
    auto* o_iterations = run->add_option("--iterations", a.iterations, "Independent seeded runs");
    auto* o_interval = run->add_option("--interval", a.interval, "Generations between events");
    auto* o_rate = run->add_option("--rate", a.rate, "Fraction of capacity moved per event");
    auto* o_mode = run->add_option("--mode", a.mode, "Event kind")
                       ->check(CLI::IsMember({"migrate", "random", "none"}));
    auto* o_landscape = run->add_option("--landscape", a.landscape, "Fitness landscape (feed)")
                            ->check(CLI::IsMember({"homo", "hetero"}));
    auto* o_seed = run->add_option("--seed", a.seed, "Base seed");
    auto* o_transport = run->add_option("--transport", a.transport, "Migration transport")
                            ->check(CLI::IsMember({"sim", "udp"}));
    auto* o_loss = run->add_option("--loss", a.loss, "Datagram loss probability (sim)");
    auto* o_helper = run->add_option("--helper", a.helper, "Localisation validity helper (true/false)");
    run->add_option("--strategy", a.strategy_path, "Evolution strategy JSON");
    run->add_option("--catalog", a.catalog_path, "Feed catalog JSON");
    run->add_option("--world", a.world_path, "Localisation world JSON");
    run->add_option("--out", a.out, "Output CSV ('-' for stdout)");
    run->add_option("--summary", a.summary, "Also write per-generation aggregates here");

    std::string baseline_path, treatment_path;
    double threshold = 0.0;
    auto* cmp = cli.add_subcommand("compare", "Generations-to-threshold of two runs");
    cmp->add_option("--baseline", baseline_path)->required();
    cmp->add_option("--treatment", treatment_path)->required();
    cmp->add_option("--threshold", threshold)->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e);
    }

    try {
        if (*run) {
            ExperimentConfig cfg;
            if (!a.config_path.empty()) cfg = ExperimentConfig::from_json(load_json(a.config_path));
            if (*o_app) cfg.app = a.app == "feed" ? App::Feed : App::Localisation;
            if (*o_islands) cfg.islands = a.islands;
            if (*o_capacity) cfg.capacity = a.capacity;
            if (*o_generations) cfg.generations = a.generations;
            if (*o_iterations) cfg.iterations = a.iterations;
            if (*o_interval) cfg.policy.interval = a.interval;
            if (*o_rate) cfg.policy.rate = a.rate;
            if (*o_mode) {
                static const std::map<std::string, MigrationPolicy::Mode> modes{
                    {"migrate", MigrationPolicy::Mode::Migrate},
                    {"random", MigrationPolicy::Mode::RandomInject},
                    {"none", MigrationPolicy::Mode::None}};
                cfg.policy.mode = modes.at(a.mode);
            }
            if (*o_landscape) {
                cfg.landscape = a.landscape == "homo" ? Landscape::Homogeneous : Landscape::Heterogeneous;
            }
            if (*o_seed) cfg.seed = a.seed;
            if (*o_transport) cfg.transport = a.transport == "sim" ? TransportKind::Simulated : TransportKind::Udp;
            if (*o_loss) cfg.loss = a.loss;
            if (*o_helper) cfg.helper = a.helper;
            if (!a.strategy_path.empty()) cfg.strategy = EvolutionStrategy::load(a.strategy_path);
            if (!a.catalog_path.empty()) cfg.catalog = feed::FeedCatalog::from_json(load_json(a.catalog_path));
            if (!a.world_path.empty()) cfg.world = localisation::World::from_json(load_json(a.world_path));

            const Dataset data = run_experiment(cfg);
            if (a.out == "-") {
                write_csv(std::cout, data);
            } else {
                std::ofstream out(a.out);
                if (!out) throw UsageError("cannot write " + a.out);
                write_csv(out, data);
            }
            if (!a.summary.empty()) {
                std::ofstream out(a.summary);
                if (!out) throw UsageError("cannot write " + a.summary);
                write_summary_csv(out, aggregate(data));
            }
        } else if (*cmp) {
            const auto c = compare_runs(load_csv(baseline_path), load_csv(treatment_path), threshold);
            auto show = [](const std::optional<int>& g) {
                return g ? std::to_string(*g) : std::string("not reached");
            };
            std::cout << "baseline_generation: " << show(c.baseline_generation) << '\n'
                      << "treatment_generation: " << show(c.treatment_generation) << '\n'
                      << "improvement: "
                      << (c.improvement ? format_number(*c.improvement) : std::string("n/a")) << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
