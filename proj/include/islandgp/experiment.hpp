#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "islandgp/feed.hpp"
#include "islandgp/island.hpp"
#include "islandgp/localisation.hpp"

namespace islandgp::experiment {

enum class App { Feed, Localisation };
enum class Landscape { Homogeneous, Heterogeneous };
enum class TransportKind { Simulated, Udp };

struct ExperimentConfig {
    App app{App::Feed};
    int islands{2};
    std::size_t capacity{10};
    std::optional<EvolutionStrategy> strategy; // default: island strategy sized to capacity
    MigrationPolicy policy;
    int generations{20};
    int iterations{15};
    std::uint64_t seed{1};
    Landscape landscape{Landscape::Homogeneous};
    TransportKind transport{TransportKind::Simulated};
    double loss{0.0};
    bool helper{true};                // localisation only
    std::optional<int> max_depth;     // default per app
    std::optional<feed::FeedCatalog> catalog;
    std::optional<std::vector<feed::UserModel>> users; // one per island, overrides landscape
    std::optional<localisation::World> world;

    /// Throws UsageError describing the first problem.
    void check() const;

    static ExperimentConfig from_json(const nlohmann::json& doc);
};

/// Island-local preferences for the two-island heterogeneous feed landscape.
std::vector<std::vector<std::string>> heterogeneous_preferences();

struct Row {
    int iteration{0};
    int generation{0}; // 0-based
    int island{0};
    double max_fitness{0.0};
    double mean_fitness{0.0};
    double mean_size{0.0};
    double mean_depth{0.0};
    std::size_t immigrants_admitted{0};
    std::size_t emigrants_sent{0};
    std::size_t helper_rejections{0};

    friend bool operator==(const Row&, const Row&) = default;
};

struct Dataset {
    std::vector<Row> rows;
};

struct GenerationAggregate {
    int generation{0};
    std::size_t samples{0};
    double max_mean{0.0}, max_sd{0.0}, max_se{0.0};
    double mean_mean{0.0}, mean_sd{0.0}, mean_se{0.0};
};

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kCsvHeader =
    "iteration,generation,island,max_fitness,mean_fitness,mean_size,mean_depth,"
    "immigrants_admitted,emigrants_sent,helper_rejections";
inline constexpr const char* kSummaryHeader =
    "generation,samples,max_fitness_mean,max_fitness_sd,max_fitness_se,"
    "mean_fitness_mean,mean_fitness_sd,mean_fitness_se";

/// Observer invoked per (iteration, island, generation) in simulated mode.
using RunObserver = std::function<void(int iteration, std::size_t island, const Population&)>;

/// M seeded runs; rows sorted by (iteration, generation, island).
Dataset run_experiment(const ExperimentConfig& config, const RunObserver& observer = {});

/// Per generation, pooled over iterations and islands.
std::vector<GenerationAggregate> aggregate(const Dataset& data);

void write_csv(std::ostream& out, const Dataset& data);
Dataset read_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<GenerationAggregate>& summary);

/// First generation whose mean (over iterations) max fitness reaches `threshold`.
std::optional<int> generations_to_threshold(const std::vector<GenerationAggregate>& summary,
                                            double threshold);

struct Comparison {
    std::optional<int> baseline_generation;
    std::optional<int> treatment_generation;
    std::optional<double> improvement; // 1 - treatment / baseline
};

Comparison compare_runs(const Dataset& baseline, const Dataset& treatment, double threshold);

} // namespace islandgp::experiment
