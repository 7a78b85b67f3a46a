#pragma once

#include "lanas/baselines.hpp"
#include "lanas/dataset.hpp"
#include "lanas/latree.hpp"
#include "lanas/search.hpp"
#include "lanas/space.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lanas {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct experiment_config {
    std::string task;       // convnet_toy | convnet_appendix | tabular:<path> | eggholder
    std::string algorithm;  // lanas | random | re | mcts_sequential | mcts_global
    std::int64_t budget = 0;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "out";
    search_config lanas;  // height/selects/init/c/sampler/dedup/... per run
    int re_population = 100;
    int re_tournament = 10;
    std::optional<double> target;      // numeric early stop
    bool target_auto = false;          // "target": "auto" -> stop at v_star
    std::string tabular_space = "nasbench_like";  // space for tabular:<path>
    std::vector<std::int64_t> kl_checkpoints;     // empty -> {init, 2 init, budget}
    std::optional<std::string> ablation_axis;     // height|selects|c|init|sampler
    std::vector<nlohmann::json> ablation_values;
    bool write_tree_snapshot = true;  // final tree per seed (lanas only)
};

experiment_config experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const experiment_config& cfg);

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t config_hash(const experiment_config& cfg);

// Builds the space + objective pair for a task string.
struct task_setup {
    search_space_spec space;
    objective obj;
    std::shared_ptr<tabular_benchmark> bench;  // kept alive for tabular tasks
};
task_setup make_task(const experiment_config& cfg);

// One seeded run of cfg.algorithm; the experiment-level entry point used by
// run_experiment and the tests.
search_trace run_single(const experiment_config& cfg, const task_setup& task, std::uint64_t seed,
                        la_tree* tree_out = nullptr);

// One trace file per seed plus manifest.json; with ablation_axis set, one
// subdirectory per axis value (same seeds in each: paired comparisons).
void run_experiment(const experiment_config& cfg);

void write_trace(const search_trace& trace, const std::string& path);
search_trace read_trace(const std::string& path);

// JSON-lines schema check. Header lines need config + seed; entry lines need
// exactly {step, encoding, metric, valid, best_so_far, unique_valid,
// fallback} with the right types.
bool validate_trace_line(const nlohmann::json& line, bool is_header, std::string* why = nullptr);
// returns an error description, or nullopt when every line validates
std::optional<std::string> validate_trace_file(const std::string& path);

// linear-interpolation percentile of an unsorted sample, q in [0,1]
double percentile(std::vector<double> values, double q);

struct regret_series {
    std::vector<double> mean, p25, p75;  // index i = regret after i+1 unique valid samples
};
regret_series regret_curve(const std::vector<search_trace>& traces, double v_star);

// best-so-far per trace at exactly `budget` unique valid samples
struct cdf_result {
    std::vector<double> values;     // sorted v+
    std::vector<double> fractions;  // cumulative, ends at 1
    std::vector<std::size_t> short_traces;  // indices of traces that never reach budget
};
cdf_result cdf_at_budget(const std::vector<search_trace>& traces, std::int64_t budget);

struct reference_tree {
    la_tree tree;
    int bins = 30;
    double lo = 0.0, hi = 1.0;
    std::vector<Eigen::VectorXd> leaf_hist;  // normalized; zero vector for empty leaves
    std::vector<double> leaf_mean;
    std::vector<std::int64_t> leaf_count;
};

// Trains on the complete dataset (all samples become the store) and freezes
// per-leaf metric histograms.
reference_tree build_reference_tree(const search_space_spec& space,
                                    const std::vector<std::pair<encoding, double>>& dataset,
                                    int height, int bins = 30,
                                    std::optional<std::pair<double, double>> range = std::nullopt);
// convenience: enumerate a finite space through an objective
std::vector<std::pair<encoding, double>> enumerate_dataset(const search_space_spec& space,
                                                           const objective& obj);

Eigen::VectorXd smooth_normalize(Eigen::VectorXd hist, double eps = 1e-6);
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct kl_checkpoint_result {
    std::int64_t checkpoint = 0;
    std::vector<double> leaf_kl;
    double leaf_avg = 0.0;
    double vbar_delta_leaf = 0.0;    // mean over occupied leaves of v_bar - v_bar*
    double vbar_delta_global = 0.0;  // overall sample mean minus reference mean
};
std::vector<kl_checkpoint_result> kl_dynamics(const search_trace& trace,
                                              const reference_tree& ref,
                                              const std::vector<std::int64_t>& checkpoints);

// Grid of leaf assignments for a 2-D continuous space plus the leftmost
// path's constraints; value = objective at the cell center when provided.
nlohmann::json partition_export(const la_tree& tree, const search_space_spec& space, int grid,
                                const objective* value = nullptr);

// analysis entry points backing the CLI; all read manifest.json in dir
void analyze_regret(const std::string& dir);
void analyze_cdf(const std::string& dir);
void analyze_kl(const std::string& dir);
void analyze_ablation(const std::string& dir);

nlohmann::json spaces_list_json();

}  // namespace lanas
