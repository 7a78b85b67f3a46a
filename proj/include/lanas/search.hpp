#pragma once

#include "lanas/dataset.hpp"
#include "lanas/latree.hpp"
#include "lanas/space.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <unordered_set>
#include <vector>

namespace lanas {

enum class sampler_kind { random, bayes };

struct search_config {
    int height = 8;
    int selects_per_relearn = 50;
    int init_samples = 200;
    std::optional<double> c;  // default 0.1, or 0.1 x metric_range_hint span
    sampler_kind sampler = sampler_kind::random;
    bool dedup = true;
    std::int64_t budget = 0;  // unique valid samples
    std::uint64_t seed = 0;
    int max_reject_tries = 10000;
    double ridge = 1e-6;
    int min_fit = 2;
    std::optional<double> target;  // optional early stop on best_so_far
    int surrogate_members = 10;
    int bayes_pool = 1000;
};

double resolve_c(const std::optional<double>& c, const search_space_spec& space);

nlohmann::json search_config_to_json(const search_config& cfg);
search_config search_config_from_json(const nlohmann::json& j);

struct trace_entry {
    int step = 0;
    encoding e;
    double metric = 0.0;
    bool valid = true;
    std::optional<double> best_so_far;  // empty until the first valid eval
    std::uint64_t unique_valid = 0;
    bool fallback = false;
};

struct search_trace {
    nlohmann::json header;  // algorithm, space, seed, config
    std::vector<trace_entry> entries;
};

// Alg.-style UCB: +inf when the child is unvisited, else mean plus
// 2c*sqrt(2 ln(n_curt) / n_next).
double get_ucb(double v_sum_next, std::int64_t n_next, std::int64_t n_curt, double c);

// Descend from the root towards the larger child UCB (ties go left).
// Returns (leaf_id, path including the leaf).
std::pair<int, std::vector<int>> ucb_select(const la_tree& tree, double c);

struct proposal {
    encoding e;
    bool fallback = false;  // retry cap hit; e minimizes constraint violations
    int tries = 0;
};

// Rejection sampling inside the partition. exclude (optional) drops already
// seen keys. Returns nullopt only when every candidate within the retry
// budget was excluded, i.e. the caller should fall back to enumeration.
std::optional<proposal> sample_random_in_partition(
    const search_space_spec& space, const std::vector<constraint>& constraints, rng_t& rng,
    int max_tries, const std::unordered_set<std::string>* exclude = nullptr);

struct surrogate_ensemble {
    std::vector<linear_model> members;
    // ensemble mean and standard deviation at e
    std::pair<double, double> predict(const encoding& e) const;
};

// Ridge linear models fit on bootstrap resamples of the store.
surrogate_ensemble fit_surrogate(const std::vector<measurement>& store, int members, double ridge,
                                 rng_t& rng);

// EI = (mu - v_best) Phi(z) + sigma phi(z), z = (mu - v_best)/sigma;
// max(0, mu - v_best) when sigma = 0.
double expected_improvement(double mu, double sigma, double v_best);

struct bayes_params {
    int pool_size = 1000;
    int members = 10;
    double ridge = 1e-6;
    int max_tries = 10000;
};

struct bayes_debug {
    std::vector<encoding> pool;
    std::vector<double> mu, sigma, ei;
    int chosen = -1;
};

// Draws a candidate pool inside the partition and returns the EI argmax
// under a bootstrap surrogate; degrades to plain rejection sampling when the
// ensemble cannot be fit.
std::optional<proposal> sample_bayes_in_partition(
    const search_space_spec& space, const std::vector<constraint>& constraints,
    const std::vector<measurement>& store, rng_t& rng, const bayes_params& params,
    const std::unordered_set<std::string>* exclude = nullptr, bayes_debug* debug = nullptr);

// Uniform draw avoiding exclude; after max_tries switches to a deterministic
// scan of the (cached) enumeration when the space is finite. nullopt = space
// exhausted (or not enumerable).
std::optional<encoding> propose_uniform_unseen(const search_space_spec& space, rng_t& rng,
                                               int max_tries,
                                               const std::unordered_set<std::string>& exclude,
                                               std::optional<std::vector<encoding>>& enum_cache);

struct search_hooks {
    std::function<void(const la_tree& tree, int relearn_index)> after_relearn;
};

// Latent-action MCTS: uniform init, then cycles of (learn + redistribute)
// followed by selects_per_relearn rounds of UCB select / in-partition
// proposal / evaluate / back-propagate. Stops at budget unique valid
// samples, on the optional target, when the space is exhausted, or at the
// 50x budget total-query guard.
search_trace lanas_search(const search_config& cfg, const objective& obj,
                          const search_space_spec& space, eval_ledger* ledger_out = nullptr,
                          const search_hooks* hooks = nullptr, la_tree* tree_out = nullptr);

}  // namespace lanas
