#pragma once

#include "lanas/space.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>

namespace lanas {

struct measurement {
    encoding e;
    double metric = 0.0;
    bool valid = true;
    int step = 0;
};

// Query accounting shared by every searcher: total queries, and the number
// of distinct keys whose evaluation was valid.
class eval_ledger {
public:
    // returns true when the key is new and the evaluation valid
    bool record(const std::string& key, bool valid) {
        ++total_queries_;
        const bool fresh = seen_.insert(key).second;
        if (fresh && valid) ++unique_valid_;
        return fresh && valid;
    }
    bool seen(const std::string& key) const { return seen_.count(key) != 0; }
    std::uint64_t unique_valid() const { return unique_valid_; }
    std::uint64_t total_queries() const { return total_queries_; }
    const std::unordered_set<std::string>& seen_keys() const { return seen_; }

private:
    std::unordered_set<std::string> seen_;
    std::uint64_t unique_valid_ = 0;
    std::uint64_t total_queries_ = 0;
};

enum class missing_policy { floor_zero, error };

struct tabular_benchmark {
    search_space_spec space;
    // keyed by encoding_key; keeps the encoding for serialization
    std::map<std::string, std::pair<encoding, double>> rows;
    double v_star = 0.0;
    missing_policy missing = missing_policy::floor_zero;
};

// CSV with header d0,...,dK,metric
tabular_benchmark load_tabular(const std::string& path, const search_space_spec& space,
                               missing_policy missing = missing_policy::floor_zero);
// convenience for 26-column NASBench-style files (21 binary + 5 ternary + metric)
tabular_benchmark load_nasbench_like(const std::string& path,
                                     missing_policy missing = missing_policy::floor_zero);
void save_tabular(const tabular_benchmark& bench, const std::string& path);

measurement evaluate(const tabular_benchmark& bench, const encoding& e, eval_ledger& ledger);

// Which (kernel, channels) table the convnet code values refer to. The two
// builtin convnet spaces reuse overlapping numeric codes with different
// meanings, so the table is an explicit parameter.
enum class convnet_codebook { toy, appendix };

struct convnet_code {
    double code;
    int kernel;
    int channels;
};
const std::vector<convnet_code>& convnet_code_table(convnet_codebook book);
double convnet_pad_code();

// Deterministic stand-in for trained accuracy, in [0,1]:
//   0.5 * depth/slots
// + 0.4 * mean filter-count rank of the non-empty layers (normalized)
// + 0.1 * mean kernel preference (3x3 best, normalized)
// The all-empty encoding scores 0. Unique argmax: deepest net, max
// filters, all 3x3 kernels.
double synthetic_convnet_metric(const encoding& e, convnet_codebook book);

// f(x,y) = -(y+47) sin(sqrt|x/2+y+47|) - x sin(sqrt|x-(y+47)|), minimized in
// the usual formulation; searchers maximize -f.
double eggholder(const encoding& e);

// Best -f on a 2049x2049 grid over [-512,512]^2; the desk-scale stand-in
// for the analytic optimum. Cached after the first call.
double eggholder_grid_v_star();

// Uniform objective interface for all searchers: metric + validity.
using objective_fn = std::function<std::pair<double, bool>(const encoding&)>;

struct objective {
    objective_fn fn;
    std::optional<double> v_star;  // known optimum of the maximized metric
};

objective make_synthetic_objective(convnet_codebook book);
objective make_tabular_objective(const tabular_benchmark& bench);  // bench must outlive it
objective make_eggholder_objective();                              // maximizes -f

}  // namespace lanas
