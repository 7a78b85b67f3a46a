#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lanas {

// A candidate point: fixed-length real vector, one component per dimension.
using encoding = Eigen::VectorXd;
using rng_t = std::mt19937_64;

enum class dim_kind { categorical, continuous };

struct dimension {
    dim_kind kind = dim_kind::categorical;
    std::vector<double> codes;  // categorical: ordered, distinct numeric codes
    double lo = 0.0;            // continuous interval
    double hi = 0.0;

    static dimension categorical(std::vector<double> codes);
    static dimension continuous(double lo, double hi);
};

// Search-space description. When pad_code is set the space uses the
// prefix-padding convention: a slot equal to pad_code is "empty" and no
// real value may appear after an empty slot; at least one slot must be real.
struct search_space_spec {
    std::string name;
    std::vector<dimension> dims;
    std::optional<std::pair<double, double>> metric_range_hint;
    std::optional<double> pad_code;

    int dim_count() const { return static_cast<int>(dims.size()); }
    bool finite() const;
    bool padded() const { return pad_code.has_value(); }
};

enum class builtin_space { convnet_toy, convnet_appendix, nasbench_like, eggholder2d };

search_space_spec make_builtin_space(builtin_space which);
search_space_spec make_builtin_space(const std::string& name);
std::vector<std::string> builtin_space_names();

// Count of valid encodings; nullopt when any dimension is continuous.
std::optional<std::uint64_t> space_size(const search_space_spec& space);

bool is_valid(const search_space_spec& space, const encoding& e);

// Uniform over valid encodings. For prefix-padded spaces the depth is drawn
// with probability proportional to the number of encodings at that depth, so
// the draw is uniform over the valid set.
encoding sample_uniform(const search_space_spec& space, rng_t& rng);

// Resamples exactly one uniformly chosen dimension to a different value
// (categorical) or a fresh uniform draw (continuous), then repairs the
// prefix-padding convention: mutating a slot to the pad truncates later
// slots; mutating a padded slot to a real code fills the gap before it.
encoding mutate(const search_space_spec& space, const encoding& e, rng_t& rng);

// All valid encodings in a deterministic order (padded spaces: by depth
// ascending, lexicographic within a depth). Throws when the space is
// continuous or larger than max_count.
std::vector<encoding> enumerate_space(const search_space_spec& space,
                                      std::uint64_t max_count = (1ull << 22));

// Canonical map/set key: components rounded to 6 decimals, joined.
std::string encoding_key(const encoding& e);

nlohmann::json space_to_json(const search_space_spec& space);
search_space_spec space_from_json(const nlohmann::json& j);

}  // namespace lanas
