#pragma once

#include "lanas/dataset.hpp"
#include "lanas/space.hpp"

#include <json.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace lanas {

struct linear_model {
    Eigen::VectorXd w;
    double b = 0.0;
};

struct constraint {
    enum class dir { geq, lt };
    Eigen::VectorXd w;
    double b = 0.0;
    double threshold = 0.0;
    dir direction = dir::geq;
};

bool satisfies(const std::vector<constraint>& constraints, const encoding& e);

// Ridge least squares of metric on encoding (bias unpenalized). Fewer than
// two samples or an exactly degenerate design falls back to w = 0,
// b = mean(metric) (b = 0 when empty).
linear_model fit_node_regressor(const std::vector<std::pair<encoding, double>>& samples,
                                double lambda);
linear_model fit_node_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

// arithmetic mean of the metrics; 0 on empty input
double node_threshold(const std::vector<double>& metrics);

struct tree_node {
    int id = 0;
    int depth = 0;
    linear_model model;
    double threshold = 0.0;
    bool trained = false;  // false = pass-through: no constraint, route left
    std::int64_t n = 0;
    double v_sum = 0.0;
    std::vector<int> sample_ids;
    int left = -1;
    int right = -1;
};

// Complete binary partition tree of the given height: 2^h leaves, the left
// child of every split holds the predicted-good half.
class la_tree {
public:
    la_tree(int height, int dims, double ridge = 1e-6, int min_fit = 2);

    int height() const { return height_; }
    int dims() const { return dims_; }
    double ridge() const { return ridge_; }
    int min_fit() const { return min_fit_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    int leaf_count() const { return 1 << height_; }
    bool is_leaf(int id) const { return nodes_[id].left < 0; }
    const tree_node& node(int id) const { return nodes_[id]; }
    // position of a leaf counted from the left edge, 0 = leftmost
    int leaf_index(int leaf_id) const { return leaf_id - (leaf_count() - 1); }
    int leaf_id_at(int index) const { return index + leaf_count() - 1; }

    std::vector<measurement>& store() { return store_; }
    const std::vector<measurement>& store() const { return store_; }

    // Top-down refit: per internal node fit the regressor on its routed
    // samples, set threshold = mean metric, send w*a+b >= threshold left.
    // Nodes with fewer than min_fit samples become pass-through (all left).
    void learn();

    // Reset n/v_sum everywhere and replay the store: every node on a
    // sample's path gets n += 1, v_sum += metric.
    void redistribute();

    // (leaf_id, path of node ids root..leaf)
    std::pair<int, std::vector<int>> route(const encoding& e) const;

    std::vector<constraint> get_constraints(const std::vector<int>& path) const;

    // Append m to the store and update statistics along the given path
    // (which must end at leaf_id).
    void back_propagate(const std::vector<int>& path, int leaf_id, const measurement& m);

    bool learned() const { return learned_; }

    friend nlohmann::json tree_to_json(const la_tree& tree, bool include_samples);
    friend la_tree tree_from_json(const nlohmann::json& j);

private:
    bool go_left(const tree_node& nd, const encoding& e) const;

    int height_;
    int dims_;
    double ridge_;
    int min_fit_;
    bool learned_ = false;
    std::vector<tree_node> nodes_;
    std::vector<measurement> store_;
};

// closed form of the leftmost-leaf occupancy bound
double leftmost_bound_value(double delta_max, std::int64_t n_total, int height);

struct bound_report {
    std::vector<double> per_node_delta;  // leftmost-path internal nodes, root first
    double delta_max = 0.0;
    double bound = 0.0;
    std::int64_t leftmost_count = 0;
    std::int64_t n_total = 0;
    bool within = true;
};

// Diagnostic only: per leftmost-path node, delta = #samples with metric
// strictly between that node's metric mean and median.
bound_report leftmost_bound_diagnostic(const la_tree& tree);

nlohmann::json tree_to_json(const la_tree& tree, bool include_samples = false);
la_tree tree_from_json(const nlohmann::json& j);

}  // namespace lanas
