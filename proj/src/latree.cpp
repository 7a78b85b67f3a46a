#include "lanas/latree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lanas {

bool satisfies(const std::vector<constraint>& constraints, const encoding& e) {
    for (const auto& c : constraints) {
        const double score = c.w.dot(e) + c.b;
        if (c.direction == constraint::dir::geq ? score < c.threshold : score >= c.threshold)
            return false;
    }
    return true;
}

linear_model fit_node_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double lambda) {
    if (lambda < 0) throw std::invalid_argument("ridge lambda must be >= 0");
    const auto n = X.rows();
    const auto d = X.cols();
    linear_model m;
    m.w = Eigen::VectorXd::Zero(d);
    if (n == 0) return m;

    auto mean_fallback = [&] {
        m.w.setZero();
        m.b = y.mean();
        return m;
    };
    if (n < 2) return mean_fallback();
    // exactly duplicated rows leave nothing for w to explain
    bool all_same = true;
    for (Eigen::Index i = 1; i < n && all_same; ++i) all_same = X.row(i) == X.row(0);
    if (all_same) return mean_fallback();

    // normal equations for [w; b] with the bias left out of the penalty
    Eigen::MatrixXd A(d + 1, d + 1);
    A.topLeftCorner(d, d) = X.transpose() * X + lambda * Eigen::MatrixXd::Identity(d, d);
    A.topRightCorner(d, 1) = X.colwise().sum().transpose();
    A.bottomLeftCorner(1, d) = X.colwise().sum();
    A(d, d) = static_cast<double>(n);
    Eigen::VectorXd rhs(d + 1);
    rhs.head(d) = X.transpose() * y;
    rhs(d) = y.sum();

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) return mean_fallback();
    const Eigen::VectorXd sol = lu.solve(rhs);
    m.w = sol.head(d);
    m.b = sol(d);
    return m;
}

linear_model fit_node_regressor(const std::vector<std::pair<encoding, double>>& samples,
                                double lambda) {
    if (samples.empty()) return fit_node_regressor(Eigen::MatrixXd(0, 0), Eigen::VectorXd(), lambda);
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto d = samples.front().first.size();
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.row(i) = samples[i].first.transpose();
        y(i) = samples[i].second;
    }
    return fit_node_regressor(X, y, lambda);
}

double node_threshold(const std::vector<double>& metrics) {
    if (metrics.empty()) return 0.0;
    return std::accumulate(metrics.begin(), metrics.end(), 0.0) /
           static_cast<double>(metrics.size());
}

la_tree::la_tree(int height, int dims, double ridge, int min_fit)
    : height_(height), dims_(dims), ridge_(ridge), min_fit_(min_fit) {
    if (height < 1) throw std::invalid_argument("tree height must be >= 1");
    if (dims < 1) throw std::invalid_argument("tree needs >= 1 dims");
    if (ridge < 0) throw std::invalid_argument("ridge must be >= 0");
    const int count = (1 << (height + 1)) - 1;
    nodes_.resize(count);
    for (int id = 0; id < count; ++id) {
        auto& nd = nodes_[id];
        nd.id = id;
        nd.depth = std::bit_width(static_cast<unsigned>(id + 1)) - 1;
        const int l = 2 * id + 1, r = 2 * id + 2;
        nd.left = l < count ? l : -1;
        nd.right = r < count ? r : -1;
        nd.model.w = Eigen::VectorXd::Zero(dims);
    }
}

bool la_tree::go_left(const tree_node& nd, const encoding& e) const {
    if (!nd.trained) return true;
    return nd.model.w.dot(e) + nd.model.b >= nd.threshold;
}

void la_tree::learn() {
    if (store_.empty()) throw std::runtime_error("learn: sample store is empty");
    for (auto& nd : nodes_) {
        nd.sample_ids.clear();
        nd.trained = false;
        nd.threshold = 0.0;
        nd.model.w.setZero();
        nd.model.b = 0.0;
    }
    auto& root = nodes_[0];
    root.sample_ids.resize(store_.size());
    std::iota(root.sample_ids.begin(), root.sample_ids.end(), 0);

    for (int id = 0; id < node_count(); ++id) {
        auto& nd = nodes_[id];
        if (is_leaf(id)) continue;
        auto& left = nodes_[nd.left];
        auto& right = nodes_[nd.right];
        if (static_cast<int>(nd.sample_ids.size()) < min_fit_) {
            left.sample_ids = nd.sample_ids;  // pass-through
            continue;
        }
        const auto n = static_cast<Eigen::Index>(nd.sample_ids.size());
        Eigen::MatrixXd X(n, dims_);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& m = store_[nd.sample_ids[i]];
            X.row(i) = m.e.transpose();
            y(i) = m.metric;
        }
        nd.model = fit_node_regressor(X, y, ridge_);
        nd.threshold = y.mean();
        nd.trained = true;
        for (int sid : nd.sample_ids) {
            if (go_left(nd, store_[sid].e))
                left.sample_ids.push_back(sid);
            else
                right.sample_ids.push_back(sid);
        }
    }
    learned_ = true;
}

void la_tree::redistribute() {
    for (auto& nd : nodes_) {
        nd.n = 0;
        nd.v_sum = 0.0;
        nd.sample_ids.clear();
    }
    for (int sid = 0; sid < static_cast<int>(store_.size()); ++sid) {
        const auto& m = store_[sid];
        int id = 0;
        while (true) {
            auto& nd = nodes_[id];
            nd.n += 1;
            nd.v_sum += m.metric;
            nd.sample_ids.push_back(sid);
            if (is_leaf(id)) break;
            id = go_left(nd, m.e) ? nd.left : nd.right;
        }
    }
}

std::pair<int, std::vector<int>> la_tree::route(const encoding& e) const {
    if (!learned_) throw std::runtime_error("route: tree not learned");
    std::vector<int> path;
    int id = 0;
    while (true) {
        path.push_back(id);
        const auto& nd = nodes_[id];
        if (is_leaf(id)) break;
        id = go_left(nd, e) ? nd.left : nd.right;
    }
    return {path.back(), path};
}

std::vector<constraint> la_tree::get_constraints(const std::vector<int>& path) const {
    std::vector<constraint> out;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto& nd = nodes_[path[i]];
        if (!nd.trained) continue;  // pass-through adds no constraint
        constraint c;
        c.w = nd.model.w;
        c.b = nd.model.b;
        c.threshold = nd.threshold;
        c.direction = path[i + 1] == nd.left ? constraint::dir::geq : constraint::dir::lt;
        out.push_back(std::move(c));
    }
    return out;
}

void la_tree::back_propagate(const std::vector<int>& path, int leaf_id, const measurement& m) {
    if (path.empty() || path.back() != leaf_id)
        throw std::invalid_argument("back_propagate: path must end at leaf_id");
    const int sid = static_cast<int>(store_.size());
    store_.push_back(m);
    for (int id : path) {
        auto& nd = nodes_[id];
        nd.n += 1;
        nd.v_sum += m.metric;
        nd.sample_ids.push_back(sid);
    }
}

double leftmost_bound_value(double delta_max, std::int64_t n_total, int height) {
    return 2.0 * delta_max * (1.0 - std::pow(2.0, -height)) +
           static_cast<double>(n_total) / std::pow(2.0, height);
}

namespace {

double median_of(std::vector<double> v) {
    const auto n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

bound_report leftmost_bound_diagnostic(const la_tree& tree) {
    bound_report rep;
    rep.n_total = static_cast<std::int64_t>(tree.store().size());
    int id = 0;
    while (!tree.is_leaf(id)) {
        const auto& nd = tree.node(id);
        std::vector<double> metrics;
        metrics.reserve(nd.sample_ids.size());
        for (int sid : nd.sample_ids) metrics.push_back(tree.store()[sid].metric);
        double delta = 0.0;
        if (!metrics.empty()) {
            const double mean = node_threshold(metrics);
            const double med = median_of(metrics);
            const double lo = std::min(mean, med), hi = std::max(mean, med);
            for (double v : metrics)
                if (v > lo && v < hi) delta += 1.0;
        }
        rep.per_node_delta.push_back(delta);
        rep.delta_max = std::max(rep.delta_max, delta);
        id = tree.node(id).left;
    }
    rep.leftmost_count = static_cast<std::int64_t>(tree.node(id).sample_ids.size());
    rep.bound = leftmost_bound_value(rep.delta_max, rep.n_total, tree.height());
    rep.within = static_cast<double>(rep.leftmost_count) <= rep.bound;
    return rep;
}

nlohmann::json tree_to_json(const la_tree& tree, bool include_samples) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes_) {
        nlohmann::json jn{{"id", nd.id},
                          {"depth", nd.depth},
                          {"w", std::vector<double>(nd.model.w.data(),
                                                    nd.model.w.data() + nd.model.w.size())},
                          {"b", nd.model.b},
                          {"threshold", nd.threshold},
                          {"trained", nd.trained},
                          {"n", nd.n},
                          {"v_sum", nd.v_sum},
                          {"left", nd.left},
                          {"right", nd.right}};
        nodes.push_back(std::move(jn));
    }
    nlohmann::json j{{"height", tree.height_}, {"dims", tree.dims_},   {"ridge", tree.ridge_},
                     {"min_fit", tree.min_fit_}, {"learned", tree.learned_}, {"nodes", nodes}};
    if (include_samples) {
        nlohmann::json samples = nlohmann::json::array();
        for (const auto& m : tree.store_) {
            samples.push_back({{"encoding", std::vector<double>(m.e.data(), m.e.data() + m.e.size())},
                               {"metric", m.metric},
                               {"valid", m.valid},
                               {"step", m.step}});
        }
        j["samples"] = std::move(samples);
    }
    return j;
}

la_tree tree_from_json(const nlohmann::json& j) {
    la_tree tree(j.at("height").get<int>(), j.at("dims").get<int>(), j.at("ridge").get<double>(),
                 j.at("min_fit").get<int>());
    tree.learned_ = j.at("learned").get<bool>();
    const auto& nodes = j.at("nodes");
    if (static_cast<int>(nodes.size()) != tree.node_count())
        throw std::runtime_error("tree snapshot: node count mismatch");
    for (const auto& jn : nodes) {
        auto& nd = tree.nodes_[jn.at("id").get<int>()];
        const auto w = jn.at("w").get<std::vector<double>>();
        nd.model.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        nd.model.b = jn.at("b").get<double>();
        nd.threshold = jn.at("threshold").get<double>();
        nd.trained = jn.at("trained").get<bool>();
        nd.n = jn.at("n").get<std::int64_t>();
        nd.v_sum = jn.at("v_sum").get<double>();
    }
    if (j.contains("samples")) {
        for (const auto& js : j.at("samples")) {
            measurement m;
            const auto e = js.at("encoding").get<std::vector<double>>();
            m.e = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
            m.metric = js.at("metric").get<double>();
            m.valid = js.at("valid").get<bool>();
            m.step = js.at("step").get<int>();
            tree.store_.push_back(std::move(m));
        }
        tree.redistribute();
    }
    return tree;
}

}  // namespace lanas
