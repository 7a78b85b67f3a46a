#include "lanas/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lanas {

double resolve_c(const std::optional<double>& c, const search_space_spec& space) {
    if (c) return *c;
    if (space.metric_range_hint)
        return 0.1 * (space.metric_range_hint->second - space.metric_range_hint->first);
    return 0.1;
}

nlohmann::json search_config_to_json(const search_config& cfg) {
    nlohmann::json j{{"height", cfg.height},
                     {"selects", cfg.selects_per_relearn},
                     {"init", cfg.init_samples},
                     {"sampler", cfg.sampler == sampler_kind::random ? "random" : "bayes"},
                     {"dedup", cfg.dedup},
                     {"budget", cfg.budget},
                     {"seed", cfg.seed},
                     {"max_reject_tries", cfg.max_reject_tries},
                     {"ridge", cfg.ridge},
                     {"min_fit", cfg.min_fit},
                     {"surrogate_members", cfg.surrogate_members},
                     {"bayes_pool", cfg.bayes_pool}};
    if (cfg.c) j["c"] = *cfg.c;
    if (cfg.target) j["target"] = *cfg.target;
    return j;
}

search_config search_config_from_json(const nlohmann::json& j) {
    search_config cfg;
    if (j.contains("height")) cfg.height = j.at("height").get<int>();
    if (j.contains("selects")) cfg.selects_per_relearn = j.at("selects").get<int>();
    if (j.contains("init")) cfg.init_samples = j.at("init").get<int>();
    if (j.contains("c")) cfg.c = j.at("c").get<double>();
    if (j.contains("sampler")) {
        const auto s = j.at("sampler").get<std::string>();
        if (s == "random")
            cfg.sampler = sampler_kind::random;
        else if (s == "bayes")
            cfg.sampler = sampler_kind::bayes;
        else
            throw std::invalid_argument("unknown sampler: " + s);
    }
    if (j.contains("dedup")) cfg.dedup = j.at("dedup").get<bool>();
    if (j.contains("budget")) cfg.budget = j.at("budget").get<std::int64_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_reject_tries")) cfg.max_reject_tries = j.at("max_reject_tries").get<int>();
    if (j.contains("ridge")) cfg.ridge = j.at("ridge").get<double>();
    if (j.contains("min_fit")) cfg.min_fit = j.at("min_fit").get<int>();
    if (j.contains("target")) cfg.target = j.at("target").get<double>();
    if (j.contains("surrogate_members"))
        cfg.surrogate_members = j.at("surrogate_members").get<int>();
    if (j.contains("bayes_pool")) cfg.bayes_pool = j.at("bayes_pool").get<int>();
    return cfg;
}

double get_ucb(double v_sum_next, std::int64_t n_next, std::int64_t n_curt, double c) {
    if (n_next == 0) return std::numeric_limits<double>::infinity();
    return v_sum_next / static_cast<double>(n_next) +
           2.0 * c * std::sqrt(2.0 * std::log(static_cast<double>(n_curt)) /
                               static_cast<double>(n_next));
}

std::pair<int, std::vector<int>> ucb_select(const la_tree& tree, double c) {
    if (!tree.learned()) throw std::runtime_error("ucb_select: tree not learned");
    std::vector<int> path;
    int id = 0;
    while (true) {
        path.push_back(id);
        if (tree.is_leaf(id)) break;
        const auto& nd = tree.node(id);
        const auto& l = tree.node(nd.left);
        const auto& r = tree.node(nd.right);
        const double ul = get_ucb(l.v_sum, l.n, nd.n, c);
        const double ur = get_ucb(r.v_sum, r.n, nd.n, c);
        id = ul >= ur ? nd.left : nd.right;
    }
    return {path.back(), path};
}

namespace {

int violation_count(const std::vector<constraint>& cs, const encoding& e) {
    int v = 0;
    for (const auto& c : cs) {
        const double score = c.w.dot(e) + c.b;
        const bool ok =
            c.direction == constraint::dir::geq ? score >= c.threshold : score < c.threshold;
        if (!ok) ++v;
    }
    return v;
}

}  // namespace

std::optional<proposal> sample_random_in_partition(
    const search_space_spec& space, const std::vector<constraint>& constraints, rng_t& rng,
    int max_tries, const std::unordered_set<std::string>* exclude) {
    proposal best;
    int best_violations = std::numeric_limits<int>::max();
    for (int t = 1; t <= max_tries; ++t) {
        encoding e = sample_uniform(space, rng);
        if (exclude && exclude->count(encoding_key(e))) continue;
        const int v = violation_count(constraints, e);
        if (v == 0) return proposal{std::move(e), false, t};
        if (v < best_violations) {
            best_violations = v;
            best.e = std::move(e);
        }
    }
    if (best_violations == std::numeric_limits<int>::max()) return std::nullopt;
    best.fallback = true;
    best.tries = max_tries;
    return best;
}

std::pair<double, double> surrogate_ensemble::predict(const encoding& e) const {
    double sum = 0.0, sq = 0.0;
    for (const auto& m : members) {
        const double p = m.w.dot(e) + m.b;
        sum += p;
        sq += p * p;
    }
    const double n = static_cast<double>(members.size());
    const double mu = sum / n;
    const double var = std::max(0.0, sq / n - mu * mu);
    return {mu, std::sqrt(var)};
}

surrogate_ensemble fit_surrogate(const std::vector<measurement>& store, int members, double ridge,
                                 rng_t& rng) {
    if (members < 2) throw std::invalid_argument("surrogate needs >= 2 members");
    if (store.size() < 2) throw std::invalid_argument("surrogate needs >= 2 samples");
    const auto n = store.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    surrogate_ensemble ens;
    std::vector<std::pair<encoding, double>> boot(n);
    for (int b = 0; b < members; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& m = store[pick(rng)];
            boot[i] = {m.e, m.metric};
        }
        ens.members.push_back(fit_node_regressor(boot, ridge));
    }
    return ens;
}

double expected_improvement(double mu, double sigma, double v_best) {
    const double diff = mu - v_best;
    if (sigma <= 0.0) return std::max(0.0, diff);
    const double z = diff / sigma;
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return std::max(0.0, diff * cdf + sigma * pdf);
}

std::optional<proposal> sample_bayes_in_partition(
    const search_space_spec& space, const std::vector<constraint>& constraints,
    const std::vector<measurement>& store, rng_t& rng, const bayes_params& params,
    const std::unordered_set<std::string>* exclude, bayes_debug* debug) {
    if (store.size() < 2)
        return sample_random_in_partition(space, constraints, rng, params.max_tries, exclude);

    const auto ens = fit_surrogate(store, params.members, params.ridge, rng);
    double v_best = -std::numeric_limits<double>::infinity();
    for (const auto& m : store) v_best = std::max(v_best, m.metric);

    std::vector<proposal> pool;
    pool.reserve(params.pool_size);
    for (int i = 0; i < params.pool_size; ++i) {
        auto p = sample_random_in_partition(space, constraints, rng, params.max_tries, exclude);
        if (!p) break;  // partition exhausted under exclude
        pool.push_back(std::move(*p));
    }
    if (pool.empty()) return std::nullopt;

    int best_i = 0;
    double best_ei = -1.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto [mu, sigma] = ens.predict(pool[i].e);
        const double ei = expected_improvement(mu, sigma, v_best);
        if (debug) {
            debug->pool.push_back(pool[i].e);
            debug->mu.push_back(mu);
            debug->sigma.push_back(sigma);
            debug->ei.push_back(ei);
        }
        if (ei > best_ei) {
            best_ei = ei;
            best_i = static_cast<int>(i);
        }
    }
    if (debug) debug->chosen = best_i;
    return pool[best_i];
}

std::optional<encoding> propose_uniform_unseen(const search_space_spec& space, rng_t& rng,
                                               int max_tries,
                                               const std::unordered_set<std::string>& exclude,
                                               std::optional<std::vector<encoding>>& enum_cache) {
    for (int t = 0; t < max_tries; ++t) {
        encoding e = sample_uniform(space, rng);
        if (!exclude.count(encoding_key(e))) return e;
    }
    // deterministic endgame: first unseen encoding in enumeration order
    if (!enum_cache) {
        const auto n = space_size(space);
        if (!n || *n > (1ull << 22)) return std::nullopt;
        enum_cache = enumerate_space(space);
    }
    for (const auto& e : *enum_cache)
        if (!exclude.count(encoding_key(e))) return e;
    return std::nullopt;
}

namespace {

struct run_state {
    search_trace trace;
    eval_ledger ledger;
    std::optional<double> best;
    bool stop = false;
};

}  // namespace

search_trace lanas_search(const search_config& cfg, const objective& obj,
                          const search_space_spec& space, eval_ledger* ledger_out,
                          const search_hooks* hooks, la_tree* tree_out) {
    if (cfg.height < 1) throw std::invalid_argument("height must be >= 1");
    if (cfg.init_samples < 1) throw std::invalid_argument("init_samples must be >= 1");
    if (cfg.budget < cfg.init_samples)
        throw std::invalid_argument("budget must be >= init_samples");
    const double c = resolve_c(cfg.c, space);
    if (c < 0) throw std::invalid_argument("c must be >= 0");

    rng_t rng(cfg.seed);
    run_state st;
    st.trace.header = {{"algorithm", "lanas"},
                       {"space", space.name},
                       {"seed", cfg.seed},
                       {"config", search_config_to_json(cfg)}};

    la_tree tree(cfg.height, space.dim_count(), cfg.ridge, cfg.min_fit);
    std::optional<std::vector<encoding>> enum_cache;
    const std::uint64_t query_cap = 50ull * static_cast<std::uint64_t>(cfg.budget);

    auto evaluate_one = [&](const encoding& e, bool fallback,
                            const std::vector<int>* path) -> void {
        const auto [metric, valid] = obj.fn(e);
        st.ledger.record(encoding_key(e), valid);
        measurement m{e, metric, valid, static_cast<int>(st.trace.entries.size())};
        if (valid && (!st.best || metric > *st.best)) st.best = metric;
        st.trace.entries.push_back(
            {m.step, e, metric, valid, st.best, st.ledger.unique_valid(), fallback});
        if (valid) {
            if (path)
                tree.back_propagate(*path, path->back(), m);
            else
                tree.store().push_back(m);
        }
        if (cfg.target && st.best && *st.best >= *cfg.target - 1e-12) st.stop = true;
        if (st.ledger.unique_valid() >= static_cast<std::uint64_t>(cfg.budget)) st.stop = true;
        if (st.ledger.total_queries() >= query_cap) st.stop = true;
    };

    for (int i = 0; i < cfg.init_samples && !st.stop; ++i) {
        std::optional<encoding> e;
        if (cfg.dedup) {
            e = propose_uniform_unseen(space, rng, cfg.max_reject_tries, st.ledger.seen_keys(),
                                       enum_cache);
        } else {
            e = sample_uniform(space, rng);
        }
        if (!e) break;  // space exhausted
        evaluate_one(*e, false, nullptr);
    }

    int relearn_index = 0;
    while (!st.stop && !tree.store().empty()) {
        tree.learn();
        tree.redistribute();
        if (hooks && hooks->after_relearn) hooks->after_relearn(tree, relearn_index);
        ++relearn_index;

        for (int s = 0; s < cfg.selects_per_relearn && !st.stop; ++s) {
            const auto [leaf_id, path] = ucb_select(tree, c);
            const auto constraints = tree.get_constraints(path);
            const auto* exclude = cfg.dedup ? &st.ledger.seen_keys() : nullptr;

            std::optional<proposal> prop;
            if (cfg.sampler == sampler_kind::random) {
                prop = sample_random_in_partition(space, constraints, rng, cfg.max_reject_tries,
                                                  exclude);
            } else {
                bayes_params bp{cfg.bayes_pool, cfg.surrogate_members, cfg.ridge,
                                cfg.max_reject_tries};
                prop = sample_bayes_in_partition(space, constraints, tree.store(), rng, bp,
                                                 exclude);
            }
            if (!prop) {
                // everything the sampler can reach is already seen: scan the
                // enumeration for an unseen encoding, preferring the partition
                if (!enum_cache) {
                    const auto n = space_size(space);
                    if (n && *n <= (1ull << 22)) enum_cache = enumerate_space(space);
                }
                if (enum_cache) {
                    const encoding* pick = nullptr;
                    for (const auto& e : *enum_cache) {
                        if (st.ledger.seen(encoding_key(e))) continue;
                        if (satisfies(constraints, e)) {
                            pick = &e;
                            break;
                        }
                        if (!pick) pick = &e;
                    }
                    if (pick) prop = proposal{*pick, !satisfies(constraints, *pick), 0};
                }
            }
            if (!prop) {
                st.stop = true;  // space exhausted
                break;
            }
            evaluate_one(prop->e, prop->fallback, &path);
        }
    }

    if (ledger_out) *ledger_out = st.ledger;
    if (tree_out) *tree_out = tree;
    return st.trace;
}

}  // namespace lanas
