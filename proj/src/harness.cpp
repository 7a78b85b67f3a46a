#include "lanas/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace lanas {

namespace {

const std::vector<std::string> known_algorithms{"lanas", "random", "re", "mcts_sequential",
                                                "mcts_global"};
const std::vector<std::string> known_axes{"height", "selects", "c", "init", "sampler"};

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

}  // namespace

experiment_config experiment_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known_keys{
        "task",   "algorithm",     "budget",         "seeds",
        "out_dir", "params",       "re",             "target",
        "tabular_space", "kl_checkpoints", "ablation", "write_tree_snapshot"};
    if (!j.is_object()) throw config_error("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known_keys.begin(), known_keys.end(), key) == known_keys.end())
            throw config_error("unknown config key: " + key);
    experiment_config cfg;
    try {
        cfg.task = j.at("task").get<std::string>();
        cfg.algorithm = j.at("algorithm").get<std::string>();
        cfg.budget = j.at("budget").get<std::int64_t>();
        cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("params")) cfg.lanas = search_config_from_json(j.at("params"));
        if (j.contains("re")) {
            const auto& re = j.at("re");
            if (re.contains("population")) cfg.re_population = re.at("population").get<int>();
            if (re.contains("tournament")) cfg.re_tournament = re.at("tournament").get<int>();
        }
        if (j.contains("target")) {
            if (j.at("target").is_string()) {
                if (j.at("target").get<std::string>() != "auto")
                    throw config_error("target must be a number or \"auto\"");
                cfg.target_auto = true;
            } else {
                cfg.target = j.at("target").get<double>();
            }
        }
        if (j.contains("tabular_space"))
            cfg.tabular_space = j.at("tabular_space").get<std::string>();
        if (j.contains("kl_checkpoints"))
            cfg.kl_checkpoints = j.at("kl_checkpoints").get<std::vector<std::int64_t>>();
        if (j.contains("ablation")) {
            const auto& ab = j.at("ablation");
            cfg.ablation_axis = ab.at("axis").get<std::string>();
            for (const auto& v : ab.at("values")) cfg.ablation_values.push_back(v);
        }
        if (j.contains("write_tree_snapshot"))
            cfg.write_tree_snapshot = j.at("write_tree_snapshot").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("bad config: ") + e.what());
    }

    if (cfg.seeds.empty()) throw config_error("config needs at least one seed");
    if (cfg.budget < 1) throw config_error("budget must be >= 1");
    if (std::find(known_algorithms.begin(), known_algorithms.end(), cfg.algorithm) ==
        known_algorithms.end())
        throw config_error("unknown algorithm: " + cfg.algorithm);
    const bool is_convnet = cfg.task == "convnet_toy" || cfg.task == "convnet_appendix";
    if (cfg.algorithm.rfind("mcts_", 0) == 0 && !is_convnet)
        throw config_error("mcts_* algorithms need a convnet task");
    if (cfg.ablation_axis) {
        if (std::find(known_axes.begin(), known_axes.end(), *cfg.ablation_axis) ==
            known_axes.end())
            throw config_error("unknown ablation axis: " + *cfg.ablation_axis);
        if (cfg.ablation_values.empty()) throw config_error("ablation values must be non-empty");
    }
    return cfg;
}

nlohmann::json experiment_config_to_json(const experiment_config& cfg) {
    nlohmann::json j{{"task", cfg.task},
                     {"algorithm", cfg.algorithm},
                     {"budget", cfg.budget},
                     {"seeds", cfg.seeds},
                     {"out_dir", cfg.out_dir},
                     {"params", search_config_to_json(cfg.lanas)},
                     {"re", {{"population", cfg.re_population}, {"tournament", cfg.re_tournament}}},
                     {"tabular_space", cfg.tabular_space},
                     {"write_tree_snapshot", cfg.write_tree_snapshot}};
    if (cfg.target) j["target"] = *cfg.target;
    if (cfg.target_auto) j["target"] = "auto";
    if (!cfg.kl_checkpoints.empty()) j["kl_checkpoints"] = cfg.kl_checkpoints;
    if (cfg.ablation_axis)
        j["ablation"] = {{"axis", *cfg.ablation_axis}, {"values", cfg.ablation_values}};
    return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t config_hash(const experiment_config& cfg) {
    return fnv1a64(experiment_config_to_json(cfg).dump());
}

task_setup make_task(const experiment_config& cfg) {
    task_setup t;
    if (cfg.task == "convnet_toy") {
        t.space = make_builtin_space(builtin_space::convnet_toy);
        t.obj = make_synthetic_objective(convnet_codebook::toy);
    } else if (cfg.task == "convnet_appendix") {
        t.space = make_builtin_space(builtin_space::convnet_appendix);
        t.obj = make_synthetic_objective(convnet_codebook::appendix);
    } else if (cfg.task == "eggholder" || cfg.task == "eggholder2d") {
        t.space = make_builtin_space(builtin_space::eggholder2d);
        t.obj = make_eggholder_objective();
    } else if (cfg.task.rfind("tabular:", 0) == 0) {
        const auto path = cfg.task.substr(8);
        search_space_spec space;
        try {
            space = make_builtin_space(cfg.tabular_space);
        } catch (const std::invalid_argument& e) {
            throw config_error(e.what());
        }
        try {
            t.bench = std::make_shared<tabular_benchmark>(load_tabular(path, space));
        } catch (const std::exception& e) {
            throw io_error(e.what());
        }
        t.space = space;
        t.obj = make_tabular_objective(*t.bench);
    } else {
        throw config_error("unknown task: " + cfg.task);
    }
    return t;
}

search_trace run_single(const experiment_config& cfg, const task_setup& task, std::uint64_t seed,
                        la_tree* tree_out) {
    std::optional<double> target = cfg.target;
    if (cfg.target_auto) target = task.obj.v_star;

    if (cfg.algorithm == "lanas") {
        search_config sc = cfg.lanas;
        sc.budget = cfg.budget;
        sc.seed = seed;
        sc.target = target;
        return lanas_search(sc, task.obj, task.space, nullptr, nullptr, tree_out);
    }
    if (cfg.algorithm == "random")
        return random_search(task.space, task.obj, cfg.budget, seed, cfg.lanas.dedup, target,
                             nullptr, cfg.lanas.max_reject_tries);
    if (cfg.algorithm == "re")
        return regularized_evolution(task.space, task.obj, cfg.budget, seed, cfg.re_population,
                                     cfg.re_tournament, target);
    if (cfg.algorithm == "mcts_sequential" || cfg.algorithm == "mcts_global") {
        const auto kind = cfg.algorithm == "mcts_global"
                              ? action_space_adapter::kind_t::global
                              : action_space_adapter::kind_t::sequential;
        const auto adapter = make_action_adapter(task.space, kind);
        return vanilla_mcts(task.space, task.obj, adapter, cfg.budget, seed,
                            resolve_c(cfg.lanas.c, task.space), target);
    }
    throw config_error("unknown algorithm: " + cfg.algorithm);
}

namespace {

nlohmann::json entry_to_json(const trace_entry& t) {
    nlohmann::json j{{"step", t.step},
                     {"encoding", std::vector<double>(t.e.data(), t.e.data() + t.e.size())},
                     {"metric", t.metric},
                     {"valid", t.valid},
                     {"unique_valid", t.unique_valid},
                     {"fallback", t.fallback}};
    if (t.best_so_far)
        j["best_so_far"] = *t.best_so_far;
    else
        j["best_so_far"] = nullptr;
    return j;
}

trace_entry entry_from_json(const nlohmann::json& j) {
    trace_entry t;
    t.step = j.at("step").get<int>();
    const auto e = j.at("encoding").get<std::vector<double>>();
    t.e = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
    t.metric = j.at("metric").get<double>();
    t.valid = j.at("valid").get<bool>();
    if (!j.at("best_so_far").is_null()) t.best_so_far = j.at("best_so_far").get<double>();
    t.unique_valid = j.at("unique_valid").get<std::uint64_t>();
    t.fallback = j.at("fallback").get<bool>();
    return t;
}

std::string sanitize_component(std::string s) {
    for (auto& ch : s)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
    return s;
}

}  // namespace

void write_trace(const search_trace& trace, const std::string& path) {
    std::ostringstream out;
    out << trace.header.dump() << "\n";
    for (const auto& t : trace.entries) out << entry_to_json(t).dump() << "\n";
    write_text_file(path, out.str());
}

search_trace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open trace: " + path);
    search_trace trace;
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty trace: " + path);
    try {
        trace.header = nlohmann::json::parse(line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            trace.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error("bad trace line in " + path + ": " + e.what());
    }
    return trace;
}

bool validate_trace_line(const nlohmann::json& line, bool is_header, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!line.is_object()) return fail("line is not an object");
    if (is_header) {
        if (!line.contains("config") || !line.at("config").is_object())
            return fail("header needs a config object");
        if (!line.contains("seed") || !line.at("seed").is_number_integer())
            return fail("header needs an integer seed");
        return true;
    }
    static const std::vector<std::string> keys{"step",  "encoding",     "metric",  "valid",
                                              "best_so_far", "unique_valid", "fallback"};
    if (line.size() != keys.size()) return fail("entry must have exactly the schema fields");
    for (const auto& k : keys)
        if (!line.contains(k)) return fail("missing field: " + k);
    if (!line.at("step").is_number_integer() || line.at("step").get<std::int64_t>() < 0)
        return fail("step must be a non-negative integer");
    if (!line.at("encoding").is_array()) return fail("encoding must be an array");
    for (const auto& v : line.at("encoding"))
        if (!v.is_number()) return fail("encoding components must be numbers");
    if (!line.at("metric").is_number()) return fail("metric must be a number");
    if (!line.at("valid").is_boolean()) return fail("valid must be a boolean");
    if (!line.at("best_so_far").is_number() && !line.at("best_so_far").is_null())
        return fail("best_so_far must be a number or null");
    if (!line.at("unique_valid").is_number_integer() ||
        line.at("unique_valid").get<std::int64_t>() < 0)
        return fail("unique_valid must be a non-negative integer");
    if (!line.at("fallback").is_boolean()) return fail("fallback must be a boolean");
    return true;
}

std::optional<std::string> validate_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return "cannot open " + path;
    std::string line, why;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            return "line " + std::to_string(no) + ": " + e.what();
        }
        if (!validate_trace_line(j, no == 1, &why))
            return "line " + std::to_string(no) + ": " + why;
    }
    if (no == 0) return "empty file";
    return std::nullopt;
}

void run_experiment(const experiment_config& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw io_error("cannot create " + cfg.out_dir + ": " + ec.message());

    if (cfg.ablation_axis) {
        std::vector<std::string> subdirs;
        for (const auto& value : cfg.ablation_values) {
            experiment_config sub = cfg;
            sub.ablation_axis.reset();
            sub.ablation_values.clear();
            const auto& axis = *cfg.ablation_axis;
            try {
                if (axis == "height")
                    sub.lanas.height = value.get<int>();
                else if (axis == "selects")
                    sub.lanas.selects_per_relearn = value.get<int>();
                else if (axis == "init")
                    sub.lanas.init_samples = value.get<int>();
                else if (axis == "c")
                    sub.lanas.c = value.get<double>();
                else if (axis == "sampler")
                    sub.lanas.sampler = value.get<std::string>() == "bayes"
                                            ? sampler_kind::bayes
                                            : sampler_kind::random;
            } catch (const nlohmann::json::exception& e) {
                throw config_error("bad ablation value: " + std::string(e.what()));
            }
            const std::string name = *cfg.ablation_axis + "_" + sanitize_component(value.dump());
            sub.out_dir = cfg.out_dir + "/" + name;
            run_experiment(sub);
            subdirs.push_back(name);
        }
        nlohmann::json manifest{{"config", experiment_config_to_json(cfg)},
                                {"config_hash", config_hash(cfg)},
                                {"ablation_axis", *cfg.ablation_axis},
                                {"values", cfg.ablation_values},
                                {"subdirs", subdirs}};
        write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
        return;
    }

    const task_setup task = make_task(cfg);
    std::vector<std::string> trace_files, tree_files;
    for (const auto seed : cfg.seeds) {
        la_tree tree(1, 1);
        la_tree* tree_ptr =
            cfg.algorithm == "lanas" && cfg.write_tree_snapshot ? &tree : nullptr;
        const auto trace = run_single(cfg, task, seed, tree_ptr);
        const std::string trace_name = "trace_seed" + std::to_string(seed) + ".jsonl";
        write_trace(trace, cfg.out_dir + "/" + trace_name);
        trace_files.push_back(trace_name);
        if (tree_ptr && tree.learned()) {
            const std::string tree_name = "tree_seed" + std::to_string(seed) + ".json";
            nlohmann::json tj{{"space", space_to_json(task.space)},
                              {"tree", tree_to_json(tree, false)}};
            write_text_file(cfg.out_dir + "/" + tree_name, tj.dump() + "\n");
            tree_files.push_back(tree_name);
        }
    }
    nlohmann::json manifest{{"config", experiment_config_to_json(cfg)},
                            {"config_hash", config_hash(cfg)},
                            {"task", cfg.task},
                            {"algorithm", cfg.algorithm},
                            {"budget", cfg.budget},
                            {"seeds", cfg.seeds},
                            {"traces", trace_files},
                            {"trees", tree_files},
                            {"space", space_to_json(task.space)}};
    if (task.obj.v_star)
        manifest["v_star"] = *task.obj.v_star;
    else
        manifest["v_star"] = nullptr;
    write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

namespace {

// best_so_far indexed by unique-valid count (1-based: out[0] = after the
// first unique valid sample)
std::vector<double> best_at_unique(const search_trace& trace) {
    std::vector<double> out;
    std::uint64_t prev = 0;
    for (const auto& t : trace.entries) {
        if (t.unique_valid == prev + 1) {
            out.push_back(t.best_so_far.value());
            prev = t.unique_valid;
        }
    }
    return out;
}

}  // namespace

regret_series regret_curve(const std::vector<search_trace>& traces, double v_star) {
    if (traces.empty()) throw std::invalid_argument("regret_curve: no traces");
    std::vector<std::vector<double>> best;
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const auto& tr : traces) {
        best.push_back(best_at_unique(tr));
        shortest = std::min(shortest, best.back().size());
    }
    if (shortest == 0) throw std::invalid_argument("regret_curve: a trace has no valid samples");
    regret_series series;
    for (std::size_t i = 0; i < shortest; ++i) {
        std::vector<double> regrets;
        regrets.reserve(best.size());
        for (const auto& b : best) regrets.push_back(v_star - b[i]);
        const double mean =
            std::accumulate(regrets.begin(), regrets.end(), 0.0) / regrets.size();
        series.mean.push_back(mean);
        series.p25.push_back(percentile(regrets, 0.25));
        series.p75.push_back(percentile(regrets, 0.75));
    }
    return series;
}

cdf_result cdf_at_budget(const std::vector<search_trace>& traces, std::int64_t budget) {
    cdf_result result;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto best = best_at_unique(traces[i]);
        if (static_cast<std::int64_t>(best.size()) < budget) {
            result.short_traces.push_back(i);
            continue;
        }
        result.values.push_back(best[static_cast<std::size_t>(budget - 1)]);
    }
    std::sort(result.values.begin(), result.values.end());
    const auto n = result.values.size();
    for (std::size_t i = 0; i < n; ++i)
        result.fractions.push_back(static_cast<double>(i + 1) / static_cast<double>(n));
    return result;
}

std::vector<std::pair<encoding, double>> enumerate_dataset(const search_space_spec& space,
                                                           const objective& obj) {
    std::vector<std::pair<encoding, double>> out;
    for (auto& e : enumerate_space(space)) {
        const auto [metric, valid] = obj.fn(e);
        if (valid) out.emplace_back(std::move(e), metric);
    }
    return out;
}

namespace {

int bin_of(double v, double lo, double hi, int bins) {
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
}

}  // namespace

reference_tree build_reference_tree(const search_space_spec& space,
                                    const std::vector<std::pair<encoding, double>>& dataset,
                                    int height, int bins,
                                    std::optional<std::pair<double, double>> range) {
    if (dataset.empty()) throw std::invalid_argument("reference tree needs a non-empty dataset");
    reference_tree ref{la_tree(height, space.dim_count()), bins};
    const auto r = range ? *range
                         : space.metric_range_hint ? *space.metric_range_hint
                                                   : std::make_pair(0.0, 1.0);
    ref.lo = r.first;
    ref.hi = r.second;
    if (static_cast<int>(dataset.size()) < ref.tree.leaf_count())
        std::cerr << "warning: reference dataset smaller than leaf count; "
                     "pass-through nodes expected\n";
    auto& store = ref.tree.store();
    store.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        store.push_back({dataset[i].first, dataset[i].second, true, static_cast<int>(i)});
    ref.tree.learn();
    ref.tree.redistribute();

    const int leaves = ref.tree.leaf_count();
    ref.leaf_hist.assign(leaves, Eigen::VectorXd::Zero(bins));
    ref.leaf_mean.assign(leaves, 0.0);
    ref.leaf_count.assign(leaves, 0);
    for (int j = 0; j < leaves; ++j) {
        const auto& nd = ref.tree.node(ref.tree.leaf_id_at(j));
        for (int sid : nd.sample_ids)
            ref.leaf_hist[j][bin_of(store[sid].metric, ref.lo, ref.hi, bins)] += 1.0;
        ref.leaf_count[j] = nd.n;
        if (nd.n > 0) {
            ref.leaf_mean[j] = nd.v_sum / static_cast<double>(nd.n);
            ref.leaf_hist[j] /= ref.leaf_hist[j].sum();
        }
    }
    return ref;
}

Eigen::VectorXd smooth_normalize(Eigen::VectorXd hist, double eps) {
    const double sum = hist.sum();
    if (sum > 0) hist /= sum;
    hist.array() += eps;
    hist /= hist.sum();
    return hist;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    if (p.size() != q.size()) throw std::invalid_argument("KL: size mismatch");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] > 0) kl += p[i] * std::log(p[i] / q[i]);
    return kl;
}

std::vector<kl_checkpoint_result> kl_dynamics(const search_trace& trace,
                                              const reference_tree& ref,
                                              const std::vector<std::int64_t>& checkpoints) {
    std::uint64_t final_unique = 0;
    for (const auto& t : trace.entries) final_unique = std::max(final_unique, t.unique_valid);

    const int leaves = ref.tree.leaf_count();
    std::vector<kl_checkpoint_result> out;
    for (const auto n : checkpoints) {
        if (n < 1 || static_cast<std::uint64_t>(n) > final_unique)
            throw std::invalid_argument("kl checkpoint " + std::to_string(n) +
                                        " exceeds trace length");
        std::vector<Eigen::VectorXd> hist(leaves, Eigen::VectorXd::Zero(ref.bins));
        std::vector<double> mean(leaves, 0.0);
        std::vector<std::int64_t> count(leaves, 0);
        double total = 0.0;
        std::int64_t total_n = 0;
        for (const auto& t : trace.entries) {
            if (t.valid) {
                const int j = ref.tree.leaf_index(ref.tree.route(t.e).first);
                hist[j][bin_of(t.metric, ref.lo, ref.hi, ref.bins)] += 1.0;
                mean[j] += t.metric;
                count[j] += 1;
                total += t.metric;
                total_n += 1;
            }
            if (t.unique_valid == static_cast<std::uint64_t>(n)) break;
        }
        kl_checkpoint_result res;
        res.checkpoint = n;
        double vbar_sum = 0.0;
        int vbar_leaves = 0;
        for (int j = 0; j < leaves; ++j) {
            const auto p = smooth_normalize(hist[j]);
            const auto q = smooth_normalize(ref.leaf_hist[j]);
            res.leaf_kl.push_back(kl_divergence(p, q));
            if (count[j] > 0 && ref.leaf_count[j] > 0) {
                vbar_sum += mean[j] / count[j] - ref.leaf_mean[j];
                ++vbar_leaves;
            }
        }
        res.leaf_avg = std::accumulate(res.leaf_kl.begin(), res.leaf_kl.end(), 0.0) / leaves;
        res.vbar_delta_leaf = vbar_leaves ? vbar_sum / vbar_leaves : 0.0;
        const auto& root = ref.tree.node(0);
        const double ref_mean = root.n ? root.v_sum / static_cast<double>(root.n) : 0.0;
        res.vbar_delta_global = total_n ? total / total_n - ref_mean : 0.0;
        out.push_back(std::move(res));
    }
    return out;
}

nlohmann::json partition_export(const la_tree& tree, const search_space_spec& space, int grid,
                                const objective* value) {
    if (space.dim_count() != 2 || space.dims[0].kind != dim_kind::continuous ||
        space.dims[1].kind != dim_kind::continuous)
        throw config_error("partition export needs a 2-D continuous space");
    if (grid < 1) throw config_error("grid must be >= 1");

    auto descend = [&](const encoding& e) {
        int id = 0;
        while (!tree.is_leaf(id)) {
            const auto& nd = tree.node(id);
            const bool left =
                !nd.trained || nd.model.w.dot(e) + nd.model.b >= nd.threshold;
            id = left ? nd.left : nd.right;
        }
        return id;
    };

    nlohmann::json cells = nlohmann::json::array();
    encoding e(2);
    for (int ix = 0; ix < grid; ++ix) {
        e[0] = space.dims[0].lo + (ix + 0.5) * (space.dims[0].hi - space.dims[0].lo) / grid;
        for (int iy = 0; iy < grid; ++iy) {
            e[1] = space.dims[1].lo + (iy + 0.5) * (space.dims[1].hi - space.dims[1].lo) / grid;
            const int leaf_id = descend(e);
            nlohmann::json cell{{"x", e[0]},
                                {"y", e[1]},
                                {"leaf", leaf_id},
                                {"leaf_index", tree.leaf_index(leaf_id)}};
            if (value) cell["value"] = value->fn(e).first;
            cells.push_back(std::move(cell));
        }
    }

    std::vector<int> leftmost{0};
    while (!tree.is_leaf(leftmost.back())) leftmost.push_back(tree.node(leftmost.back()).left);
    nlohmann::json constraints = nlohmann::json::array();
    for (const auto& c : tree.get_constraints(leftmost)) {
        constraints.push_back(
            {{"w", std::vector<double>(c.w.data(), c.w.data() + c.w.size())},
             {"b", c.b},
             {"threshold", c.threshold},
             {"direction", c.direction == constraint::dir::geq ? "geq" : "lt"}});
    }
    return nlohmann::json{{"grid", grid},
                          {"space", space.name},
                          {"cells", cells},
                          {"leftmost_path", {{"nodes", leftmost}, {"constraints", constraints}}}};
}

namespace {

struct loaded_run {
    nlohmann::json manifest;
    std::vector<search_trace> traces;
};

loaded_run load_run(const std::string& dir) {
    loaded_run run;
    run.manifest = read_json_file(dir + "/manifest.json");
    if (run.manifest.contains("subdirs"))
        throw config_error(dir + " holds an ablation sweep; use analyze ablation");
    for (const auto& f : run.manifest.at("traces"))
        run.traces.push_back(read_trace(dir + "/" + f.get<std::string>()));
    if (run.traces.empty()) throw config_error("no traces in " + dir);
    return run;
}

double manifest_v_star(const nlohmann::json& manifest) {
    if (!manifest.contains("v_star") || manifest.at("v_star").is_null())
        throw config_error("manifest has no v_star; regret-style analysis impossible");
    return manifest.at("v_star").get<double>();
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// unique-valid samples until best_so_far reaches v_star (inf when never)
double samples_to_optimum(const search_trace& trace, double v_star) {
    for (const auto& t : trace.entries)
        if (t.best_so_far && *t.best_so_far >= v_star - 1e-9)
            return static_cast<double>(t.unique_valid);
    return std::numeric_limits<double>::infinity();
}

}  // namespace

void analyze_regret(const std::string& dir) {
    const auto run = load_run(dir);
    const double v_star = manifest_v_star(run.manifest);
    const auto series = regret_curve(run.traces, v_star);
    std::ostringstream out;
    out << "index,mean,p25,p75\n";
    for (std::size_t i = 0; i < series.mean.size(); ++i)
        out << i + 1 << "," << fmt(series.mean[i]) << "," << fmt(series.p25[i]) << ","
            << fmt(series.p75[i]) << "\n";
    write_text_file(dir + "/regret.csv", out.str());
}

void analyze_cdf(const std::string& dir) {
    const auto run = load_run(dir);
    const auto budget = run.manifest.at("budget").get<std::int64_t>();
    const auto cdf = cdf_at_budget(run.traces, budget);
    std::ostringstream out;
    out << "v_plus,fraction\n";
    for (std::size_t i = 0; i < cdf.values.size(); ++i)
        out << fmt(cdf.values[i]) << "," << fmt(cdf.fractions[i]) << "\n";
    for (const auto i : cdf.short_traces) {
        const auto seed = run.manifest.at("seeds").at(i).get<std::uint64_t>();
        out << "# short_trace_seed," << seed << "\n";
        std::cerr << "warning: trace for seed " << seed << " never reached budget " << budget
                  << "\n";
    }
    write_text_file(dir + "/cdf.csv", out.str());
}

void analyze_kl(const std::string& dir) {
    const auto run = load_run(dir);
    const auto cfg = experiment_config_from_json(run.manifest.at("config"));
    const auto task = make_task(cfg);

    std::vector<std::pair<encoding, double>> dataset;
    if (task.bench) {
        for (const auto& [key, row] : task.bench->rows) dataset.push_back(row);
    } else if (task.space.finite()) {
        dataset = enumerate_dataset(task.space, task.obj);
    } else {
        throw config_error("kl analysis needs an enumerable task");
    }
    const auto ref = build_reference_tree(task.space, dataset, cfg.lanas.height);

    std::vector<std::int64_t> checkpoints = cfg.kl_checkpoints;
    if (checkpoints.empty())
        checkpoints = {cfg.lanas.init_samples, 2ll * cfg.lanas.init_samples, cfg.budget};

    std::ostringstream out, leaves;
    out << "seed,checkpoint,leaf_avg_kl,vbar_delta_leaf,vbar_delta_global\n";
    leaves << "seed,checkpoint,leaf_index,kl\n";
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
        const auto seed = run.manifest.at("seeds").at(i).get<std::uint64_t>();
        for (const auto& res : kl_dynamics(run.traces[i], ref, checkpoints)) {
            out << seed << "," << res.checkpoint << "," << fmt(res.leaf_avg) << ","
                << fmt(res.vbar_delta_leaf) << "," << fmt(res.vbar_delta_global) << "\n";
            for (std::size_t j = 0; j < res.leaf_kl.size(); ++j)
                leaves << seed << "," << res.checkpoint << "," << j << "," << fmt(res.leaf_kl[j])
                       << "\n";
        }
    }
    write_text_file(dir + "/kl.csv", out.str());
    write_text_file(dir + "/kl_leaves.csv", leaves.str());
}

void analyze_ablation(const std::string& dir) {
    const auto manifest = read_json_file(dir + "/manifest.json");
    if (!manifest.contains("subdirs"))
        throw config_error(dir + " is not an ablation sweep directory");
    const auto axis = manifest.at("ablation_axis").get<std::string>();
    const auto& values = manifest.at("values");
    const auto& subdirs = manifest.at("subdirs");

    std::ostringstream out;
    out << "axis,value,metric,median,p25,p75,reach_fraction\n";
    for (std::size_t vi = 0; vi < subdirs.size(); ++vi) {
        const std::string sub = dir + "/" + subdirs.at(vi).get<std::string>();
        const auto sub_manifest = read_json_file(sub + "/manifest.json");
        std::vector<search_trace> traces;
        for (const auto& f : sub_manifest.at("traces"))
            traces.push_back(read_trace(sub + "/" + f.get<std::string>()));
        if (traces.empty()) throw config_error("no traces in " + sub);

        const bool has_v_star =
            sub_manifest.contains("v_star") && !sub_manifest.at("v_star").is_null();
        std::vector<double> metric;
        int reached = 0;
        std::string kind;
        if (has_v_star) {
            kind = "samples_to_optimum";
            const double v_star = sub_manifest.at("v_star").get<double>();
            for (const auto& tr : traces) {
                const double s = samples_to_optimum(tr, v_star);
                if (!std::isinf(s)) ++reached;
                metric.push_back(s);
            }
        } else {
            kind = "best_at_budget";
            for (const auto& tr : traces) {
                const auto best = best_at_unique(tr);
                if (best.empty()) throw config_error("trace without valid samples in " + sub);
                metric.push_back(best.back());
                ++reached;
            }
        }
        out << axis << "," << values.at(vi).dump() << "," << kind << ","
            << fmt(percentile(metric, 0.5)) << "," << fmt(percentile(metric, 0.25)) << ","
            << fmt(percentile(metric, 0.75)) << ","
            << fmt(static_cast<double>(reached) / static_cast<double>(metric.size())) << "\n";
    }
    write_text_file(dir + "/ablation.csv", out.str());
}

nlohmann::json spaces_list_json() {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& name : builtin_space_names()) {
        const auto space = make_builtin_space(name);
        const auto n = space_size(space);
        nlohmann::json j{{"name", name}, {"dims", space.dim_count()}, {"finite", space.finite()}};
        if (n)
            j["size"] = *n;
        else
            j["size"] = nullptr;
        if (space.metric_range_hint)
            j["metric_range_hint"] = {space.metric_range_hint->first,
                                      space.metric_range_hint->second};
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace lanas
