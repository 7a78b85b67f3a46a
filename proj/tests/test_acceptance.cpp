#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lanas/baselines.hpp"
#include "lanas/harness.hpp"
#include "lanas/search.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lanas;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

void report(int k, const std::string& name, bool ok, const std::string& details) {
    std::printf("ACCEPTANCE %d %s: %s (%s)\n", k, name.c_str(), ok ? "PASS" : "FAIL",
                details.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "ACCEPTANCE ", k, " ", name, ": ", details);
}

// median that tolerates +inf entries (they sort to the top)
double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double samples_to_optimum(const search_trace& tr, double v_star) {
    for (const auto& t : tr.entries)
        if (t.best_so_far && *t.best_so_far >= v_star - 1e-9)
            return static_cast<double>(t.unique_valid);
    return kInf;
}

double final_best(const search_trace& tr) {
    double best = -kInf;
    for (const auto& t : tr.entries)
        if (t.valid) best = std::max(best, t.metric);
    return best;
}

search_config toy_search_config(int height, std::uint64_t seed) {
    search_config cfg;
    cfg.height = height;
    cfg.selects_per_relearn = 20;
    cfg.init_samples = 100;
    cfg.c = 0.1;
    cfg.budget = 1364;
    cfg.seed = seed;
    cfg.target = 1.0;
    return cfg;
}

std::string fmt1(double v) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

TEST_CASE("criterion 1: exactness suite") {
    stopwatch sw;
    std::ostringstream detail;
    bool ok = true;

    // (a) ridge fit vs an independent normal-equations oracle
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(0.0, 1.0);
    std::uniform_int_distribution<int> un(2, 60), ud(1, 8);
    double fit_err = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = un(rng), d = ud(rng);
        const double lambda = rep % 3 == 0 ? 1e-6 : rep % 3 == 1 ? 0.5 : 2.0;
        std::vector<std::pair<encoding, double>> samples(n);
        Eigen::MatrixXd A(n, d + 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            encoding e(d);
            for (int j = 0; j < d; ++j) e[j] = ux(rng);
            y[i] = uy(rng);
            A.row(i).head(d) = e.transpose();
            A(i, d) = 1.0;
            samples[i] = {std::move(e), y[i]};
        }
        // normal equations with the intercept left unpenalized
        Eigen::MatrixXd G = A.transpose() * A;
        G.topLeftCorner(d, d) += lambda * Eigen::MatrixXd::Identity(d, d);
        const Eigen::VectorXd sol = G.ldlt().solve(A.transpose() * y);
        const auto model = fit_node_regressor(samples, lambda);
        const double scale = std::max(1.0, sol.norm());
        Eigen::VectorXd got(d + 1);
        got.head(d) = model.w;
        got[d] = model.b;
        fit_err = std::max(fit_err, (got - sol).norm() / scale);
    }
    ok = ok && fit_err <= 1e-6;
    detail << "fit max rel err " << fit_err;

    // (b) threshold == mean
    double thr_err = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        std::uniform_int_distribution<int> um(1, 200);
        std::vector<double> m(um(rng));
        long double sum = 0.0L;
        for (auto& x : m) {
            x = uy(rng);
            sum += x;
        }
        thr_err = std::max(thr_err,
                           std::abs(node_threshold(m) - static_cast<double>(sum / m.size())));
    }
    ok = ok && thr_err <= 1e-9 && node_threshold({}) == 0.0;
    detail << "; threshold max err " << thr_err;

    // (c) UCB closed form
    double ucb_err = std::abs(get_ucb(1.8, 2, 10, 0.1) - 1.2034854258770293);
    std::uniform_real_distribution<double> uv(-5.0, 5.0), uc(0.0, 2.0);
    std::uniform_int_distribution<std::int64_t> uvis(1, 1000);
    for (int rep = 0; rep < 200; ++rep) {
        const std::int64_t n_next = uvis(rng);
        const std::int64_t n_curt = n_next + uvis(rng);
        const double v = uv(rng), c = uc(rng);
        const long double want =
            static_cast<long double>(v) / n_next +
            2.0L * c * std::sqrt(2.0L * std::log(static_cast<long double>(n_curt)) / n_next);
        const double got = get_ucb(v, n_next, n_curt, c);
        ucb_err = std::max(ucb_err, std::abs(got - static_cast<double>(want)) /
                                        std::max(1.0, std::abs(static_cast<double>(want))));
    }
    ok = ok && ucb_err <= 1e-12 && std::isinf(get_ucb(3.0, 0, 5, 0.1));
    detail << "; ucb max rel err " << ucb_err;

    // (d) routing conservation after every relearn of a 1000-step run
    int relearns = 0, conserved = 0;
    search_hooks hooks;
    hooks.after_relearn = [&](const la_tree& tree, int) {
        ++relearns;
        std::int64_t leaf_n = 0;
        for (int j = 0; j < tree.leaf_count(); ++j) leaf_n += tree.node(tree.leaf_id_at(j)).n;
        if (leaf_n == static_cast<std::int64_t>(tree.store().size())) ++conserved;
    };
    {
        const auto space = make_builtin_space(builtin_space::convnet_toy);
        const auto obj = make_synthetic_objective(convnet_codebook::toy);
        auto cfg = toy_search_config(4, 9);
        cfg.budget = 1000;
        cfg.target.reset();
        lanas_search(cfg, obj, space, nullptr, &hooks);
    }
    ok = ok && relearns > 0 && conserved == relearns;
    detail << "; " << conserved << "/" << relearns << " relearns conserved";

    // (e) with c=0 every fully-visited selection step picks the argmax mean
    {
        const auto space = make_builtin_space(builtin_space::convnet_toy);
        const auto obj = make_synthetic_objective(convnet_codebook::toy);
        const auto dataset = enumerate_dataset(space, obj);
        int checked = 0;
        bool all_argmax = true;
        for (int height : {3, 4}) {
            const auto ref = build_reference_tree(space, dataset, height);
            const auto [leaf, path] = ucb_select(ref.tree, 0.0);
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                const auto& nd = ref.tree.node(path[i]);
                const auto& l = ref.tree.node(nd.left);
                const auto& r = ref.tree.node(nd.right);
                if (l.n == 0 || r.n == 0) continue;  // c=0 claim needs visited children
                const double ml = l.v_sum / static_cast<double>(l.n);
                const double mr = r.v_sum / static_cast<double>(r.n);
                const int want = ml >= mr ? nd.left : nd.right;
                ++checked;
                all_argmax = all_argmax && path[i + 1] == want;
            }
        }
        ok = ok && checked >= 6 && all_argmax;
        detail << "; " << checked << " c=0 argmax decisions verified";
    }

    detail << "; " << fmt1(sw.seconds()) << "s";
    report(1, "exactness", ok, detail.str());
}

TEST_CASE("criterion 2: beats random search on convnet_toy") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    std::vector<double> la, rnd;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto lt = lanas_search(toy_search_config(4, seed), obj, space);
        la.push_back(samples_to_optimum(lt, 1.0));
        const auto rt = random_search(space, obj, 1364, seed, true, 1.0);
        rnd.push_back(samples_to_optimum(rt, 1.0));
    }
    const double ml = median_of(la), mr = median_of(rnd);
    const bool ok = ml <= 0.5 * mr;
    std::ostringstream detail;
    detail << "lanas median " << fmt1(ml) << " vs random " << fmt1(mr) << " uniques-to-optimum"
           << "; ratio " << (ml / mr) << " <= 0.5 required; 50 seeds; " << fmt1(sw.seconds())
           << "s";
    report(2, "lanas_vs_random", ok, detail.str());
}

TEST_CASE("criterion 3: global action adapter vs sequential under vanilla MCTS") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    const auto ga = make_action_adapter(space, action_space_adapter::kind_t::global);
    const auto sa = make_action_adapter(space, action_space_adapter::kind_t::sequential);
    std::vector<double> g, s;
    int g_reached = 0, s_reached = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        g.push_back(samples_to_optimum(vanilla_mcts(space, obj, ga, 1364, seed, 0.1, 1.0), 1.0));
        s.push_back(samples_to_optimum(vanilla_mcts(space, obj, sa, 1364, seed, 0.1, 1.0), 1.0));
        if (!std::isinf(g.back())) ++g_reached;
        if (!std::isinf(s.back())) ++s_reached;
    }
    const double mg = median_of(g), ms = median_of(s);
    const bool ok = mg < ms;
    std::ostringstream detail;
    detail << "global median " << fmt1(mg) << " (" << g_reached << "/50 reached) vs sequential "
           << fmt1(ms) << " (" << s_reached << "/50) uniques-to-optimum; criterion needs global"
           << " < sequential; c=0.1; " << fmt1(sw.seconds()) << "s";
    report(3, "mcts_action_spaces", ok, detail.str());
}

TEST_CASE("criterion 4: deeper trees do not search slower") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    std::vector<double> h8, h3;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        h8.push_back(samples_to_optimum(lanas_search(toy_search_config(8, seed), obj, space), 1.0));
        h3.push_back(samples_to_optimum(lanas_search(toy_search_config(3, seed), obj, space), 1.0));
    }
    const double m8 = median_of(h8), m3 = median_of(h3);
    const bool ok = m8 <= m3;
    std::ostringstream detail;
    detail << "h=8 median " << fmt1(m8) << " <= h=3 median " << fmt1(m3)
           << " uniques-to-optimum; 50 paired seeds; " << fmt1(sw.seconds()) << "s";
    report(4, "height_ablation", ok, detail.str());
}

TEST_CASE("criterion 5: leaf ordering of the reference tree") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    const auto ref = build_reference_tree(space, enumerate_dataset(space, obj), 4);
    std::vector<double> idx, mean;
    for (int j = 0; j < ref.tree.leaf_count(); ++j) {
        if (ref.leaf_count[j] == 0) continue;
        idx.push_back(j);
        mean.push_back(ref.leaf_mean[j]);
    }
    const double rho = oracle::spearman(idx, mean);
    const bool order_ok = mean.front() > mean.back();
    const bool ok = rho <= -0.6 && order_ok;
    std::ostringstream detail;
    detail << "spearman(leaf index, leaf mean) = " << rho << " <= -0.6 required; leftmost mean "
           << mean.front() << " > rightmost " << mean.back() << "; " << idx.size()
           << " occupied leaves of 16; " << fmt1(sw.seconds()) << "s";
    report(5, "leaf_ordering", ok, detail.str());
}

TEST_CASE("criterion 6: eggholder comparative and partition orientation") {
    stopwatch sw;
    const auto egg = make_builtin_space(builtin_space::eggholder2d);
    const auto obj = make_eggholder_objective();
    std::vector<double> la, rnd;
    la_tree seed1_tree(1, 1);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        search_config cfg;
        cfg.height = 4;
        cfg.selects_per_relearn = 25;
        cfg.init_samples = 100;
        cfg.c = 100.0;
        cfg.budget = 500;
        cfg.seed = seed;
        const auto lt = lanas_search(cfg, obj, egg, nullptr, nullptr,
                                     seed == 1 ? &seed1_tree : nullptr);
        la.push_back(final_best(lt));
        rnd.push_back(final_best(random_search(egg, obj, 500, seed)));
    }
    const double ml = median_of(la), mr = median_of(rnd);

    // cell means of -f from the exported grid, leftmost vs rightmost occupied leaf
    const auto grid = partition_export(seed1_tree, egg, 64, &obj);
    std::map<int, std::pair<double, int>> by_leaf;  // leaf_index -> (sum, count)
    for (const auto& cell : grid.at("cells")) {
        auto& agg = by_leaf[cell.at("leaf_index").get<int>()];
        agg.first += cell.at("value").get<double>();
        agg.second += 1;
    }
    const auto& lm = *by_leaf.begin();
    const auto& rm = *by_leaf.rbegin();
    const double left_mean = lm.second.first / lm.second.second;
    const double right_mean = rm.second.first / rm.second.second;

    const bool ok = ml >= mr && left_mean > right_mean;
    std::ostringstream detail;
    detail << "lanas median best " << fmt1(ml) << " >= random " << fmt1(mr)
           << " at 500 evals, 20 seeds; leftmost leaf " << lm.first << " cell-mean "
           << fmt1(left_mean) << " > rightmost leaf " << rm.first << " cell-mean "
           << fmt1(right_mean) << "; " << fmt1(sw.seconds()) << "s";
    report(6, "eggholder", ok, detail.str());
}

TEST_CASE("criterion 7: KL dip between init and mid checkpoints") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    const auto ref = build_reference_tree(space, enumerate_dataset(space, obj), 4);
    int dips = 0;
    bool non_negative = true;
    double init_avg = 0.0, mid_avg = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = toy_search_config(4, seed);
        cfg.budget = 600;
        cfg.target.reset();
        const auto tr = lanas_search(cfg, obj, space);
        const auto res = kl_dynamics(tr, ref, {100, 300, 600});
        if (res[1].leaf_avg <= res[0].leaf_avg) ++dips;
        init_avg += res[0].leaf_avg;
        mid_avg += res[1].leaf_avg;
        for (const auto& cp : res)
            for (double kl : cp.leaf_kl) non_negative = non_negative && kl >= 0.0;
    }
    const bool ok = dips >= 12 && non_negative;
    std::ostringstream detail;
    detail << dips << "/20 seeds dip at the mid checkpoint (>= 12 required); mean leaf-avg KL "
           << init_avg / 20 << " at 100 -> " << mid_avg / 20 << " at 300; all KL >= 0: "
           << (non_negative ? "yes" : "no") << "; " << fmt1(sw.seconds()) << "s";
    report(7, "kl_dynamics", ok, detail.str());
}

TEST_CASE("criterion 8: leftmost occupancy bound diagnostic") {
    stopwatch sw;
    const auto space = make_builtin_space(builtin_space::convnet_toy);
    const auto obj = make_synthetic_objective(convnet_codebook::toy);
    const auto ref = build_reference_tree(space, enumerate_dataset(space, obj), 4);
    const auto rep = leftmost_bound_diagnostic(ref.tree);
    const bool finite = std::isfinite(rep.bound) && rep.n_total == 1364 &&
                        rep.leftmost_count >= 0 &&
                        rep.per_node_delta.size() == 4;
    const double spot1 = std::abs(leftmost_bound_value(0.0, 1024, 4) - 64.0);
    const double spot2 = std::abs(leftmost_bound_value(10.0, 100, 3) - 30.0);
    const bool ok = finite && spot1 <= 1e-12 && spot2 <= 1e-12;
    std::ostringstream detail;
    detail << "bound " << rep.bound << ", leftmost count " << rep.leftmost_count << " of "
           << rep.n_total << " (within: " << (rep.within ? "yes" : "no")
           << "); closed-form spots off by " << spot1 << " and " << spot2 << "; "
           << fmt1(sw.seconds()) << "s";
    report(8, "occupancy_bound", ok, detail.str());
}

TEST_CASE("criterion 9: determinism and trace schema") {
    stopwatch sw;
    const auto base = fs::temp_directory_path() / "lanas_acceptance_det";
    fs::remove_all(base);

    std::vector<experiment_config> cfgs;
    {
        experiment_config cfg;
        cfg.task = "convnet_toy";
        cfg.algorithm = "lanas";
        cfg.budget = 80;
        cfg.seeds = {1, 2, 3};
        cfg.lanas.height = 4;
        cfg.lanas.init_samples = 30;
        cfg.lanas.selects_per_relearn = 10;
        cfgs.push_back(cfg);
        cfg.algorithm = "random";
        cfg.seeds = {5, 6};
        cfgs.push_back(cfg);
        cfg.task = "eggholder";
        cfg.algorithm = "lanas";
        cfg.budget = 150;
        cfg.lanas.c = 100.0;
        cfg.lanas.sampler = sampler_kind::bayes;  // cover the surrogate path too
        cfg.lanas.bayes_pool = 100;
        cfgs.push_back(cfg);
    }

    bool identical = true, schema_ok = true;
    int files = 0;
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        auto a = cfgs[i];
        auto b = cfgs[i];
        a.out_dir = (base / ("cfg" + std::to_string(i) + "_a")).string();
        b.out_dir = (base / ("cfg" + std::to_string(i) + "_b")).string();
        run_experiment(a);
        run_experiment(b);
        const auto manifest = nlohmann::json::parse(
            std::ifstream(a.out_dir + "/manifest.json"), nullptr, true);
        for (const auto& group : {"traces", "trees"}) {
            for (const auto& f : manifest.at(group)) {
                const auto name = f.get<std::string>();
                std::ifstream fa(a.out_dir + "/" + name, std::ios::binary);
                std::ifstream fb(b.out_dir + "/" + name, std::ios::binary);
                std::ostringstream sa, sb;
                sa << fa.rdbuf();
                sb << fb.rdbuf();
                identical = identical && !sa.str().empty() && sa.str() == sb.str();
                ++files;
            }
        }
        for (const auto& f : manifest.at("traces"))
            schema_ok = schema_ok &&
                        !validate_trace_file(a.out_dir + "/" + f.get<std::string>()).has_value();
    }
    const bool ok = identical && schema_ok && files >= 10;
    std::ostringstream detail;
    detail << files << " files byte-identical across reruns of 3 configs: "
           << (identical ? "yes" : "no") << "; every trace line validates: "
           << (schema_ok ? "yes" : "no") << "; " << fmt1(sw.seconds()) << "s";
    report(9, "determinism_schema", ok, detail.str());
}
