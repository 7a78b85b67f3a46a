#include "lanas/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lanas::io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw lanas::config_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

void cmd_run(const std::string& config_path, const std::string& out_override) {
    auto cfg = lanas::experiment_config_from_json(load_json(config_path));
    if (!out_override.empty()) cfg.out_dir = out_override;
    lanas::run_experiment(cfg);
    std::cout << "wrote " << cfg.out_dir << "/manifest.json\n";
}

void cmd_viz(const std::string& tree_path, int grid, std::string out_path) {
    const auto j = load_json(tree_path);
    if (!j.contains("tree") || !j.contains("space"))
        throw lanas::config_error("tree snapshot needs 'space' and 'tree' members");
    const auto space = lanas::space_from_json(j.at("space"));
    const auto tree = lanas::tree_from_json(j.at("tree"));

    std::optional<lanas::objective> obj;
    if (space.name == "eggholder2d") obj = lanas::make_eggholder_objective();
    const auto out = lanas::partition_export(tree, space, grid, obj ? &*obj : nullptr);

    if (out_path.empty())
        out_path = tree_path + ".partition_grid" + std::to_string(grid) + ".json";
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw lanas::io_error("cannot write " + out_path);
    f << out.dump() << "\n";
    if (!f) throw lanas::io_error("write failed: " + out_path);
    std::cout << "wrote " << out_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-action tree search: experiments and analysis"};
    app.require_subcommand(1);

    std::string config_path, run_out;
    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--out", run_out, "override the config's output directory");

    std::string analyze_dir;
    auto* analyze = app.add_subcommand("analyze", "analyze a run directory");
    analyze->require_subcommand(1);
    auto* regret = analyze->add_subcommand("regret", "regret curve -> regret.csv");
    auto* cdf = analyze->add_subcommand("cdf", "CDF of best-at-budget -> cdf.csv");
    auto* kl = analyze->add_subcommand("kl", "KL vs reference tree -> kl.csv");
    auto* ablation = analyze->add_subcommand("ablation", "sweep summary -> ablation.csv");
    for (auto* sub : {regret, cdf, kl, ablation})
        sub->add_option("--in", analyze_dir, "run directory")->required();

    std::string tree_path, viz_out;
    int grid = 64;
    auto* viz = app.add_subcommand("viz-partition", "export leaf assignments on a grid");
    viz->add_option("--tree", tree_path, "tree snapshot JSON")->required();
    viz->add_option("--grid", grid, "grid resolution")->required();
    viz->add_option("--out", viz_out, "output path");

    auto* spaces = app.add_subcommand("spaces", "search-space utilities");
    spaces->require_subcommand(1);
    auto* spaces_list = spaces->add_subcommand("list", "list builtin spaces as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) {
            cmd_run(config_path, run_out);
        } else if (*regret) {
            lanas::analyze_regret(analyze_dir);
            std::cout << "wrote " << analyze_dir << "/regret.csv\n";
        } else if (*cdf) {
            lanas::analyze_cdf(analyze_dir);
            std::cout << "wrote " << analyze_dir << "/cdf.csv\n";
        } else if (*kl) {
            lanas::analyze_kl(analyze_dir);
            std::cout << "wrote " << analyze_dir << "/kl.csv\n";
        } else if (*ablation) {
            lanas::analyze_ablation(analyze_dir);
            std::cout << "wrote " << analyze_dir << "/ablation.csv\n";
        } else if (*viz)
            cmd_viz(tree_path, grid, viz_out);
        else if (*spaces_list)
            std::cout << lanas::spaces_list_json().dump(2) << "\n";
    } catch (const lanas::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lanas::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
