#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lanas/harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace lanas;
namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    const char* p = std::getenv("LANAS_CLI");
    REQUIRE_MESSAGE(p != nullptr, "LANAS_CLI must point at the CLI binary (ctest sets it)");
    return p;
}

fs::path work_dir(const std::string& leaf) {
    const auto dir = fs::temp_directory_path() / "lanas_test_cli" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct cli_result {
    int code = -1;
    std::string out;
};

cli_result run_cli(const std::string& args, const fs::path& dir) {
    const auto out_file = dir / "stdout.txt";
    const auto cmd =
        "'" + cli_binary() + "' " + args + " > '" + out_file.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    cli_result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2);
}

nlohmann::json toy_config(const fs::path& out_dir) {
    return nlohmann::json{{"task", "convnet_toy"},
                          {"algorithm", "lanas"},
                          {"budget", 40},
                          {"seeds", {1, 2}},
                          {"out_dir", out_dir.string()},
                          {"params", {{"height", 3}, {"init", 15}, {"selects", 10}}}};
}

}  // namespace

TEST_CASE("spaces list prints the catalog and exits cleanly") {
    const auto dir = work_dir("spaces");
    const auto r = run_cli("spaces list", dir);
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j.is_array());
    CHECK(j.size() == 4);
}

TEST_CASE("help and parse errors") {
    const auto dir = work_dir("parse");
    CHECK(run_cli("--help", dir).code == 0);
    CHECK(run_cli("", dir).code == 2);            // a subcommand is required
    CHECK(run_cli("frobnicate", dir).code == 2);  // unknown subcommand
    CHECK(run_cli("run", dir).code == 2);         // missing --config
    CHECK(run_cli("analyze regret", dir).code == 2);
}

TEST_CASE("run executes a config and writes the output tree") {
    const auto dir = work_dir("run");
    const auto out = dir / "out";
    write_json(dir / "cfg.json", toy_config(out));
    const auto r = run_cli("run --config '" + (dir / "cfg.json").string() + "'", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("manifest.json") != std::string::npos);
    REQUIRE(fs::exists(out / "manifest.json"));
    REQUIRE(fs::exists(out / "trace_seed1.jsonl"));
    REQUIRE(fs::exists(out / "trace_seed2.jsonl"));
    CHECK_FALSE(validate_trace_file((out / "trace_seed1.jsonl").string()).has_value());

    // --out overrides the config's directory
    const auto out2 = dir / "other";
    const auto r2 = run_cli("run --config '" + (dir / "cfg.json").string() + "' --out '" +
                                out2.string() + "'",
                            dir);
    CHECK(r2.code == 0);
    CHECK(fs::exists(out2 / "manifest.json"));
}

TEST_CASE("run distinguishes config errors from io errors") {
    const auto dir = work_dir("run_err");
    auto bad = toy_config(dir / "out");
    bad["algorithm"] = "sgd";
    write_json(dir / "bad.json", bad);
    CHECK(run_cli("run --config '" + (dir / "bad.json").string() + "'", dir).code == 2);
    CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));

    std::ofstream(dir / "syntax.json") << "{ not json";
    CHECK(run_cli("run --config '" + (dir / "syntax.json").string() + "'", dir).code == 2);

    CHECK(run_cli("run --config '" + (dir / "missing.json").string() + "'", dir).code == 3);

    auto tab = toy_config(dir / "out_t");
    tab["task"] = "tabular:" + (dir / "no_such.csv").string();
    write_json(dir / "tab.json", tab);
    CHECK(run_cli("run --config '" + (dir / "tab.json").string() + "'", dir).code == 3);
}

TEST_CASE("analyze subcommands emit csv files") {
    const auto dir = work_dir("analyze");
    const auto out = dir / "out";
    write_json(dir / "cfg.json", toy_config(out));
    REQUIRE(run_cli("run --config '" + (dir / "cfg.json").string() + "'", dir).code == 0);

    CHECK(run_cli("analyze regret --in '" + out.string() + "'", dir).code == 0);
    CHECK(fs::exists(out / "regret.csv"));
    CHECK(run_cli("analyze cdf --in '" + out.string() + "'", dir).code == 0);
    CHECK(fs::exists(out / "cdf.csv"));
    CHECK(run_cli("analyze kl --in '" + out.string() + "'", dir).code == 0);
    CHECK(fs::exists(out / "kl.csv"));
    CHECK(fs::exists(out / "kl_leaves.csv"));

    CHECK(run_cli("analyze ablation --in '" + out.string() + "'", dir).code == 2);
    CHECK(run_cli("analyze regret --in '" + (dir / "nowhere").string() + "'", dir).code == 3);
}

TEST_CASE("analyze ablation summarizes a sweep directory") {
    const auto dir = work_dir("ablation");
    const auto out = dir / "sweep";
    auto cfg = toy_config(out);
    cfg["ablation"] = {{"axis", "height"}, {"values", {2, 3}}};
    write_json(dir / "cfg.json", cfg);
    REQUIRE(run_cli("run --config '" + (dir / "cfg.json").string() + "'", dir).code == 0);
    REQUIRE(fs::exists(out / "height_2" / "manifest.json"));
    REQUIRE(fs::exists(out / "height_3" / "manifest.json"));
    CHECK(run_cli("analyze ablation --in '" + out.string() + "'", dir).code == 0);
    CHECK(fs::exists(out / "ablation.csv"));
    // per-value analysis still works on the leaf directories
    CHECK(run_cli("analyze regret --in '" + (out / "height_2").string() + "'", dir).code == 0);
}

TEST_CASE("viz-partition rasterizes a saved tree") {
    const auto dir = work_dir("viz");
    const auto out = dir / "egg";
    nlohmann::json cfg{{"task", "eggholder"},
                       {"algorithm", "lanas"},
                       {"budget", 120},
                       {"seeds", {3}},
                       {"out_dir", out.string()},
                       {"params", {{"height", 3}, {"init", 60}, {"selects", 20}, {"c", 100.0}}}};
    write_json(dir / "cfg.json", cfg);
    REQUIRE(run_cli("run --config '" + (dir / "cfg.json").string() + "'", dir).code == 0);
    const auto tree = out / "tree_seed3.json";
    REQUIRE(fs::exists(tree));

    const auto r = run_cli("viz-partition --tree '" + tree.string() + "' --grid 8", dir);
    CHECK(r.code == 0);
    const auto grid_file = tree.string() + ".partition_grid8.json";
    REQUIRE(fs::exists(grid_file));
    std::ifstream in(grid_file);
    nlohmann::json g;
    in >> g;
    CHECK(g.at("grid") == 8);
    CHECK(g.at("cells").size() == 64);
    CHECK(g.at("cells").at(0).contains("value"));  // eggholder values fill the grid

    const auto custom = (dir / "grid.json").string();
    CHECK(run_cli("viz-partition --tree '" + tree.string() + "' --grid 4 --out '" + custom + "'",
                  dir)
              .code == 0);
    CHECK(fs::exists(custom));

    CHECK(run_cli("viz-partition --tree '" + (dir / "none.json").string() + "' --grid 8", dir)
              .code == 3);
    write_json(dir / "stub.json", nlohmann::json{{"space", nullptr}});
    CHECK(run_cli("viz-partition --tree '" + (dir / "stub.json").string() + "' --grid 8", dir)
              .code == 2);
}

TEST_CASE("viz-partition rejects trees over non 2-D spaces") {
    const auto dir = work_dir("viz_5d");
    const auto out = dir / "toy";
    write_json(dir / "cfg.json", toy_config(out));
    REQUIRE(run_cli("run --config '" + (dir / "cfg.json").string() + "'", dir).code == 0);
    const auto tree = out / "tree_seed1.json";
    REQUIRE(fs::exists(tree));
    CHECK(run_cli("viz-partition --tree '" + tree.string() + "' --grid 8", dir).code == 2);
}
