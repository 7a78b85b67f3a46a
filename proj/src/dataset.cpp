#include "lanas/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lanas {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

tabular_benchmark load_tabular(const std::string& path, const search_space_spec& space,
                               missing_policy missing) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tabular file: " + path);
    tabular_benchmark bench;
    bench.space = space;
    bench.missing = missing;

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty tabular file: " + path);
    const auto header = split_csv_line(line);
    const int d = space.dim_count();
    bool header_ok = static_cast<int>(header.size()) == d + 1 && header.back() == "metric";
    for (int i = 0; header_ok && i < d; ++i) header_ok = header[i] == "d" + std::to_string(i);
    if (!header_ok)
        throw std::runtime_error("tabular header must be d0,...,d" + std::to_string(d - 1) +
                                 ",metric");

    double best = -std::numeric_limits<double>::infinity();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != d + 1)
            throw std::runtime_error("tabular row " + std::to_string(line_no) + ": expected " +
                                     std::to_string(d + 1) + " columns, got " +
                                     std::to_string(cells.size()));
        encoding e(d);
        double metric;
        try {
            for (int i = 0; i < d; ++i) e[i] = std::stod(cells[i]);
            metric = std::stod(cells[d]);
        } catch (const std::exception&) {
            throw std::runtime_error("tabular row " + std::to_string(line_no) +
                                     ": malformed number");
        }
        if (!is_valid(space, e))
            throw std::runtime_error("tabular row " + std::to_string(line_no) +
                                     ": encoding not valid in space " + space.name);
        const auto key = encoding_key(e);
        const auto it = bench.rows.find(key);
        if (it != bench.rows.end()) {
            if (it->second.second != metric)
                throw std::runtime_error("tabular row " + std::to_string(line_no) +
                                         ": duplicate key with conflicting metric");
            continue;
        }
        bench.rows.emplace(key, std::make_pair(std::move(e), metric));
        best = std::max(best, metric);
    }
    if (bench.rows.empty()) throw std::runtime_error("tabular file has no rows: " + path);
    bench.v_star = best;
    return bench;
}

tabular_benchmark load_nasbench_like(const std::string& path, missing_policy missing) {
    return load_tabular(path, make_builtin_space(builtin_space::nasbench_like), missing);
}

void save_tabular(const tabular_benchmark& bench, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tabular file: " + path);
    const int d = bench.space.dim_count();
    for (int i = 0; i < d; ++i) out << "d" << i << ",";
    out << "metric\n";
    out.precision(17);
    for (const auto& [key, row] : bench.rows) {
        for (int i = 0; i < d; ++i) out << row.first[i] << ",";
        out << row.second << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

measurement evaluate(const tabular_benchmark& bench, const encoding& e, eval_ledger& ledger) {
    if (!is_valid(bench.space, e))
        throw std::invalid_argument("evaluate: encoding not valid in " + bench.space.name);
    const auto key = encoding_key(e);
    const auto it = bench.rows.find(key);
    measurement m;
    m.e = e;
    if (it != bench.rows.end()) {
        m.metric = it->second.second;
        m.valid = true;
    } else if (bench.missing == missing_policy::floor_zero) {
        m.metric = 0.0;
        m.valid = false;
    } else {
        ledger.record(key, false);
        throw std::runtime_error("evaluate: key absent under missing_policy::error");
    }
    ledger.record(key, m.valid);
    return m;
}

const std::vector<convnet_code>& convnet_code_table(convnet_codebook book) {
    // toy codes ascend in objective quality (see synthetic metric weights)
    static const std::vector<convnet_code> toy{
        {0.2, 5, 32}, {0.4, 3, 32}, {0.6, 5, 64}, {0.8, 3, 64}};
    static const std::vector<convnet_code> appendix{
        {0.1, 3, 32}, {0.2, 3, 64}, {0.3, 3, 96}, {0.4, 5, 32}, {0.5, 5, 64},
        {0.6, 5, 96}, {0.7, 7, 32}, {0.8, 7, 64}, {0.9, 7, 96}};
    return book == convnet_codebook::toy ? toy : appendix;
}

double convnet_pad_code() { return 1.0; }

namespace {

const convnet_code& lookup_code(double v, convnet_codebook book) {
    for (const auto& c : convnet_code_table(book))
        if (c.code == v) return c;
    throw std::invalid_argument("unknown convnet code value");
}

double filter_rank(int channels, convnet_codebook book) {
    // rank of the channel count among the codebook's options, in [0,1]
    const int max_rank = book == convnet_codebook::toy ? 1 : 2;
    const int rank = channels == 32 ? 0 : channels == 64 ? 1 : 2;
    return static_cast<double>(rank) / max_rank;
}

double kernel_pref(int kernel, convnet_codebook book) {
    // 3x3 is preferred over larger kernels
    if (book == convnet_codebook::toy) return kernel == 3 ? 1.0 : 0.0;
    return kernel == 3 ? 1.0 : kernel == 5 ? 0.5 : 0.0;
}

}  // namespace

double synthetic_convnet_metric(const encoding& e, convnet_codebook book) {
    const double pad = convnet_pad_code();
    const int slots = static_cast<int>(e.size());
    if (slots == 0) throw std::invalid_argument("empty encoding");
    int depth = 0;
    while (depth < slots && e[depth] != pad) ++depth;
    for (int i = depth; i < slots; ++i)
        if (e[i] != pad) throw std::invalid_argument("real layer after an empty slot");
    if (depth == 0) return 0.0;

    double fr = 0.0, kp = 0.0;
    for (int i = 0; i < depth; ++i) {
        const auto& c = lookup_code(e[i], book);
        fr += filter_rank(c.channels, book);
        kp += kernel_pref(c.kernel, book);
    }
    fr /= depth;
    kp /= depth;
    return 0.5 * (static_cast<double>(depth) / slots) + 0.4 * fr + 0.1 * kp;
}

double eggholder(const encoding& e) {
    if (e.size() != 2) throw std::invalid_argument("eggholder expects a 2-dim encoding");
    const double x = e[0], y = e[1];
    return -(y + 47.0) * std::sin(std::sqrt(std::abs(x / 2.0 + y + 47.0))) -
           x * std::sin(std::sqrt(std::abs(x - (y + 47.0))));
}

double eggholder_grid_v_star() {
    static const double cached = [] {
        const int n = 2049;
        double best = -std::numeric_limits<double>::infinity();
        encoding e(2);
        for (int i = 0; i < n; ++i) {
            e[0] = -512.0 + 1024.0 * i / (n - 1);
            for (int j = 0; j < n; ++j) {
                e[1] = -512.0 + 1024.0 * j / (n - 1);
                best = std::max(best, -eggholder(e));
            }
        }
        return best;
    }();
    return cached;
}

objective make_synthetic_objective(convnet_codebook book) {
    objective obj;
    obj.fn = [book](const encoding& e) {
        return std::make_pair(synthetic_convnet_metric(e, book), true);
    };
    obj.v_star = 1.0;
    return obj;
}

objective make_tabular_objective(const tabular_benchmark& bench) {
    objective obj;
    obj.fn = [&bench](const encoding& e) {
        const auto key = encoding_key(e);
        const auto it = bench.rows.find(key);
        if (it != bench.rows.end()) return std::make_pair(it->second.second, true);
        if (bench.missing == missing_policy::error)
            throw std::runtime_error("objective: key absent under missing_policy::error");
        return std::make_pair(0.0, false);
    };
    obj.v_star = bench.v_star;
    return obj;
}

objective make_eggholder_objective() {
    objective obj;
    obj.fn = [](const encoding& e) { return std::make_pair(-eggholder(e), true); };
    obj.v_star = eggholder_grid_v_star();
    return obj;
}

}  // namespace lanas
