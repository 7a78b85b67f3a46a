#include "lanas/space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lanas {

dimension dimension::categorical(std::vector<double> codes) {
    if (codes.empty()) throw std::invalid_argument("categorical dimension needs at least one code");
    std::set<double> uniq(codes.begin(), codes.end());
    if (uniq.size() != codes.size())
        throw std::invalid_argument("categorical codes must be distinct");
    dimension d;
    d.kind = dim_kind::categorical;
    d.codes = std::move(codes);
    return d;
}

dimension dimension::continuous(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("continuous dimension needs lo < hi");
    dimension d;
    d.kind = dim_kind::continuous;
    d.lo = lo;
    d.hi = hi;
    return d;
}

bool search_space_spec::finite() const {
    return std::all_of(dims.begin(), dims.end(),
                       [](const dimension& d) { return d.kind == dim_kind::categorical; });
}

namespace {

search_space_spec make_convnet(const std::string& name, int slots,
                               std::vector<double> codes_with_pad) {
    search_space_spec s;
    s.name = name;
    s.pad_code = codes_with_pad.back();
    s.metric_range_hint = {0.0, 1.0};
    for (int i = 0; i < slots; ++i) s.dims.push_back(dimension::categorical(codes_with_pad));
    return s;
}

// valid depths for a padded space: 1..#slots (the all-empty tuple is not a
// valid encoding)
int pad_depth(const search_space_spec& space, const encoding& e) {
    const double pad = *space.pad_code;
    int depth = 0;
    while (depth < e.size() && e[depth] != pad) ++depth;
    return depth;
}

int real_code_count(const dimension& d, double pad) {
    int k = 0;
    for (double c : d.codes)
        if (c != pad) ++k;
    return k;
}

}  // namespace

search_space_spec make_builtin_space(builtin_space which) {
    switch (which) {
        case builtin_space::convnet_toy:
            // codes ordered by objective quality so linear splits see
            // monotone inputs: 0.2=(5x5,32) 0.4=(3x3,32) 0.6=(5x5,64)
            // 0.8=(3x3,64), 1.0 = empty slot
            return make_convnet("convnet_toy", 5, {0.2, 0.4, 0.6, 0.8, 1.0});
        case builtin_space::convnet_appendix:
            return make_convnet("convnet_appendix", 5,
                                {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
        case builtin_space::nasbench_like: {
            search_space_spec s;
            s.name = "nasbench_like";
            s.metric_range_hint = {0.0, 1.0};
            for (int i = 0; i < 21; ++i) s.dims.push_back(dimension::categorical({0.0, 1.0}));
            for (int i = 0; i < 5; ++i) s.dims.push_back(dimension::categorical({0.0, 1.0, 2.0}));
            return s;
        }
        case builtin_space::eggholder2d: {
            search_space_spec s;
            s.name = "eggholder2d";
            s.dims = {dimension::continuous(-512.0, 512.0), dimension::continuous(-512.0, 512.0)};
            // observed range of -f on a dense grid; drives the UCB scale
            s.metric_range_hint = {-1050.0, 960.0};
            return s;
        }
    }
    throw std::invalid_argument("unknown builtin space");
}

search_space_spec make_builtin_space(const std::string& name) {
    if (name == "convnet_toy") return make_builtin_space(builtin_space::convnet_toy);
    if (name == "convnet_appendix") return make_builtin_space(builtin_space::convnet_appendix);
    if (name == "nasbench_like") return make_builtin_space(builtin_space::nasbench_like);
    if (name == "eggholder2d") return make_builtin_space(builtin_space::eggholder2d);
    throw std::invalid_argument("unknown builtin space: " + name);
}

std::vector<std::string> builtin_space_names() {
    return {"convnet_toy", "convnet_appendix", "nasbench_like", "eggholder2d"};
}

std::optional<std::uint64_t> space_size(const search_space_spec& space) {
    if (!space.finite()) return std::nullopt;
    if (!space.padded()) {
        std::uint64_t n = 1;
        for (const auto& d : space.dims) n *= static_cast<std::uint64_t>(d.codes.size());
        return n;
    }
    // prefix-padded: sum over depths of the product of real-code counts
    const double pad = *space.pad_code;
    std::uint64_t total = 0, prefix = 1;
    for (const auto& d : space.dims) {
        prefix *= static_cast<std::uint64_t>(real_code_count(d, pad));
        total += prefix;
    }
    return total;
}

bool is_valid(const search_space_spec& space, const encoding& e) {
    if (e.size() != space.dim_count()) return false;
    for (int i = 0; i < e.size(); ++i) {
        const auto& d = space.dims[i];
        if (d.kind == dim_kind::continuous) {
            if (!(e[i] >= d.lo && e[i] <= d.hi)) return false;
        } else if (std::find(d.codes.begin(), d.codes.end(), e[i]) == d.codes.end()) {
            return false;
        }
    }
    if (space.padded()) {
        const int depth = pad_depth(space, e);
        if (depth == 0) return false;
        for (int i = depth; i < e.size(); ++i)
            if (e[i] != *space.pad_code) return false;
    }
    return true;
}

encoding sample_uniform(const search_space_spec& space, rng_t& rng) {
    const int n = space.dim_count();
    encoding e(n);
    if (!space.padded()) {
        for (int i = 0; i < n; ++i) {
            const auto& d = space.dims[i];
            if (d.kind == dim_kind::continuous) {
                e[i] = std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, d.codes.size() - 1);
                e[i] = d.codes[pick(rng)];
            }
        }
        return e;
    }
    const double pad = *space.pad_code;
    // depth weighted by the number of encodings it carries -> uniform over
    // the valid set
    std::vector<double> cum;
    double prefix = 1.0, total = 0.0;
    for (const auto& d : space.dims) {
        prefix *= real_code_count(d, pad);
        total += prefix;
        cum.push_back(total);
    }
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    int depth = 1;
    while (depth < n && u >= cum[depth - 1]) ++depth;
    for (int i = 0; i < n; ++i) {
        if (i >= depth) {
            e[i] = pad;
            continue;
        }
        std::vector<double> real;
        for (double c : space.dims[i].codes)
            if (c != pad) real.push_back(c);
        std::uniform_int_distribution<std::size_t> pick(0, real.size() - 1);
        e[i] = real[pick(rng)];
    }
    return e;
}

encoding mutate(const search_space_spec& space, const encoding& e, rng_t& rng) {
    if (!is_valid(space, e)) throw std::invalid_argument("mutate: encoding not valid in space");
    const int n = space.dim_count();
    encoding out = e;
    std::uniform_int_distribution<int> pick_dim(0, n - 1);
    const int i = pick_dim(rng);
    const auto& d = space.dims[i];

    if (d.kind == dim_kind::continuous) {
        double v;
        do {
            v = std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
        } while (v == e[i]);
        out[i] = v;
        return out;
    }

    std::vector<double> alt;
    for (double c : d.codes)
        if (c != e[i]) alt.push_back(c);
    if (space.padded() && i == 0) {
        // slot 0 may not become empty: the all-empty tuple is invalid
        std::erase(alt, *space.pad_code);
    }
    if (alt.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, alt.size() - 1);
    out[i] = alt[pick(rng)];

    if (space.padded()) {
        const double pad = *space.pad_code;
        if (out[i] == pad) {
            for (int j = i + 1; j < n; ++j) out[j] = pad;
        } else {
            // fill any empty slot before i with a uniform real code
            for (int j = 0; j < i; ++j) {
                if (out[j] != pad) continue;
                std::vector<double> real;
                for (double c : space.dims[j].codes)
                    if (c != pad) real.push_back(c);
                std::uniform_int_distribution<std::size_t> pr(0, real.size() - 1);
                out[j] = real[pr(rng)];
            }
        }
    }
    return out;
}

namespace {

void enumerate_rec(const search_space_spec& space, int dim, int depth, encoding& cur,
                   std::vector<encoding>& out) {
    if (dim == space.dim_count()) {
        out.push_back(cur);
        return;
    }
    if (space.padded() && dim >= depth) {
        cur[dim] = *space.pad_code;
        enumerate_rec(space, dim + 1, depth, cur, out);
        return;
    }
    for (double c : space.dims[dim].codes) {
        if (space.padded() && c == *space.pad_code) continue;
        cur[dim] = c;
        enumerate_rec(space, dim + 1, depth, cur, out);
    }
}

}  // namespace

std::vector<encoding> enumerate_space(const search_space_spec& space, std::uint64_t max_count) {
    const auto n = space_size(space);
    if (!n) throw std::invalid_argument("enumerate_space: space is not finite");
    if (*n > max_count)
        throw std::invalid_argument("enumerate_space: space too large to enumerate");
    std::vector<encoding> out;
    out.reserve(*n);
    encoding cur(space.dim_count());
    if (space.padded()) {
        for (int depth = 1; depth <= space.dim_count(); ++depth)
            enumerate_rec(space, 0, depth, cur, out);
    } else {
        enumerate_rec(space, 0, space.dim_count(), cur, out);
    }
    return out;
}

std::string encoding_key(const encoding& e) {
    std::string key;
    key.reserve(static_cast<std::size_t>(e.size()) * 10);
    for (int i = 0; i < e.size(); ++i) {
        if (i) key.push_back(',');
        key += std::to_string(std::llround(e[i] * 1e6));
    }
    return key;
}

nlohmann::json space_to_json(const search_space_spec& space) {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : space.dims) {
        if (d.kind == dim_kind::categorical)
            dims.push_back({{"kind", "categorical"}, {"codes", d.codes}});
        else
            dims.push_back({{"kind", "continuous"}, {"lo", d.lo}, {"hi", d.hi}});
    }
    nlohmann::json j{{"name", space.name}, {"dims", dims}};
    if (space.metric_range_hint)
        j["metric_range_hint"] = {space.metric_range_hint->first, space.metric_range_hint->second};
    if (space.pad_code) j["pad_code"] = *space.pad_code;
    return j;
}

search_space_spec space_from_json(const nlohmann::json& j) {
    search_space_spec s;
    s.name = j.at("name").get<std::string>();
    for (const auto& dj : j.at("dims")) {
        const auto kind = dj.at("kind").get<std::string>();
        if (kind == "categorical")
            s.dims.push_back(dimension::categorical(dj.at("codes").get<std::vector<double>>()));
        else if (kind == "continuous")
            s.dims.push_back(
                dimension::continuous(dj.at("lo").get<double>(), dj.at("hi").get<double>()));
        else
            throw std::invalid_argument("unknown dimension kind: " + kind);
    }
    if (s.dims.empty()) throw std::invalid_argument("space needs at least one dimension");
    if (j.contains("metric_range_hint")) {
        const auto& h = j.at("metric_range_hint");
        s.metric_range_hint = {h.at(0).get<double>(), h.at(1).get<double>()};
    }
    if (j.contains("pad_code")) s.pad_code = j.at("pad_code").get<double>();
    return s;
}

}  // namespace lanas
