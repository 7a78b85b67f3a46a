#include "lanas/baselines.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace lanas {

namespace {

struct base_run {
    search_trace trace;
    eval_ledger ledger;
    std::optional<double> best;
    bool stop = false;
    std::uint64_t query_cap;
    std::int64_t budget;
    std::optional<double> target;

    measurement eval(const objective& obj, const encoding& e, bool fallback = false) {
        const auto [metric, valid] = obj.fn(e);
        ledger.record(encoding_key(e), valid);
        measurement m{e, metric, valid, static_cast<int>(trace.entries.size())};
        if (valid && (!best || metric > *best)) best = metric;
        trace.entries.push_back({m.step, e, metric, valid, best, ledger.unique_valid(), fallback});
        if (target && best && *best >= *target - 1e-12) stop = true;
        if (ledger.unique_valid() >= static_cast<std::uint64_t>(budget)) stop = true;
        if (ledger.total_queries() >= query_cap) stop = true;
        return m;
    }
};

}  // namespace

search_trace random_search(const search_space_spec& space, const objective& obj,
                           std::int64_t budget, std::uint64_t seed, bool dedup,
                           std::optional<double> target, eval_ledger* ledger_out,
                           int max_reject_tries) {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    rng_t rng(seed);
    base_run st;
    st.budget = budget;
    st.target = target;
    st.query_cap = 50ull * static_cast<std::uint64_t>(budget);
    st.trace.header = {{"algorithm", "random"},
                       {"space", space.name},
                       {"seed", seed},
                       {"config", {{"budget", budget}, {"dedup", dedup}, {"seed", seed}}}};
    std::optional<std::vector<encoding>> enum_cache;
    while (!st.stop) {
        std::optional<encoding> e;
        if (dedup) {
            e = propose_uniform_unseen(space, rng, max_reject_tries, st.ledger.seen_keys(),
                                       enum_cache);
        } else {
            e = sample_uniform(space, rng);
        }
        if (!e) break;  // exhausted
        st.eval(obj, *e);
    }
    if (ledger_out) *ledger_out = st.ledger;
    return st.trace;
}

search_trace regularized_evolution(const search_space_spec& space, const objective& obj,
                                   std::int64_t budget, std::uint64_t seed, int population,
                                   int tournament, std::optional<double> target,
                                   eval_ledger* ledger_out) {
    if (population < 2) throw std::invalid_argument("population must be >= 2");
    if (tournament < 1) throw std::invalid_argument("tournament must be >= 1");
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    rng_t rng(seed);
    base_run st;
    st.budget = budget;
    st.target = target;
    st.query_cap = 50ull * static_cast<std::uint64_t>(budget);
    st.trace.header = {{"algorithm", "re"},
                       {"space", space.name},
                       {"seed", seed},
                       {"config",
                        {{"budget", budget},
                         {"population", population},
                         {"tournament", tournament},
                         {"seed", seed}}}};

    std::deque<std::pair<encoding, double>> pop;
    for (int i = 0; i < population && !st.stop; ++i) {
        const encoding e = sample_uniform(space, rng);
        const auto m = st.eval(obj, e);
        pop.emplace_back(e, m.metric);
    }
    while (!st.stop) {
        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        std::size_t best_i = pick(rng);
        for (int t = 1; t < tournament; ++t) {
            const std::size_t i = pick(rng);
            if (pop[i].second > pop[best_i].second) best_i = i;
        }
        const encoding child = mutate(space, pop[best_i].first, rng);
        const auto m = st.eval(obj, child);
        pop.emplace_back(child, m.metric);
        if (static_cast<int>(pop.size()) > population) pop.pop_front();
    }
    if (ledger_out) *ledger_out = st.ledger;
    return st.trace;
}

action_space_adapter::action_space_adapter(kind_t kind, const search_space_spec& space)
    : kind_(kind), space_(space) {
    if (space.name == "convnet_toy")
        book_ = convnet_codebook::toy;
    else if (space.name == "convnet_appendix")
        book_ = convnet_codebook::appendix;
    else
        throw std::invalid_argument("action adapter supports only the convnet spaces, got " +
                                    space.name);
    slots_ = space.dim_count();
    for (const auto& c : convnet_code_table(book_)) {
        if (std::find(kernels_.begin(), kernels_.end(), c.kernel) == kernels_.end())
            kernels_.push_back(c.kernel);
        if (std::find(channels_.begin(), channels_.end(), c.channels) == channels_.end())
            channels_.push_back(c.channels);
    }
    std::sort(kernels_.begin(), kernels_.end());
    std::sort(channels_.begin(), channels_.end());
}

action_space_adapter make_action_adapter(const search_space_spec& space,
                                         action_space_adapter::kind_t kind) {
    return action_space_adapter(kind, space);
}

int action_space_adapter::num_actions(const std::vector<int>& prefix) const {
    if (kind_ == kind_t::global) {
        if (prefix.empty()) return slots_;  // choose depth 1..slots
        const int depth = prefix[0] + 1;
        const int pos = static_cast<int>(prefix.size()) - 1;
        if (pos < depth) return static_cast<int>(kernels_.size());
        if (pos < 2 * depth) return static_cast<int>(channels_.size());
        return 0;
    }
    const auto s = parse_sequential(prefix);
    if (s.phase == 3 || (s.phase == 0 && s.layers == slots_)) return 0;
    if (s.phase == 1) return static_cast<int>(kernels_.size());
    if (s.phase == 2) return static_cast<int>(channels_.size());
    return s.layers == 0 ? 1 : 2;  // must add the first layer; later: add or stop
}

action_space_adapter::seq_state action_space_adapter::parse_sequential(
    const std::vector<int>& prefix) const {
    seq_state s;
    for (int a : prefix) {
        switch (s.phase) {
            case 0:
                if (a == 0)
                    s.phase = 1;
                else
                    s.phase = 3;
                break;
            case 1:
                s.phase = 2;
                break;
            case 2:
                s.phase = 0;
                s.layers += 1;
                break;
            default:
                throw std::invalid_argument("action after stop");
        }
    }
    return s;
}

encoding action_space_adapter::decode(const std::vector<int>& complete) const {
    if (!terminal(complete)) throw std::invalid_argument("decode: sequence not complete");
    const double pad = convnet_pad_code();
    encoding e = encoding::Constant(slots_, pad);
    auto code_for = [&](int kernel, int channels) {
        for (const auto& c : convnet_code_table(book_))
            if (c.kernel == kernel && c.channels == channels) return c.code;
        throw std::logic_error("no code for kernel/channel combination");
    };
    if (kind_ == kind_t::global) {
        const int depth = complete[0] + 1;
        for (int l = 0; l < depth; ++l)
            e[l] = code_for(kernels_[complete[1 + l]], channels_[complete[1 + depth + l]]);
        return e;
    }
    int layer = 0;
    std::size_t i = 0;
    while (i < complete.size()) {
        if (complete[i] == 1) break;  // stop
        const int k = kernels_[complete[i + 1]];
        const int ch = channels_[complete[i + 2]];
        e[layer++] = code_for(k, ch);
        i += 3;
    }
    return e;
}

std::vector<encoding> action_space_adapter::enumerate_all() const {
    std::vector<encoding> out;
    std::vector<int> prefix;
    auto walk = [&](auto&& self) -> void {
        const int k = num_actions(prefix);
        if (k == 0) {
            out.push_back(decode(prefix));
            return;
        }
        for (int a = 0; a < k; ++a) {
            prefix.push_back(a);
            self(self);
            prefix.pop_back();
        }
    };
    walk(walk);
    return out;
}

namespace {

struct mcts_node {
    std::vector<int> prefix;
    int parent = -1;
    std::vector<int> children;       // node ids
    std::vector<int> untried;        // action indices not yet expanded
    std::int64_t n = 0;
    double v_sum = 0.0;
    bool terminal = false;
};

}  // namespace

search_trace vanilla_mcts(const search_space_spec& space, const objective& obj,
                          const action_space_adapter& adapter, std::int64_t budget,
                          std::uint64_t seed, double c, std::optional<double> target,
                          eval_ledger* ledger_out) {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    rng_t rng(seed);
    base_run st;
    st.budget = budget;
    st.target = target;
    st.query_cap = 50ull * static_cast<std::uint64_t>(budget);
    st.trace.header = {
        {"algorithm",
         adapter.kind() == action_space_adapter::kind_t::global ? "mcts_global"
                                                                : "mcts_sequential"},
        {"space", space.name},
        {"seed", seed},
        {"config", {{"budget", budget}, {"c", c}, {"seed", seed}}}};

    std::vector<mcts_node> nodes(1);
    {
        const int k = adapter.num_actions({});
        nodes[0].untried.resize(k);
        for (int a = 0; a < k; ++a) nodes[0].untried[a] = a;
        nodes[0].terminal = k == 0;
    }

    auto make_child = [&](int parent, int action) {
        mcts_node child;
        child.prefix = nodes[parent].prefix;
        child.prefix.push_back(action);
        child.parent = parent;
        const int k = adapter.num_actions(child.prefix);
        child.untried.resize(k);
        for (int a = 0; a < k; ++a) child.untried[a] = a;
        child.terminal = k == 0;
        nodes.push_back(std::move(child));
        nodes[parent].children.push_back(static_cast<int>(nodes.size()) - 1);
        return static_cast<int>(nodes.size()) - 1;
    };

    while (!st.stop) {
        // selection
        int id = 0;
        std::vector<int> path{0};
        while (!nodes[id].terminal && nodes[id].untried.empty() && !nodes[id].children.empty()) {
            int best_child = nodes[id].children[0];
            double best_ucb = -std::numeric_limits<double>::infinity();
            for (int ch : nodes[id].children) {
                const double u = get_ucb(nodes[ch].v_sum, nodes[ch].n, nodes[id].n, c);
                if (u > best_ucb) {
                    best_ucb = u;
                    best_child = ch;
                }
            }
            id = best_child;
            path.push_back(id);
        }
        // expansion
        if (!nodes[id].terminal && !nodes[id].untried.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, nodes[id].untried.size() - 1);
            const std::size_t at = pick(rng);
            const int action = nodes[id].untried[at];
            nodes[id].untried.erase(nodes[id].untried.begin() + static_cast<std::ptrdiff_t>(at));
            id = make_child(id, action);
            path.push_back(id);
        }
        // rollout: uniform completion
        std::vector<int> seq = nodes[id].prefix;
        while (true) {
            const int k = adapter.num_actions(seq);
            if (k == 0) break;
            seq.push_back(std::uniform_int_distribution<int>(0, k - 1)(rng));
        }
        const encoding e = adapter.decode(seq);
        const auto m = st.eval(obj, e);
        for (int nid : path) {
            nodes[nid].n += 1;
            nodes[nid].v_sum += m.metric;
        }
    }
    if (ledger_out) *ledger_out = st.ledger;
    return st.trace;
}

}  // namespace lanas
