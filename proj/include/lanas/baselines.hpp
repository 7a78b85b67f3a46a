#pragma once

#include "lanas/dataset.hpp"
#include "lanas/search.hpp"
#include "lanas/space.hpp"

#include <optional>
#include <vector>

namespace lanas {

// Uniform i.i.d. proposals; with dedup, rejection against the seen set plus
// a deterministic enumeration endgame on finite spaces.
search_trace random_search(const search_space_spec& space, const objective& obj,
                           std::int64_t budget, std::uint64_t seed, bool dedup = true,
                           std::optional<double> target = std::nullopt,
                           eval_ledger* ledger_out = nullptr, int max_reject_tries = 10000);

// Aging evolution: seed the population with uniform draws, then repeatedly
// mutate the best of a with-replacement tournament and evict the oldest.
search_trace regularized_evolution(const search_space_spec& space, const objective& obj,
                                   std::int64_t budget, std::uint64_t seed, int population = 100,
                                   int tournament = 10,
                                   std::optional<double> target = std::nullopt,
                                   eval_ledger* ledger_out = nullptr);

// Manual convnet action spaces for vanilla MCTS. A state is the sequence of
// action indices taken from the root.
class action_space_adapter {
public:
    enum class kind_t { sequential, global };

    action_space_adapter(kind_t kind, const search_space_spec& space);

    kind_t kind() const { return kind_; }
    const search_space_spec& space() const { return space_; }

    // number of legal actions after prefix; 0 means the sequence is complete
    int num_actions(const std::vector<int>& prefix) const;
    bool terminal(const std::vector<int>& prefix) const { return num_actions(prefix) == 0; }
    encoding decode(const std::vector<int>& complete) const;

    // every complete action sequence's encoding, by exhaustive walk
    std::vector<encoding> enumerate_all() const;

private:
    struct seq_state {
        int layers = 0;
        int phase = 0;  // 0 decide, 1 kernel, 2 channel, 3 stopped
    };
    seq_state parse_sequential(const std::vector<int>& prefix) const;

    kind_t kind_;
    search_space_spec space_;
    int slots_;
    convnet_codebook book_;
    std::vector<int> kernels_;   // ascending
    std::vector<int> channels_;  // ascending
};

action_space_adapter make_action_adapter(const search_space_spec& space,
                                         action_space_adapter::kind_t kind);

// Classic MCTS over the adapter tree: UCB selection (shared get_ucb), one
// expansion per iteration, uniform random rollout, metric back-propagation.
search_trace vanilla_mcts(const search_space_spec& space, const objective& obj,
                          const action_space_adapter& adapter, std::int64_t budget,
                          std::uint64_t seed, double c = 0.1,
                          std::optional<double> target = std::nullopt,
                          eval_ledger* ledger_out = nullptr);

}  // namespace lanas
