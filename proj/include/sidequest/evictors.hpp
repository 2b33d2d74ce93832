#pragma once

#include "sidequest/command.hpp"
#include "sidequest/ledger.hpp"
#include "sidequest/policy.hpp"
#include "sidequest/trace.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sidequest {

struct SidequestDecision {
    EvictionCommand command;
    bool failed = false;
};

// Turns an aux-thread output into a normalized command. Anything other than
// a parsed del_cursors list yields an empty command with `failed` set.
SidequestDecision sidequest_evictor(const PolicyOutput& aux_output);

enum class Scorer { recency, citation_frequency, redundancy };

std::string_view to_string(Scorer scorer);
std::optional<Scorer> parse_scorer(std::string_view name);

// Importance in [0, 1]; lower is evicted first.
//   recency            opened_turn / current_turn (1.0 when current_turn is 0)
//   citation_frequency fraction of later messages that mention the cursor tag
//   redundancy         1 - max token-set Jaccard against any other open cursor
double score_importance(const LedgerView& view, CursorId cursor, Scorer scorer, int current_turn);

struct BudgetPolicy {
    std::size_t budget = 16000;
    std::size_t sink_count = 1;  // leading messages that are never evicted
    int recent_window = 1;       // cursors opened in the last N turns are kept
    Scorer scorer = Scorer::recency;
};

struct BudgetDecision {
    EvictionCommand command;
    bool infeasible = false;  // protected content alone exceeds the budget
};

using ScoreFn = std::function<double(const CursorRecord&)>;

bool is_protected(const LedgerView& view, const CursorRecord& cursor, const BudgetPolicy& policy, int current_turn);

// Greedy: evict the lowest-scored unprotected open cursors (older first on
// ties) until resident <= budget.
BudgetDecision budget_evict(const LedgerView& view, const BudgetPolicy& policy, int current_turn);
BudgetDecision budget_evict(const LedgerView& view, const BudgetPolicy& policy, int current_turn, const ScoreFn& score);

// Open cursors of `so_far` whose last use in `full_trace` is before
// current_turn.
EvictionCommand oracle_evictor(const LedgerView& so_far, const Trace& full_trace, int current_turn);

// A strategy consulted synchronously at the top of every loop iteration.
class Evictor {
public:
    virtual ~Evictor() = default;
    virtual EvictionCommand at_loop_top(const LedgerView& view, int turn) = 0;
};

class BudgetEvictor final : public Evictor {
public:
    explicit BudgetEvictor(BudgetPolicy policy) : policy_(policy) {}
    EvictionCommand at_loop_top(const LedgerView& view, int turn) override;
    std::size_t infeasible_turns() const { return infeasible_turns_; }

private:
    BudgetPolicy policy_;
    std::size_t infeasible_turns_ = 0;
};

class OracleEvictor final : public Evictor {
public:
    explicit OracleEvictor(Trace reference);
    EvictionCommand at_loop_top(const LedgerView& view, int turn) override;

private:
    Trace reference_;
    std::map<CursorId, int> last_use_;
};

// Applies fixed commands at fixed turns; used to replay a recorded
// eviction log.
class ScheduledEvictor final : public Evictor {
public:
    explicit ScheduledEvictor(std::map<int, EvictionCommand> schedule) : schedule_(std::move(schedule)) {}
    EvictionCommand at_loop_top(const LedgerView& view, int turn) override;

private:
    std::map<int, EvictionCommand> schedule_;
};

// Names accepted in run configuration.
enum class StrategyKind { none, sidequest, budget, oracle };

struct StrategySpec {
    StrategyKind kind = StrategyKind::none;
    Scorer scorer = Scorer::recency;  // budget only
    std::string name;
};

// none | sidequest | budget:recency | budget:citation | budget:redundancy | oracle
std::optional<StrategySpec> parse_strategy(std::string_view name);

} // namespace sidequest
