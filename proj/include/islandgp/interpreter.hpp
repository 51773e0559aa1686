#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "islandgp/program.hpp"

namespace islandgp {

using Duration = std::chrono::microseconds;

class VirtualClock {
public:
    Duration now() const { return now_; }
    void advance(Duration d) { now_ += d; }

private:
    Duration now_{0};
};

struct SupervisorPolicy {
    std::uint64_t max_steps{1000};
    Duration max_virtual_time{Duration::max()};
};

struct RunOutcome {
    enum class Status { Completed, Killed };

    Status status{Status::Completed};
    std::optional<double> value;
    std::uint64_t steps_used{0};
    std::vector<KindId> actions; // Action-sorted application nodes, in evaluation order

    bool killed() const { return status == Status::Killed; }
};

/// Binds node kinds to behaviour for one program run.
///
/// `add`, `sub`, `mul`, `div` (protected: x/0 = 1), `if_greater(a, b, then, else)`
/// and n-ary `seq` are built in and recognised by name; everything else in the
/// primitive set must be bound with bind() before execute() is called.
/// Bindings receive their evaluated arguments and may advance the clock.
class Environment {
public:
    using Binding = std::function<double(std::span<const double>)>;

    explicit Environment(const PrimitiveSet& prims);

    void bind(std::string_view name, Binding binding);

    /// Throws ConfigError naming the first kind without behaviour.
    void check_complete() const;

    const PrimitiveSet& primitives() const { return *prims_; }
    VirtualClock& clock() { return clock_; }

    /// Virtual time charged per node evaluation.
    Duration step_cost{1};

private:
    friend class Interpreter;

    enum class Op : std::uint8_t { Bound, Add, Sub, Mul, Div, IfGreater, Seq };

    const PrimitiveSet* prims_;
    std::vector<Op> ops_;
    std::vector<Binding> bindings_;
    VirtualClock clock_;
};

/// Depth-first tree walk under the supervisor's step and virtual-time budget.
/// A killed run keeps the actions emitted before the kill.
RunOutcome execute(const ProgramTree& tree, Environment& env, const SupervisorPolicy& policy);

} // namespace islandgp
