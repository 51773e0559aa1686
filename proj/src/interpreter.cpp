#include "islandgp/interpreter.hpp"

#include <string>

#include "islandgp/errors.hpp"

namespace islandgp {

Environment::Environment(const PrimitiveSet& prims)
    : prims_(&prims), ops_(prims.size(), Op::Bound), bindings_(prims.size()) {
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const NodeKind& k = prims.kind(static_cast<KindId>(i));
        if (k.category != Category::Function) continue;
        const auto n = k.arity();
        if (n == 2 && k.name == "add") ops_[i] = Op::Add;
        else if (n == 2 && k.name == "sub") ops_[i] = Op::Sub;
        else if (n == 2 && k.name == "mul") ops_[i] = Op::Mul;
        else if (n == 2 && k.name == "div") ops_[i] = Op::Div;
        else if (n == 4 && k.name == "if_greater") ops_[i] = Op::IfGreater;
        else if (k.name == "seq") ops_[i] = Op::Seq;
    }
}

void Environment::bind(std::string_view name, Binding binding) {
    const auto id = prims_->find(name);
    if (!id) throw ConfigError("cannot bind unknown kind '" + std::string(name) + "'");
    if (ops_[*id] != Op::Bound) throw ConfigError("'" + std::string(name) + "' is built in");
    bindings_[*id] = std::move(binding);
}

void Environment::check_complete() const {
    for (std::size_t i = 0; i < ops_.size(); ++i) {
        const NodeKind& k = prims_->kind(static_cast<KindId>(i));
        if (k.category == Category::Constant || ops_[i] != Op::Bound) continue;
        if (!bindings_[i]) throw ConfigError("no binding for '" + k.name + "'");
    }
}

namespace {

struct Killed {};

} // namespace

class Interpreter {
public:
    Interpreter(const ProgramTree& tree, Environment& env, const SupervisorPolicy& policy)
        : tree_(tree), env_(env), policy_(policy), start_(env.clock().now()) {}

    RunOutcome run() {
        try {
            std::size_t i = 0;
            const double v = eval(i);
            out_.value = v;
        } catch (const Killed&) {
            out_.status = RunOutcome::Status::Killed;
        }
        return std::move(out_);
    }

private:
    void charge() {
        if (out_.steps_used >= policy_.max_steps) throw Killed{};
        ++out_.steps_used;
        env_.clock().advance(env_.step_cost);
        check_time();
    }

    void check_time() const {
        if (env_.clock().now() - start_ > policy_.max_virtual_time) throw Killed{};
    }

    void skip(std::size_t& i) const { i = tree_.subtree_end(i); }

    double eval(std::size_t& i) {
        charge();
        const Node& n = tree_[i];
        const NodeKind& k = env_.prims_->kind(n.kind);
        ++i;
        if (k.category == Category::Constant) return n.value;

        using Op = Environment::Op;
        switch (env_.ops_[n.kind]) {
        case Op::Add: {
            const double a = eval(i);
            return a + eval(i);
        }
        case Op::Sub: {
            const double a = eval(i);
            return a - eval(i);
        }
        case Op::Mul: {
            const double a = eval(i);
            return a * eval(i);
        }
        case Op::Div: {
            const double a = eval(i);
            const double b = eval(i);
            return b == 0.0 ? 1.0 : a / b;
        }
        case Op::IfGreater: {
            const double a = eval(i);
            const double b = eval(i);
            double v = 0.0;
            if (a > b) {
                v = eval(i);
                skip(i);
            } else {
                skip(i);
                v = eval(i);
            }
            return v;
        }
        case Op::Seq: {
            double v = 0.0;
            for (std::size_t c = 0; c < n.arity; ++c) v = eval(i);
            return v;
        }
        case Op::Bound: break;
        }

        double args[8];
        std::vector<double> spill;
        std::span<double> argv;
        if (n.arity <= std::size(args)) {
            argv = std::span<double>(args, n.arity);
        } else {
            spill.resize(n.arity);
            argv = spill;
        }
        for (auto& a : argv) a = eval(i);
        const auto& binding = env_.bindings_[n.kind];
        if (!binding) throw ConfigError("no binding for '" + k.name + "'");
        const double v = binding(argv);
        if (k.result_sort == Sort::Action) out_.actions.push_back(n.kind);
        check_time();
        return v;
    }

    const ProgramTree& tree_;
    Environment& env_;
    const SupervisorPolicy& policy_;
    Duration start_;
    RunOutcome out_;
};

RunOutcome execute(const ProgramTree& tree, Environment& env, const SupervisorPolicy& policy) {
    if (policy.max_steps < 1) throw ConfigError("supervisor max_steps must be at least 1");
    env.check_complete();
    if (tree.empty()) throw UsageError("cannot execute an empty tree");
    return Interpreter(tree, env, policy).run();
}

} // namespace islandgp
