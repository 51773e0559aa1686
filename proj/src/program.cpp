#include "islandgp/program.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "islandgp/errors.hpp"

namespace islandgp {

namespace {

constexpr std::string_view kSortNames[kSortCount] = {"Number", "Boolean", "Action", "FeedScore",
                                                     "Position"};

std::size_t sort_index(Sort s) { return static_cast<std::size_t>(s); }

} // namespace

std::string_view to_string(Sort sort) { return kSortNames[sort_index(sort)]; }

std::optional<Sort> parse_sort(std::string_view text) {
    for (std::size_t i = 0; i < kSortCount; ++i) {
        if (kSortNames[i] == text) return static_cast<Sort>(i);
    }
    return std::nullopt;
}

std::string_view to_string(Origin origin) {
    switch (origin) {
    case Origin::Local: return "local";
    case Origin::Immigrant: return "immigrant";
    case Origin::RandomInjected: return "random-injected";
    case Origin::EliteCopy: return "elite-copy";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// PrimitiveSet

KindId PrimitiveSet::add(NodeKind kind) {
    if (kind.name.empty() || kind.name.find_first_of("() \t\n") != std::string::npos) {
        throw ConfigError("illegal node name '" + kind.name + "'");
    }
    if (find(kind.name)) throw ConfigError("duplicate node name '" + kind.name + "'");
    if (kinds_.size() >= std::numeric_limits<KindId>::max()) {
        throw ConfigError("too many node kinds");
    }
    const auto id = static_cast<KindId>(kinds_.size());
    by_sort_[sort_index(kind.result_sort)].push_back(id);
    kinds_.push_back(std::move(kind));
    generators_.emplace_back();
    return id;
}

KindId PrimitiveSet::add_function(std::string name, std::vector<Sort> argument_sorts, Sort result) {
    if (argument_sorts.empty()) throw ConfigError("function '" + name + "' needs arguments");
    return add(NodeKind{std::move(name), std::move(argument_sorts), result, Category::Function});
}

KindId PrimitiveSet::add_terminal(std::string name, Sort result) {
    return add(NodeKind{std::move(name), {}, result, Category::Terminal});
}

KindId PrimitiveSet::add_constant(Sort result, ConstantGenerator generator) {
    if (!generator) throw ConfigError("constant generator missing");
    const auto id =
        add(NodeKind{"const:" + std::string(to_string(result)), {}, result, Category::Constant});
    generators_[id] = std::move(generator);
    return id;
}

std::optional<KindId> PrimitiveSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < kinds_.size(); ++i) {
        if (kinds_[i].name == name) return static_cast<KindId>(i);
    }
    return std::nullopt;
}

double PrimitiveSet::draw_constant(KindId id, Rng& rng) const {
    const auto& gen = generators_.at(id);
    if (!gen) throw UsageError("'" + kinds_.at(id).name + "' is not a constant");
    return gen(rng);
}

std::optional<int> PrimitiveSet::min_depth(Sort sort) const {
    // Bellman-style relaxation; at most kSortCount rounds are needed.
    constexpr int kUnbuildable = std::numeric_limits<int>::max();
    int best[kSortCount];
    std::fill(std::begin(best), std::end(best), kUnbuildable);
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& k : kinds_) {
            int d = 1;
            for (Sort arg : k.argument_sorts) {
                const int sub = best[sort_index(arg)];
                d = sub == kUnbuildable ? kUnbuildable : std::max(d, sub + 1);
                if (d == kUnbuildable) break;
            }
            auto& slot = best[sort_index(k.result_sort)];
            if (d < slot) {
                slot = d;
                changed = true;
            }
        }
    }
    const int d = best[sort_index(sort)];
    if (d == kUnbuildable) return std::nullopt;
    return d;
}

void PrimitiveSet::check_buildable() const {
    bool reachable[kSortCount] = {};
    std::vector<Sort> frontier{root_sort_};
    reachable[sort_index(root_sort_)] = true;
    while (!frontier.empty()) {
        const Sort s = frontier.back();
        frontier.pop_back();
        for (KindId id : producing(s)) {
            for (Sort arg : kinds_[id].argument_sorts) {
                if (!reachable[sort_index(arg)]) {
                    reachable[sort_index(arg)] = true;
                    frontier.push_back(arg);
                }
            }
        }
    }
    for (std::size_t i = 0; i < kSortCount; ++i) {
        if (!reachable[i]) continue;
        const bool has_leaf = std::any_of(producing(static_cast<Sort>(i)).begin(),
                                          producing(static_cast<Sort>(i)).end(),
                                          [&](KindId id) { return kinds_[id].is_leaf(); });
        if (!has_leaf) {
            throw ConfigError("no terminal produces sort " + std::string(kSortNames[i]));
        }
    }
}

// ---------------------------------------------------------------------------
// ProgramTree

std::size_t ProgramTree::subtree_end(std::size_t i) const {
    std::size_t pending = 1;
    while (pending > 0) {
        pending += nodes_.at(i).arity;
        --pending;
        ++i;
    }
    return i;
}

std::vector<int> ProgramTree::levels() const {
    std::vector<int> out(nodes_.size());
    // Stack of (level, children still expected) for open function nodes.
    std::vector<std::pair<int, int>> open;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const int level = open.empty() ? 1 : open.back().first + 1;
        out[i] = level;
        if (!open.empty() && --open.back().second == 0) open.pop_back();
        if (nodes_[i].arity > 0) open.emplace_back(level, nodes_[i].arity);
    }
    return out;
}

ProgramTree ProgramTree::subtree(std::size_t i) const {
    const auto end = subtree_end(i);
    return ProgramTree(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(i),
                                         nodes_.begin() + static_cast<std::ptrdiff_t>(end)));
}

ProgramTree ProgramTree::replace_subtree(std::size_t i, const ProgramTree& replacement) const {
    const auto end = subtree_end(i);
    std::vector<Node> out;
    out.reserve(nodes_.size() - (end - i) + replacement.size());
    out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
    out.insert(out.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
    return ProgramTree(std::move(out));
}

int depth(const ProgramTree& tree) {
    if (tree.empty()) return 0;
    const auto lv = tree.levels();
    return *std::max_element(lv.begin(), lv.end());
}

std::optional<std::string> validate(const ProgramTree& tree, const PrimitiveSet& prims,
                                    int max_depth) {
    if (tree.empty()) return "empty tree";
    // Expected sort for each pending child slot, innermost last.
    struct Slot {
        Sort sort;
        int level;
    };
    std::vector<Slot> expected{{prims.root_sort(), 1}};
    for (std::size_t i = 0; i < tree.size(); ++i) {
        if (expected.empty()) return "trailing nodes after complete tree";
        const Slot slot = expected.back();
        expected.pop_back();
        const Node& n = tree[i];
        if (n.kind >= prims.size()) return "unknown node kind id " + std::to_string(n.kind);
        const NodeKind& k = prims.kind(n.kind);
        if (n.arity != k.arity()) {
            return "node '" + k.name + "' has " + std::to_string(n.arity) + " children, expected " +
                   std::to_string(k.arity());
        }
        if (k.result_sort != slot.sort) {
            return "node '" + k.name + "' yields " + std::string(to_string(k.result_sort)) +
                   " where " + std::string(to_string(slot.sort)) + " is required";
        }
        if (slot.level > max_depth) {
            return "depth exceeds limit " + std::to_string(max_depth);
        }
        if (k.category == Category::Constant && !std::isfinite(n.value)) {
            return "non-finite constant";
        }
        for (auto it = k.argument_sorts.rbegin(); it != k.argument_sorts.rend(); ++it) {
            expected.push_back({*it, slot.level + 1});
        }
    }
    if (!expected.empty()) return "tree is missing children";
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

int min_kind_depth(const PrimitiveSet& prims, const NodeKind& k) {
    int d = 1;
    for (Sort arg : k.argument_sorts) {
        const auto sub = prims.min_depth(arg);
        if (!sub) return std::numeric_limits<int>::max();
        d = std::max(d, *sub + 1);
    }
    return d;
}

void grow_into(const PrimitiveSet& prims, Sort sort, int budget, Rng& rng, std::vector<Node>& out) {
    std::vector<KindId> eligible;
    for (KindId id : prims.producing(sort)) {
        const NodeKind& k = prims.kind(id);
        if (budget <= 1 ? k.is_leaf() : min_kind_depth(prims, k) <= budget) eligible.push_back(id);
    }
    if (eligible.empty()) {
        throw ConfigError("no terminal produces sort " + std::string(to_string(sort)));
    }
    const KindId id = eligible[uniform_index(rng, eligible.size())];
    const NodeKind& k = prims.kind(id);
    Node node{id, static_cast<std::uint16_t>(k.arity()), 0.0};
    if (k.category == Category::Constant) node.value = prims.draw_constant(id, rng);
    out.push_back(node);
    for (Sort arg : k.argument_sorts) grow_into(prims, arg, budget - 1, rng, out);
}

} // namespace

ProgramTree grow(const PrimitiveSet& prims, Sort sort, int max_depth, Rng& rng) {
    if (max_depth < 1) throw UsageError("max_depth must be at least 1");
    std::vector<Node> nodes;
    grow_into(prims, sort, max_depth, rng, nodes);
    return ProgramTree(std::move(nodes));
}

ProgramTree build_random_tree(const PrimitiveSet& prims, int max_depth, Rng& rng) {
    if (max_depth < 1) throw UsageError("max_depth must be at least 1");
    prims.check_buildable();
    return grow(prims, prims.root_sort(), max_depth, rng);
}

// ---------------------------------------------------------------------------
// Text form

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(std::begin(buf), std::end(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

void serialize_into(const ProgramTree& tree, const PrimitiveSet& prims, std::size_t& i,
                    std::string& out) {
    const Node& n = tree[i++];
    const NodeKind& k = prims.kind(n.kind);
    out += '(';
    out += k.name;
    if (k.category == Category::Constant) {
        out += ' ';
        out += format_number(n.value);
    }
    for (std::size_t c = 0; c < n.arity; ++c) {
        out += ' ';
        serialize_into(tree, prims, i, out);
    }
    out += ')';
}

class Parser {
public:
    Parser(std::string_view text, const PrimitiveSet& prims) : text_(text), prims_(prims) {}

    ProgramTree parse() {
        std::vector<Node> nodes;
        parse_expr(nodes);
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing text");
        return ProgramTree(std::move(nodes));
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(what + " at offset " + std::to_string(pos_));
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                       text_[pos_] == '\n' || text_[pos_] == '\r')) {
            ++pos_;
        }
    }

    std::string_view atom() {
        skip_space();
        const auto start = pos_;
        while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
               text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '\n' &&
               text_[pos_] != '\r') {
            ++pos_;
        }
        if (start == pos_) fail("expected a name");
        return text_.substr(start, pos_ - start);
    }

    void expect(char c) {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void parse_expr(std::vector<Node>& nodes) {
        if (++nesting_ > kMaxNesting) fail("nesting too deep");
        expect('(');
        const auto name = atom();
        const auto id = prims_.find(name);
        if (!id) throw ValidationError("unknown node kind '" + std::string(name) + "'");
        const NodeKind& k = prims_.kind(*id);
        Node node{*id, 0, 0.0};
        if (k.category == Category::Constant) {
            const auto num = atom();
            double v = 0.0;
            const auto res = std::from_chars(num.data(), num.data() + num.size(), v);
            if (res.ec != std::errc{} || res.ptr != num.data() + num.size()) {
                fail("bad number '" + std::string(num) + "'");
            }
            node.value = v;
        }
        const auto self = nodes.size();
        nodes.push_back(node);
        std::size_t children = 0;
        for (;;) {
            skip_space();
            if (pos_ >= text_.size()) fail("unterminated expression");
            if (text_[pos_] == ')') break;
            if (text_[pos_] != '(') fail("expected '(' or ')'");
            parse_expr(nodes);
            ++children;
        }
        ++pos_;
        if (children > std::numeric_limits<std::uint16_t>::max()) fail("too many children");
        nodes[self].arity = static_cast<std::uint16_t>(children);
        --nesting_;
    }

    static constexpr int kMaxNesting = 256;

    std::string_view text_;
    const PrimitiveSet& prims_;
    std::size_t pos_{0};
    int nesting_{0};
};

} // namespace

std::string serialize(const ProgramTree& tree, const PrimitiveSet& prims) {
    std::string out;
    std::size_t i = 0;
    if (!tree.empty()) serialize_into(tree, prims, i, out);
    return out;
}

ProgramTree deserialize(std::string_view text, const PrimitiveSet& prims, int max_depth) {
    ProgramTree tree = Parser(text, prims).parse();
    if (auto err = validate(tree, prims, max_depth)) throw ValidationError(*err);
    return tree;
}

} // namespace islandgp
