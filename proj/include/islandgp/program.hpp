#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "islandgp/rng.hpp"

namespace islandgp {

enum class Sort : std::uint8_t { Number, Boolean, Action, FeedScore, Position };

inline constexpr std::size_t kSortCount = 5;

std::string_view to_string(Sort sort);
std::optional<Sort> parse_sort(std::string_view text);

enum class Category : std::uint8_t { Function, Terminal, Constant };

using KindId = std::uint16_t;

struct NodeKind {
    std::string name;
    std::vector<Sort> argument_sorts;
    Sort result_sort{Sort::Number};
    Category category{Category::Terminal};

    std::size_t arity() const { return argument_sorts.size(); }
    bool is_leaf() const { return argument_sorts.empty(); }
};

using ConstantGenerator = std::function<double(Rng&)>;

/// The vocabulary a program tree may be built from.
///
/// Constants are registered once per sort and are named `const:<Sort>`; the
/// value of each constant node is drawn when the node is created and stays
/// frozen in the node afterwards.
class PrimitiveSet {
public:
    explicit PrimitiveSet(Sort root_sort) : root_sort_(root_sort) {}

    KindId add_function(std::string name, std::vector<Sort> argument_sorts, Sort result);
    KindId add_terminal(std::string name, Sort result);
    KindId add_constant(Sort result, ConstantGenerator generator);

    Sort root_sort() const { return root_sort_; }
    std::size_t size() const { return kinds_.size(); }
    const NodeKind& kind(KindId id) const { return kinds_.at(id); }
    std::span<const NodeKind> kinds() const { return kinds_; }
    std::optional<KindId> find(std::string_view name) const;

    /// Kinds producing `sort`, in registration order.
    std::span<const KindId> producing(Sort sort) const {
        return by_sort_[static_cast<std::size_t>(sort)];
    }

    double draw_constant(KindId id, Rng& rng) const;

    /// Smallest depth of any tree rooted at `sort`; nullopt when none can be built.
    std::optional<int> min_depth(Sort sort) const;

    /// Throws ConfigError unless every sort reachable from the root has a leaf.
    void check_buildable() const;

private:
    KindId add(NodeKind kind);

    Sort root_sort_;
    std::vector<NodeKind> kinds_;
    std::vector<ConstantGenerator> generators_;
    std::vector<KindId> by_sort_[kSortCount];
};

struct Node {
    KindId kind{0};
    std::uint16_t arity{0};
    double value{0.0}; // payload, constants only

    friend bool operator==(const Node&, const Node&) = default;
};

/// GP genome stored in prefix order. Immutable once built; operators return
/// new trees.
class ProgramTree {
public:
    ProgramTree() = default;
    explicit ProgramTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

    std::span<const Node> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    const Node& operator[](std::size_t i) const { return nodes_[i]; }

    /// One past the last node of the subtree rooted at `i`.
    std::size_t subtree_end(std::size_t i) const;

    /// 1-based level of every node (root = 1).
    std::vector<int> levels() const;

    ProgramTree subtree(std::size_t i) const;

    /// Copy of this tree with the subtree at `i` replaced by `replacement`.
    ProgramTree replace_subtree(std::size_t i, const ProgramTree& replacement) const;

    friend bool operator==(const ProgramTree&, const ProgramTree&) = default;

private:
    std::vector<Node> nodes_;
};

/// 1 for a lone leaf, 1 + deepest child otherwise.
int depth(const ProgramTree& tree);

/// Empty optional when the tree is legal; otherwise what is wrong with it.
std::optional<std::string> validate(const ProgramTree& tree, const PrimitiveSet& prims,
                                    int max_depth);

/// Grow-style random construction: at a depth budget of 1 only leaves are
/// eligible, otherwise every kind whose smallest subtree fits is.
ProgramTree build_random_tree(const PrimitiveSet& prims, int max_depth, Rng& rng);

/// Random subtree of a given sort, used by the builder and by mutation.
ProgramTree grow(const PrimitiveSet& prims, Sort sort, int max_depth, Rng& rng);

/// Canonical text: `(add (lat) (const:Number 2.5))`.
std::string serialize(const ProgramTree& tree, const PrimitiveSet& prims);

/// Parses and validates; throws ParseError or ValidationError.
ProgramTree deserialize(std::string_view text, const PrimitiveSet& prims, int max_depth);

/// Shortest text that reads back to the same double.
std::string format_number(double value);

enum class Origin : std::uint8_t { Local, Immigrant, RandomInjected, EliteCopy };

std::string_view to_string(Origin origin);

struct Individual {
    ProgramTree tree;
    std::optional<double> fitness;
    std::size_t size{0};
    int depth{0};
    Origin origin{Origin::Local};

    Individual() = default;
    Individual(ProgramTree t, Origin o)
        : tree(std::move(t)), size(tree.size()), depth(islandgp::depth(tree)), origin(o) {}
};

} // namespace islandgp
