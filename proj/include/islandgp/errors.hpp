#pragma once

#include <stdexcept>
#include <string>

namespace islandgp {

/// Invalid static setup: primitive sets, strategies, bindings, config files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition (empty pool, n too large...).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed program text.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed program text that does not describe a legal tree.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace islandgp
