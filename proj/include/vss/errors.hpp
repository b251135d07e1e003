#pragma once

#include <stdexcept>
#include <string>

namespace vss {

/// Argument outside the domain where a model relation is valid.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested value lies outside what the mechanism or a table can reach.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Lookup of a detent curve (or other keyed entry) that does not exist.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Invalid configuration; `field()` names the offending key (dotted path).
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Non-finite state encountered while integrating the pivot dynamics.
class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace vss
