#pragma once

#include <stdexcept>
#include <string>

namespace textdistill {

// Invalid configuration or user input. CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data encountered at runtime (parse failures, integrity violations,
// degenerate inputs). CLI maps this to exit code 1.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a labelled subsample contains a single class. Bootstrap
// replicates catch this to discard the replicate instead of aborting.
class single_class_error : public data_error {
public:
    explicit single_class_error(const std::string& msg) : data_error(msg) {}
};

}  // namespace textdistill
