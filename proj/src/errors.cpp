#include "cavsense/errors.hpp"

namespace cavsense {

parse_error::parse_error(std::size_t line, const std::string& what)
    : error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string singular_message(const std::string& entry, std::size_t index) {
    std::string msg = "singular two-port conversion: " + entry + " is zero";
    if (index != singularity_error::no_index) {
        msg += " at frequency index " + std::to_string(index);
    }
    return msg;
}

}  // namespace

singularity_error::singularity_error(std::string entry, std::size_t index)
    : error(singular_message(entry, index)), entry_(std::move(entry)), index_(index) {}

}  // namespace cavsense
