#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cavsense {

// Base of every error thrown by the library. Callers that only care about
// "something went wrong" catch this; the subclasses carry the category.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class validation_error : public error {
public:
    using error::error;
};

// Malformed Touchstone option line or otherwise unrecognized file layout.
class format_error : public error {
public:
    using error::error;
};

// Data-line level problem; line() is 1-based.
class parse_error : public error {
public:
    parse_error(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class range_error : public error {
public:
    using error::error;
};

// A two-port conversion hit a zero pivot. entry() names it ("s21", "t22").
class singularity_error : public error {
public:
    static constexpr std::size_t no_index = static_cast<std::size_t>(-1);

    explicit singularity_error(std::string entry, std::size_t index = no_index);
    const std::string& entry() const noexcept { return entry_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::string entry_;
    std::size_t index_;
};

class conditioning_error : public error {
public:
    using error::error;
};

class numeric_error : public error {
public:
    using error::error;
};

class shape_error : public error {
public:
    using error::error;
};

class state_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

class config_error : public error {
public:
    using error::error;
};

}  // namespace cavsense
