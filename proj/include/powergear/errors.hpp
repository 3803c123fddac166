#ifndef POWERGEAR_ERRORS_HPP
#define POWERGEAR_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace powergear {

/// Input document or argument violates a schema or an invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / stream failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-fatal findings emitted by passes (kept, not thrown).
struct Diagnostics {
    std::vector<std::string> messages;

    void note(std::string msg) { messages.push_back(std::move(msg)); }
    bool empty() const { return messages.empty(); }
};

} // namespace powergear

#endif
