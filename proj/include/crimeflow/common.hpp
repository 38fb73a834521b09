#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crimeflow {

/// Number of hour-of-week buckets; t = 24 * weekday + hour, Monday 00:00 = 0.
inline constexpr int kHoursPerWeek = 168;

using TractId = std::string;
using VenueId = std::string;

/// One non-negative count per hour of the week.
using HourVector = std::array<std::int64_t, kHoursPerWeek>;

inline HourVector zero_hours() {
    HourVector v{};
    v.fill(0);
    return v;
}

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a contract (bad file content, unknown ids, bad config).
/// The CLI maps it to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Unparseable input; the message carries file and line.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ": " + what),
          file_(file),
          line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Runtime failure that is not the user's input (numerical breakdown,
/// missing upstream artifact, I/O). The CLI maps it to exit code 2.
class RuntimeFailure : public Error {
public:
    using Error::Error;
};

/// Counted, categorised warnings. Records are never fatal; stages merge their
/// diagnostics into the reports they emit.
struct Diagnostics {
    std::map<std::string, std::int64_t> counts;
    std::vector<std::string> messages;

    void warn(const std::string& category, std::string message = {}) {
        ++counts[category];
        if (!message.empty() && messages.size() < 200) messages.push_back(std::move(message));
    }
    std::int64_t count(const std::string& category) const {
        auto it = counts.find(category);
        return it == counts.end() ? 0 : it->second;
    }
    void merge(const Diagnostics& other) {
        for (const auto& [k, v] : other.counts) counts[k] += v;
        for (const auto& m : other.messages)
            if (messages.size() < 200) messages.push_back(m);
    }
};

}  // namespace crimeflow
