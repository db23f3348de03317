#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pairlab {

/// Raised when a configuration is valid input but outside what the operation supports.
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Opaque, nonempty sample identifier.
class SampleId {
public:
    explicit SampleId(std::string value);

    const std::string& str() const noexcept { return value_; }

    auto operator<=>(const SampleId&) const = default;
    bool operator==(const SampleId&) const = default;

private:
    std::string value_;
};

enum class Winner { Left, Right };

using Timestamp = std::chrono::time_point<std::chrono::system_clock, std::chrono::milliseconds>;

/// One binary judgment between two samples, in presentation order.
struct ComparisonRecord {
    SampleId left;
    SampleId right;
    Winner winner = Winner::Left;
    std::string annotator;
    Timestamp timestamp{};

    const SampleId& winner_id() const noexcept { return winner == Winner::Left ? left : right; }
    const SampleId& loser_id() const noexcept { return winner == Winner::Left ? right : left; }
    bool involves(const SampleId& id) const noexcept { return left == id || right == id; }
};

/// Throws std::invalid_argument when left == right.
void validate_record(const ComparisonRecord& record);

/// Sorts by (winner, loser) so that any arrival order or left/right presentation of the
/// same judgment multiset yields the same sequence of likelihood terms.
std::vector<ComparisonRecord> canonical_order(std::span<const ComparisonRecord> records);

/// RFC 3339 in UTC with millisecond precision, e.g. "2021-03-04T05:06:07.089Z".
std::string format_timestamp(Timestamp ts);

/// Accepts "YYYY-MM-DDTHH:MM:SS[.fraction](Z|+HH:MM|-HH:MM)". Throws std::invalid_argument.
Timestamp parse_timestamp(std::string_view text);

Timestamp now_utc();

}  // namespace pairlab

template <>
struct std::hash<pairlab::SampleId> {
    std::size_t operator()(const pairlab::SampleId& id) const noexcept {
        return std::hash<std::string>{}(id.str());
    }
};
