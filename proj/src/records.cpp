#include "pairlab/records.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <ctime>

namespace pairlab {

SampleId::SampleId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) throw std::invalid_argument("sample id must be nonempty");
}

void validate_record(const ComparisonRecord& record) {
    if (record.left == record.right) {
        throw std::invalid_argument("comparison of sample '" + record.left.str() + "' with itself");
    }
}

std::vector<ComparisonRecord> canonical_order(std::span<const ComparisonRecord> records) {
    std::vector<ComparisonRecord> sorted(records.begin(), records.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const ComparisonRecord& a, const ComparisonRecord& b) {
        if (a.winner_id() != b.winner_id()) return a.winner_id() < b.winner_id();
        return a.loser_id() < b.loser_id();
    });
    return sorted;
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto ms_total = ts.time_since_epoch().count();
    auto secs = ms_total / 1000;
    auto ms = ms_total % 1000;
    if (ms < 0) {
        ms += 1000;
        secs -= 1;
    }
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

namespace {

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
    if (pos + count > text.size()) throw std::invalid_argument("truncated timestamp");
    int value = 0;
    const auto* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + count, value);
    if (ec != std::errc{} || ptr != first + count) throw std::invalid_argument("bad digits in timestamp");
    pos += count;
    return value;
}

void expect(std::string_view text, std::size_t& pos, char c) {
    if (pos >= text.size() || (text[pos] != c && !(c == 'T' && text[pos] == 't'))) {
        throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
    }
    ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    std::size_t pos = 0;
    std::tm tm{};
    tm.tm_year = read_digits(text, pos, 4) - 1900;
    expect(text, pos, '-');
    tm.tm_mon = read_digits(text, pos, 2) - 1;
    expect(text, pos, '-');
    tm.tm_mday = read_digits(text, pos, 2);
    expect(text, pos, 'T');
    tm.tm_hour = read_digits(text, pos, 2);
    expect(text, pos, ':');
    tm.tm_min = read_digits(text, pos, 2);
    expect(text, pos, ':');
    tm.tm_sec = read_digits(text, pos, 2);
    if (tm.tm_mon < 0 || tm.tm_mon > 11 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 ||
        tm.tm_min > 59 || tm.tm_sec > 60) {
        throw std::invalid_argument("timestamp field out of range");
    }

    long long millis = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int scale = 100;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (scale > 0) {
                millis += (text[pos] - '0') * scale;
                scale /= 10;
            }
            ++pos;
            ++digits;
        }
        if (digits == 0) throw std::invalid_argument("empty fractional seconds in timestamp");
    }

    long long offset_seconds = 0;
    if (pos >= text.size()) throw std::invalid_argument("timestamp missing zone designator");
    if (text[pos] == 'Z' || text[pos] == 'z') {
        ++pos;
    } else if (text[pos] == '+' || text[pos] == '-') {
        const int sign = text[pos] == '+' ? 1 : -1;
        ++pos;
        const int hh = read_digits(text, pos, 2);
        expect(text, pos, ':');
        const int mm = read_digits(text, pos, 2);
        offset_seconds = sign * (hh * 3600LL + mm * 60LL);
    } else {
        throw std::invalid_argument("bad zone designator in timestamp");
    }
    if (pos != text.size()) throw std::invalid_argument("trailing characters in timestamp");

    const long long secs = static_cast<long long>(timegm(&tm)) - offset_seconds;
    return Timestamp{std::chrono::milliseconds{secs * 1000 + millis}};
}

Timestamp now_utc() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

}  // namespace pairlab
