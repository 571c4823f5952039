#pragma once

// Money in integer cents. All price arithmetic that must be exact (the price
// grid, CSV round-trips, elicited-value rounding) happens on int64 cents;
// doubles appear only at the simulation boundary and are rounded half-up.

#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "promptlab/util.hpp"

namespace promptlab {

struct Money {
    int64_t cents = 0;

    constexpr Money() = default;
    constexpr explicit Money(int64_t c) : cents(c) {}

    auto operator<=>(const Money&) const = default;

    double dollars() const { return double(cents) / 100.0; }

    /// "8.26", "0.88" — bare decimal, always two fraction digits.
    std::string str() const {
        int64_t c = cents < 0 ? -cents : cents;
        return strprintf("%s%lld.%02lld", cents < 0 ? "-" : "", (long long)(c / 100),
                         (long long)(c % 100));
    }

    /// "$8.26" — the form currency takes inside rendered prompts.
    std::string usd() const { return (cents < 0 ? "-$" : "$") + Money(std::abs(cents)).str(); }
};

/// Round dollars to cents, half away from zero. The 1e-7 nudge absorbs binary
/// representation error (3.445 is stored just below the true value) and is far
/// too small to move any value that is not already a rounding boundary.
inline Money round_to_cents(double dollars) {
    double scaled = dollars * 100.0;
    double adj = scaled < 0 ? -(std::floor(-scaled + 0.5 + 1e-7)) : std::floor(scaled + 0.5 + 1e-7);
    return Money(int64_t(adj));
}

/// Parse a plain decimal string ("8.26", "0.9", "12") to cents exactly, with
/// half-up rounding applied at the third fraction digit. Throws on anything
/// that is not a simple decimal number.
inline Money parse_money(std::string_view text) {
    std::string s = trim(text);
    if (s.empty()) throw std::invalid_argument("parse_money: empty string");
    size_t i = 0;
    bool neg = false;
    if (s[i] == '+' || s[i] == '-') {
        neg = s[i] == '-';
        ++i;
    }
    int64_t whole = 0;
    bool any_digit = false;
    for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i) {
        any_digit = true;
        if (whole > (INT64_MAX - 9) / 10) throw std::out_of_range("parse_money: overflow");
        whole = whole * 10 + (s[i] - '0');
    }
    int frac[2] = {0, 0};
    int64_t round_up = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        int pos = 0;
        for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i) {
            any_digit = true;
            if (pos < 2) {
                frac[pos] = s[i] - '0';
            } else if (pos == 2 && s[i] >= '5') {
                round_up = 1;
            }
            ++pos;
        }
    }
    if (!any_digit || i != s.size()) throw std::invalid_argument("parse_money: not a decimal: '" + s + "'");
    if (whole > (INT64_MAX / 100) - 1) throw std::out_of_range("parse_money: overflow");
    int64_t cents = whole * 100 + frac[0] * 10 + frac[1] + round_up;
    return Money(neg ? -cents : cents);
}

}  // namespace promptlab
