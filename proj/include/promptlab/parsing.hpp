#pragma once

// Response parsing: schema-driven extraction of typed values from raw LLM
// answer text. Parsers are total over arbitrary bytes — malformed input yields
// a ParseOutcome failure with a reason, never an exception.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"
#include "promptlab/money.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

enum class FieldKind { decision, decimal, whole, text_enum, free_text };

inline const char* field_kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::decision: return "decision";
        case FieldKind::decimal: return "decimal";
        case FieldKind::whole: return "whole";
        case FieldKind::text_enum: return "text_enum";
        case FieldKind::free_text: return "free_text";
    }
    throw std::logic_error("field_kind_name: bad enum");
}

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::free_text;
    std::vector<std::string> allowed;  // text_enum only
};

struct ParseSchema {
    std::string id;
    std::vector<FieldSpec> fields;

    bool single_field() const { return fields.size() == 1; }
};

enum class Decision { purchase, not_purchase };

inline const char* decision_text(Decision d) {
    return d == Decision::purchase ? "purchase" : "not purchase";
}

template <typename T>
struct ParseOutcome {
    std::optional<T> value;
    std::string error;

    bool ok() const { return value.has_value(); }
    static ParseOutcome success(T v) { return {std::move(v), ""}; }
    static ParseOutcome failure(std::string why) { return {std::nullopt, std::move(why)}; }
};

// ---- scalar parsers ----

namespace detail {

/// Lowercase, map '_'/'-' to spaces, strip everything but letters/digits/
/// spaces, collapse runs of whitespace.
inline std::string normalize_words(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
        bool is_word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (is_word) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        } else {
            pending_space = true;  // spaces, punctuation, underscores all separate words
        }
    }
    return out;
}

/// Count space-delimited occurrences of needle_core inside hay (which must be
/// space-padded); masks each match's core so later searches cannot reuse it,
/// while boundary spaces stay shareable between adjacent matches.
inline size_t count_and_mask(std::string& hay, const std::string& needle_core) {
    const std::string needle = " " + needle_core + " ";
    size_t count = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++count;
        for (size_t i = pos + 1; i < pos + 1 + needle_core.size(); ++i) hay[i] = '#';
        pos += needle.size() - 1;  // trailing space may lead the next match
    }
    return count;
}

}  // namespace detail

/// Accepts "purchase" / "not purchase" with tolerant casing, punctuation and
/// underscores. Text containing both readings (e.g. a full question echo) is a
/// contradictory failure rather than a guess.
inline ParseOutcome<Decision> parse_decision(std::string_view text) {
    std::string n = detail::normalize_words(text);
    if (n.empty()) return ParseOutcome<Decision>::failure("empty decision text");
    // Word-boundary pad so "repurchase" does not count.
    std::string padded = " " + n + " ";
    size_t nots = detail::count_and_mask(padded, "not purchase");
    size_t bares = detail::count_and_mask(padded, "purchase");
    if (nots > 0 && bares > 0)
        return ParseOutcome<Decision>::failure("contradictory decision text: '" + trim(text) + "'");
    if (nots > 0) return ParseOutcome<Decision>::success(Decision::not_purchase);
    if (bares > 0) return ParseOutcome<Decision>::success(Decision::purchase);
    return ParseOutcome<Decision>::failure("no decision found in: '" + trim(text) + "'");
}

/// First non-negative decimal number in the text, tolerating "$", thousands
/// separators, and surrounding prose. Rounds half-up to cents at the third
/// fraction digit.
inline ParseOutcome<Money> parse_decimal(std::string_view text) {
    const std::string s(text);
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        bool starts_number = (c >= '0' && c <= '9') ||
                             (c == '.' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9');
        if (starts_number) break;
        ++i;
    }
    if (i >= s.size()) return ParseOutcome<Money>::failure("no numeric token in: '" + trim(text) + "'");
    // Reject a minus sign directly governing this number (spaces/$ between allowed).
    for (size_t j = i; j-- > 0;) {
        char c = s[j];
        if (c == ' ' || c == '$') continue;
        if (c == '-') return ParseOutcome<Money>::failure("negative value in: '" + trim(text) + "'");
        break;
    }
    std::string token;
    bool seen_dot = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            token.push_back(c);
        } else if (c == '.' && !seen_dot && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9') {
            seen_dot = true;
            token.push_back(c);
        } else if (c == ',' && !seen_dot && i + 3 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9' &&
                   s[i + 2] >= '0' && s[i + 2] <= '9' && s[i + 3] >= '0' && s[i + 3] <= '9') {
            continue;  // thousands separator
        } else {
            break;
        }
    }
    if (token.empty() || token == ".") return ParseOutcome<Money>::failure("no numeric token");
    if (token[0] == '.') token = "0" + token;
    try {
        return ParseOutcome<Money>::success(parse_money(token));
    } catch (const std::exception& ex) {
        return ParseOutcome<Money>::failure(ex.what());
    }
}

/// First non-negative integer in the text. A fractional part is a failure —
/// whole means whole.
inline ParseOutcome<int64_t> parse_whole(std::string_view text) {
    const std::string s(text);
    size_t i = 0;
    while (i < s.size() && !(s[i] >= '0' && s[i] <= '9')) ++i;
    if (i >= s.size()) return ParseOutcome<int64_t>::failure("no integer token in: '" + trim(text) + "'");
    for (size_t j = i; j-- > 0;) {
        char c = s[j];
        if (c == ' ' || c == '$') continue;
        if (c == '-') return ParseOutcome<int64_t>::failure("negative value in: '" + trim(text) + "'");
        if (c == '.') return ParseOutcome<int64_t>::failure("fractional value in: '" + trim(text) + "'");
        break;
    }
    int64_t v = 0;
    size_t start = i;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            if (v > (INT64_MAX - 9) / 10) return ParseOutcome<int64_t>::failure("integer overflow");
            v = v * 10 + (c - '0');
        } else if (c == ',' && i + 3 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9' &&
                   s[i + 2] >= '0' && s[i + 2] <= '9' && s[i + 3] >= '0' && s[i + 3] <= '9') {
            continue;
        } else {
            break;
        }
    }
    (void)start;
    if (i < s.size() && s[i] == '.' && i + 1 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '9')
        return ParseOutcome<int64_t>::failure("fractional value where a whole number was expected");
    return ParseOutcome<int64_t>::success(v);
}

/// Case-insensitive match against the allowed vocabulary; returns the
/// canonical spelling.
inline ParseOutcome<std::string> parse_text_enum(std::string_view text,
                                                 const std::vector<std::string>& allowed) {
    std::string n = detail::normalize_words(text);
    for (const auto& a : allowed)
        if (detail::normalize_words(a) == n) return ParseOutcome<std::string>::success(a);
    std::string vocab;
    for (size_t i = 0; i < allowed.size(); ++i) vocab += (i ? ", " : "") + allowed[i];
    return ParseOutcome<std::string>::failure("'" + trim(text) + "' not in {" + vocab + "}");
}

// ---- records ----

struct FieldValue {
    FieldKind kind = FieldKind::free_text;
    Decision decision = Decision::purchase;
    Money money;
    int64_t whole = 0;
    std::string text;

    static FieldValue of(Decision d) { return {FieldKind::decision, d, Money(), 0, ""}; }
    static FieldValue of(Money m) { return {FieldKind::decimal, Decision::purchase, m, 0, ""}; }
    static FieldValue of(int64_t w) { return {FieldKind::whole, Decision::purchase, Money(), w, ""}; }
    static FieldValue enumeration(std::string t) {
        return {FieldKind::text_enum, Decision::purchase, Money(), 0, std::move(t)};
    }
    static FieldValue free(std::string t) {
        return {FieldKind::free_text, Decision::purchase, Money(), 0, std::move(t)};
    }

    /// Canonical answer-text form (what format_record joins).
    std::string format() const {
        switch (kind) {
            case FieldKind::decision: return decision_text(decision);
            case FieldKind::decimal: return money.str();
            case FieldKind::whole: return std::to_string(whole);
            case FieldKind::text_enum:
            case FieldKind::free_text: return text;
        }
        throw std::logic_error("FieldValue::format: bad kind");
    }

    nlohmann::json to_json() const {
        switch (kind) {
            case FieldKind::decision: return decision_text(decision);
            case FieldKind::decimal: return money.dollars();
            case FieldKind::whole: return whole;
            case FieldKind::text_enum:
            case FieldKind::free_text: return text;
        }
        throw std::logic_error("FieldValue::to_json: bad kind");
    }
};

struct ParsedRecord {
    std::string schema_id;
    std::vector<FieldValue> values;

    /// Field-name -> value object, insertion-ordered like the schema.
    nlohmann::ordered_json to_json(const ParseSchema& schema) const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (size_t i = 0; i < values.size() && i < schema.fields.size(); ++i)
            j[schema.fields[i].name] = values[i].to_json();
        return j;
    }
};

inline ParseOutcome<FieldValue> parse_field(std::string_view text, const FieldSpec& spec) {
    switch (spec.kind) {
        case FieldKind::decision: {
            auto r = parse_decision(text);
            if (!r.ok()) return ParseOutcome<FieldValue>::failure(r.error);
            return ParseOutcome<FieldValue>::success(FieldValue::of(*r.value));
        }
        case FieldKind::decimal: {
            auto r = parse_decimal(text);
            if (!r.ok()) return ParseOutcome<FieldValue>::failure(r.error);
            return ParseOutcome<FieldValue>::success(FieldValue::of(*r.value));
        }
        case FieldKind::whole: {
            auto r = parse_whole(text);
            if (!r.ok()) return ParseOutcome<FieldValue>::failure(r.error);
            return ParseOutcome<FieldValue>::success(FieldValue::of(*r.value));
        }
        case FieldKind::text_enum: {
            auto r = parse_text_enum(text, spec.allowed);
            if (!r.ok()) return ParseOutcome<FieldValue>::failure(r.error);
            return ParseOutcome<FieldValue>::success(FieldValue::enumeration(*r.value));
        }
        case FieldKind::free_text: {
            std::string t = trim(text);
            if (t.empty()) return ParseOutcome<FieldValue>::failure("empty field");
            return ParseOutcome<FieldValue>::success(FieldValue::free(t));
        }
    }
    return ParseOutcome<FieldValue>::failure("bad field kind");
}

/// Parse a comma-separated answer against a schema. Field count must match
/// exactly; each field parses per its kind.
inline ParseOutcome<ParsedRecord> parse_record(std::string_view text, const ParseSchema& schema) {
    auto parts = split(trim(text), ',');
    if (parts.size() != schema.fields.size())
        return ParseOutcome<ParsedRecord>::failure(
            "expected " + std::to_string(schema.fields.size()) + " comma-separated fields, got " +
            std::to_string(parts.size()));
    ParsedRecord rec;
    rec.schema_id = schema.id;
    for (size_t i = 0; i < parts.size(); ++i) {
        auto r = parse_field(parts[i], schema.fields[i]);
        if (!r.ok())
            return ParseOutcome<ParsedRecord>::failure("field '" + schema.fields[i].name + "': " + r.error);
        rec.values.push_back(std::move(*r.value));
    }
    return ParseOutcome<ParsedRecord>::success(std::move(rec));
}

/// Parse a raw model reply under a schema. Single-field schemas hand the
/// whole text to the field parser (free prose may legally contain commas);
/// multi-field schemas expect a comma-separated record.
inline ParseOutcome<ParsedRecord> parse_response(std::string_view text, const ParseSchema& schema) {
    if (schema.single_field()) {
        auto r = parse_field(text, schema.fields[0]);
        if (!r.ok())
            return ParseOutcome<ParsedRecord>::failure("field '" + schema.fields[0].name +
                                                       "': " + r.error);
        ParsedRecord rec;
        rec.schema_id = schema.id;
        rec.values.push_back(std::move(*r.value));
        return ParseOutcome<ParsedRecord>::success(std::move(rec));
    }
    return parse_record(text, schema);
}

/// Canonical answer text for a record; parse_record(format_record(r)) == r.
inline std::string format_record(const ParsedRecord& rec) {
    std::string out;
    for (size_t i = 0; i < rec.values.size(); ++i) {
        if (i) out += ", ";
        out += rec.values[i].format();
    }
    return out;
}

// ---- schema registry ----

inline const std::vector<ParseSchema>& builtin_schemas() {
    static const std::vector<ParseSchema> schemas = [] {
        std::vector<ParseSchema> v;
        v.push_back({"decision", {{"decision", FieldKind::decision, {}}}});
        v.push_back({"past_price", {{"past_price", FieldKind::decimal, {}}}});
        v.push_back({"competing_price", {{"competing_price", FieldKind::decimal, {}}}});
        v.push_back({"expiration_days", {{"expiration_days", FieldKind::whole, {}}}});
        v.push_back({"full_record",
                     {
                         {"age", FieldKind::whole, {}},
                         {"gender", FieldKind::free_text, {}},
                         {"education", FieldKind::free_text, {}},
                         {"household_income", FieldKind::whole, {}},
                         {"occupation", FieldKind::free_text, {}},
                         {"ethnicity", FieldKind::free_text, {}},
                         {"marital_status", FieldKind::free_text, {}},
                         {"household_size", FieldKind::whole, {}},
                         {"number_of_children", FieldKind::whole, {}},
                         {"state", FieldKind::free_text, {}},
                         {"home_ownership", FieldKind::text_enum, {"own", "rent"}},
                         {"purchase_frequency", FieldKind::text_enum, {"frequently", "occasionally", "rarely"}},
                         {"last_price", FieldKind::decimal, {}},
                         {"storage_space", FieldKind::text_enum, {"a lot of", "some", "limited"}},
                         {"monthly_budget", FieldKind::whole, {}},
                         {"expiration_days", FieldKind::whole, {}},
                         {"competing_price", FieldKind::decimal, {}},
                         {"decision", FieldKind::decision, {}},
                     }});
        v.push_back({"persona_record",
                     {
                         {"age", FieldKind::whole, {}},
                         {"gender", FieldKind::free_text, {}},
                         {"education", FieldKind::free_text, {}},
                         {"household_income", FieldKind::whole, {}},
                         {"occupation", FieldKind::free_text, {}},
                         {"ethnicity", FieldKind::free_text, {}},
                         {"marital_status", FieldKind::free_text, {}},
                         {"household_size", FieldKind::whole, {}},
                         {"number_of_children", FieldKind::whole, {}},
                         {"state", FieldKind::free_text, {}},
                         {"home_ownership", FieldKind::text_enum, {"own", "rent"}},
                         {"price", FieldKind::decimal, {}},
                         {"decision", FieldKind::decision, {}},
                     }});
        return v;
    }();
    return schemas;
}

inline const ParseSchema& schema_for(std::string_view id) {
    for (const auto& s : builtin_schemas())
        if (s.id == id) return s;
    throw std::runtime_error("unknown parse schema '" + std::string(id) + "'");
}

}  // namespace promptlab
