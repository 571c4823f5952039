#pragma once

// Prompt strategies: named pairs of (system, user) templates with {placeholder}
// slots, a declared answer schema, and a blinding tag. Includes the builtin
// strategy set, strict template rendering, and the ambiguity checker that
// detects distinct questions collapsing onto byte-identical prompts.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/money.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Blinding { blinded, unblinded };

inline const char* blinding_name(Blinding b) { return b == Blinding::blinded ? "blinded" : "unblinded"; }

/// Causal reading of a question: price set by the experimenter vs. price
/// merely observed in the world.
enum class Interpretation { interventional, observational };

inline const char* interpretation_name(Interpretation i) {
    return i == Interpretation::interventional ? "interventional" : "observational";
}

/// What a question asks the respondent to produce.
enum class Target {
    purchase_decision,
    past_price,
    competing_price,
    expiration_days,
    persona_record,
    full_record,
};

inline const char* target_name(Target t) {
    switch (t) {
        case Target::purchase_decision: return "purchase_decision";
        case Target::past_price: return "past_price";
        case Target::competing_price: return "competing_price";
        case Target::expiration_days: return "expiration_days";
        case Target::persona_record: return "persona_record";
        case Target::full_record: return "full_record";
    }
    throw std::logic_error("target_name: bad enum");
}

// ---- placeholder machinery ----

inline bool placeholder_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == ' ';
}

/// Extract {placeholder} names from a template, in order of appearance
/// (duplicates included).
inline std::vector<std::string> extract_placeholders(std::string_view tpl) {
    std::vector<std::string> names;
    for (size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '{') continue;
        size_t j = i + 1;
        while (j < tpl.size() && placeholder_char(tpl[j])) ++j;
        if (j < tpl.size() && tpl[j] == '}' && j > i + 1) {
            names.emplace_back(tpl.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return names;
}

/// Rendered binding values, keyed by placeholder name. Currency must already
/// be formatted "$X.XX" (see bind_currency).
using Bindings = std::map<std::string, std::string>;

inline std::string bind_currency(Money m) { return m.usd(); }

struct RenderedPrompt {
    std::string system;
    std::string user;

    std::string joined() const { return system + "\n" + user; }
    uint64_t hash() const { return fnv1a64(system + "\x1f" + user); }
    bool operator==(const RenderedPrompt&) const = default;
};

struct PromptStrategy {
    std::string id;
    Blinding blinding = Blinding::blinded;
    std::string system_template;
    std::string user_template;
    std::string answer_schema;  // key into the parsing module's schema registry
    /// Set only when the templates explicitly state the causal design
    /// (unblinded). Unset means the interpretation is silently dropped at
    /// render time — the root of ambiguity.
    std::optional<Interpretation> encodes;

    std::set<std::string> placeholder_set() const {
        std::set<std::string> s;
        for (auto& n : extract_placeholders(system_template)) s.insert(n);
        for (auto& n : extract_placeholders(user_template)) s.insert(n);
        return s;
    }

    uint64_t hash() const {
        return fnv1a64(id + "\x1f" + blinding_name(blinding) + "\x1f" + system_template + "\x1f" +
                       user_template + "\x1f" + answer_schema);
    }
};

/// Substitute every {placeholder}. Each template placeholder must have a
/// binding and every binding must be used; leftovers of either kind are
/// template/binding drift and throw.
inline RenderedPrompt render_prompt(const PromptStrategy& strategy, const Bindings& bindings) {
    auto required = strategy.placeholder_set();
    for (const auto& [k, v] : bindings)
        if (!required.count(k))
            throw PromptError("render '" + strategy.id + "': unused binding '" + k + "'");
    for (const auto& k : required)
        if (!bindings.count(k))
            throw PromptError("render '" + strategy.id + "': missing binding '" + k + "'");
    auto substitute = [&](const std::string& tpl) {
        std::string out;
        out.reserve(tpl.size() + 64);
        for (size_t i = 0; i < tpl.size(); ++i) {
            if (tpl[i] == '{') {
                size_t j = i + 1;
                while (j < tpl.size() && placeholder_char(tpl[j])) ++j;
                if (j < tpl.size() && tpl[j] == '}' && j > i + 1) {
                    out += bindings.at(std::string(tpl.substr(i + 1, j - i - 1)));
                    i = j;
                    continue;
                }
            }
            out.push_back(tpl[i]);
        }
        return out;
    };
    return RenderedPrompt{substitute(strategy.system_template), substitute(strategy.user_template)};
}

// ---- questions and ambiguity ----

/// A fully specified research question: what to elicit, under which causal
/// interpretation, for which product at which focal price, plus any extra
/// framing facts ("context") the asker considers part of the question.
struct Question {
    Target target = Target::purchase_decision;
    Interpretation interpretation = Interpretation::interventional;
    std::string product_id;
    Money price;
    std::map<std::string, std::string> context;

    std::string describe() const {
        std::string s = std::string(target_name(target)) + "/" + interpretation_name(interpretation) +
                        "/" + product_id + "@" + price.str();
        for (const auto& [k, v] : context) s += "/" + k + "=" + v;
        return s;
    }
};

/// Identity key for "distinct questions" in collision reports: everything the
/// renderer might silently drop. Price and product always render, so they are
/// not part of the distinctness key.
inline std::string question_distinct_key(const Question& q) {
    std::string s = std::string(target_name(q.target)) + "\x1f" + interpretation_name(q.interpretation);
    for (const auto& [k, v] : q.context) s += "\x1f" + k + "=" + v;
    return s;
}

/// Build bindings for a question under a strategy, or nullopt when the
/// strategy cannot express the question (wrong encoded interpretation, or the
/// templates demand placeholders the question cannot supply). Context keys
/// that match no placeholder are dropped — by design: that silent drop is what
/// the ambiguity checker exposes.
inline std::optional<Bindings> question_bindings(const PromptStrategy& strategy, const Question& q,
                                                 const std::vector<ProductEntry>& catalog) {
    if (strategy.encodes && *strategy.encodes != q.interpretation) return std::nullopt;
    const ProductEntry& entry = find_product(catalog, q.product_id);
    auto required = strategy.placeholder_set();
    Bindings b;
    auto maybe = [&](const std::string& key, const std::string& value) {
        if (required.count(key)) b[key] = value;
    };
    maybe("category", entry.category);
    maybe("product", entry.product);
    maybe("price", bind_currency(q.price));
    maybe("min_price", bind_currency(grid_absolute(entry.regular_price, 0)));
    maybe("max_price", bind_currency(grid_absolute(entry.regular_price, kGridPoints - 1)));
    for (const auto& [k, v] : q.context) maybe(k, v);
    for (const auto& k : required)
        if (!b.count(k)) return std::nullopt;  // template wants data the question lacks
    return b;
}

inline std::optional<RenderedPrompt> render_question(const PromptStrategy& strategy, const Question& q,
                                                     const std::vector<ProductEntry>& catalog) {
    auto b = question_bindings(strategy, q, catalog);
    if (!b) return std::nullopt;
    return render_prompt(strategy, *b);
}

/// Two distinct questions whose renderings are byte-identical under one
/// strategy: any fixed answer text is wrong for at least one of them.
struct CollisionReport {
    size_t question_a = 0;
    size_t question_b = 0;
    std::string question_a_desc;
    std::string question_b_desc;
    RenderedPrompt rendered;
    std::string differing;  // human summary of what the prompt failed to carry
};

struct AmbiguityReport {
    std::string strategy_id;
    std::vector<CollisionReport> collisions;
    size_t questions_total = 0;
    size_t questions_unrenderable = 0;  // skipped, surfaced as a warning count

    bool ambiguous() const { return !collisions.empty(); }
};

inline std::string describe_difference(const Question& a, const Question& b) {
    std::vector<std::string> parts;
    if (a.target != b.target)
        parts.push_back(std::string("target: ") + target_name(a.target) + " vs " + target_name(b.target));
    if (a.interpretation != b.interpretation)
        parts.push_back(std::string("interpretation: ") + interpretation_name(a.interpretation) +
                        " vs " + interpretation_name(b.interpretation));
    if (a.context != b.context) parts.push_back("context differs");
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) out += (i ? "; " : "") + parts[i];
    return out;
}

/// Render every question and report all unordered pairs of distinct questions
/// that collapse to the same bytes. Unrenderable questions are skipped and
/// counted, not errors.
inline AmbiguityReport check_ambiguity(const PromptStrategy& strategy,
                                       const std::vector<Question>& questions,
                                       const std::vector<ProductEntry>& catalog) {
    AmbiguityReport report;
    report.strategy_id = strategy.id;
    report.questions_total = questions.size();
    std::vector<std::optional<RenderedPrompt>> rendered(questions.size());
    for (size_t i = 0; i < questions.size(); ++i) {
        rendered[i] = render_question(strategy, questions[i], catalog);
        if (!rendered[i]) ++report.questions_unrenderable;
    }
    for (size_t i = 0; i < questions.size(); ++i) {
        if (!rendered[i]) continue;
        for (size_t j = i + 1; j < questions.size(); ++j) {
            if (!rendered[j]) continue;
            if (!(*rendered[i] == *rendered[j])) continue;
            if (question_distinct_key(questions[i]) == question_distinct_key(questions[j])) continue;
            CollisionReport c;
            c.question_a = i;
            c.question_b = j;
            c.question_a_desc = questions[i].describe();
            c.question_b_desc = questions[j].describe();
            c.rendered = *rendered[i];
            c.differing = describe_difference(questions[i], questions[j]);
            report.collisions.push_back(std::move(c));
        }
    }
    return report;
}

/// The canonical colliding pair: same product and focal price, purchase
/// decision asked interventionally vs. observationally.
inline std::pair<Question, Question> default_question_pair(const std::string& product_id, Money price) {
    Question q1{Target::purchase_decision, Interpretation::interventional, product_id, price, {}};
    Question q2{Target::purchase_decision, Interpretation::observational, product_id, price, {}};
    return {q1, q2};
}

// ---- builtin strategies ----

namespace detail {

// System prompts. Singular-blank variants return one value; plural-blank
// variants return comma-separated records.
inline const char* kSysCustomerBlanksCsv =
    "You, AI, are a customer. Your task is to fill in the blanks ___. Return the completed "
    "information in comma-separated values, without any extra text.";
inline const char* kSysCustomerBlanksCsvShort =
    "You, AI, are a customer. Your task is to fill in the blanks __. Return the completed "
    "information in comma-separated values, without any extra text.";
inline const char* kSysCustomerBlank =
    "You, AI, are a customer. Your task is to fill in the blank ___. Return the completed "
    "information without extra text.";
inline const char* kSysUnblinded =
    "You, AI, are an expert in predicting customer behavior. The customer is given a survey on "
    "their purchase decision for the {product} in {category} where the price of the product is "
    "randomly and uniformly drawn from {min_price} to {max_price}. The customer is only presented "
    "with one price and is blind to this randomization design. The customer is given the following "
    "survey. Your task is to fill in the blank ___. Return the completed information without extra "
    "text.";

inline const char* kUserAskPurchase =
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at {price}. Would you or would you not purchase the product? "
    "___ [\"purchase\" or \"not purchase\"]\n"
    "\n"
    "Return example: purchase";

inline const char* kUserPastPrice =
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The last time you purchased this product, it was priced at $___ [a number with up to 2 "
    "decimal points].\n"
    "\n"
    "The product is currently priced at: {price}.\n"
    "\n"
    "Return example 1: XX.XX";

inline const char* kUserCompetingPrice =
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at: {price}. The price of a similar competing product from a "
    "different brand is ___ [a number with up to 2 decimal points].\n"
    "\n"
    "Return example 1: XX.XX";

inline const char* kUserExpirationDays =
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at: {price}. The expiration date of the product is ___ [a "
    "whole number] days from now.\n"
    "\n"
    "Return example 1: 10";

inline const char* kUserSimpleBlinded =
    "Consider the product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is priced at: {price}. You decide to ___ ['purchase' or 'not purchase']";

inline const char* kUserFullRecord =
    "You are a consumer with the following characteristics:\n"
    "Age: ___ [a whole number]\n"
    "Gender: ___\n"
    "Education level: ___\n"
    "Household income: ___ [a whole number]\n"
    "Occupation: ___\n"
    "Ethnicity: ___\n"
    "Marital status: ___\n"
    "Household size: ___ [a whole number]\n"
    "Number of children: ___ [a whole number]\n"
    "State of residence: ___ [state]\n"
    "Home ownership: ___ [e.g., \"own,\" \"rent\"]\n"
    "\n"
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "You have purchased this product ___ [e.g., \"frequently,\" \"occasionally,\" \"rarely\"] in "
    "the past. The last time you saw this product, it was priced at $___ [a number with up to 2 "
    "decimal points]. You have ___ [e.g., \"a lot of,\" \"some,\" \"limited\"] storage space at "
    "home. Your monthly grocery budget is ___ [a whole number].\n"
    "\n"
    "The expiration date of the product is ___ [a whole number] days from now. The product is "
    "currently priced at {price}. A similar competing product from a different brand is priced at "
    "$___ [a number with up to 2 decimal points].\n"
    "\n"
    "Would you or would you not purchase the product? ___ [\"purchase\" or \"not purchase\"]\n"
    "\n"
    "Return example: 35, female, bachelor's degree, 50000, software engineer, Asian, married, 3, "
    "1, CA, own, occasionally, 2.99, some, 800, 60, 3.49, purchase";

inline const char* kUserPersonaGenerate =
    "You are a consumer with the following characteristics:\n"
    "Age: ___ [a whole number]\n"
    "Gender: ___\n"
    "Education level: ___\n"
    "Household income: ___ [a whole number]\n"
    "Occupation: ___\n"
    "Ethnicity: ___\n"
    "Marital status: ___\n"
    "Household size: ___ [a whole number]\n"
    "Number of children: ___ [a whole number]\n"
    "State of residence: ___ [state]\n"
    "Home ownership: ___ [e.g., \"own,\" \"rent\"]\n"
    "\n"
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at ___ [a number with up to 2 decimal points].\n"
    "\n"
    "Would you or would you not purchase {product}? ___ [\"purchase\" or \"not purchase\"]\n"
    "Return example: 35, female, bachelor's degree, 50000, software engineer, Asian,married, 3, 1, "
    "CA, own, 3.99, purchase";

inline const char* kUserPersonaDecide =
    "You are a consumer with the following characteristics:\n"
    "Age: {age}\n"
    "Gender: {gender}\n"
    "Education level: {education}\n"
    "Household income: {income}\n"
    "Occupation: {occupation}\n"
    "Ethnicity: {ethnicity}\n"
    "Marital status: {marital status}\n"
    "Household size: {household size}\n"
    "Number of children: {number of children}\n"
    "State of residence: {state}\n"
    "Home ownership: {home ownership}\n"
    "\n"
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at {price}.\n"
    "\n"
    "Would you or would you not purchase {product}? ___ [\"purchase\" or \"not purchase\"]\n"
    "\n"
    "Return example: purchase";

inline const char* kUserPersonaCompeting =
    "You are a consumer with the following characteristics:\n"
    "Age: {age}\n"
    "Gender: {gender}\n"
    "Education level: {education}\n"
    "Household income: {income}\n"
    "Occupation: {occupation}\n"
    "Ethnicity: {ethnicity}\n"
    "Marital status: {marital status}\n"
    "Household size: {household size}\n"
    "Number of children: {number of children}\n"
    "State of residence: {state}\n"
    "Home ownership: {home ownership}\n"
    "\n"
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at {price}. A similar competing product from a different "
    "brand is priced at {competing_price}.\n"
    "\n"
    "Would you or would you not purchase {product}? ___ [\"purchase\" or \"not purchase\"]\n"
    "\n"
    "Return example: purchase";

inline const char* kUserAmazonObservational =
    "Consider the product category: {category}.\n"
    "\n"
    "Suppose you are shopping online, and you see the product {product}.\n"
    "\n"
    "The product is priced at {price}. You decide to ___ [\"purchase\" or \"not purchase\"].\n"
    "\n"
    "Return example 1: purchase\n"
    "Return example 2: not purchase";

// Staged-persona building blocks. The demographics stanza is stage 1; each
// later stage appends one stanza, cumulatively.
inline const char* kStagedDemographics =
    "You are a consumer with the following characteristics:\n"
    "\n"
    "# Demographics:\n"
    "- Geographic region: {region}\n"
    "- Gender: {sex}\n"
    "- Age: {age}\n"
    "- Education level: {education}\n"
    "- Race: {race}\n"
    "- Citizen of the US: {citizen_status}\n"
    "- Marital status: {marriage}\n"
    "- Religion: {religion}\n"
    "- Religious attendance: {religious_attendance}\n"
    "- Political affiliation: {political_affiliation}\n"
    "- Income: {total_family_income}\n"
    "- Political views: {political_views}\n"
    "- Household size: {household_size}\n"
    "- Employment status: {employment_status}";

inline const char* kStanzaTightwad =
    "# Tightwad-Spendthrift: {score_ST-TW} ({pct_spendthrift} percentile)\n"
    "<note: The score ranges from 4 to 26. Lower scores (4-11) indicate difficulty spending money, "
    "while higher scores (19-26) indicate difficulty controlling spending.>";

inline const char* kStanzaDiscount =
    "# Discount, Present Bias:\n"
    "<note: These are implied rates computed from your time-value of money preferences. Higher "
    "values of the discount rate imply greater impatience. Higher values of present bias imply "
    "greater departure from normative economic behavior.>\n"
    "- Discount: {score_discount} ({pct_discount} percentile)\n"
    "- Present Bias: {score_presentbias} ({pct_presentbias} percentile)";

inline const char* kStanzaRiskAversion =
    "# Risk aversion: {score_riskaversion} ({pct_riskaversion} percentile)\n"
    "<note: Higher scores indicate a greater tendency for risk aversion in a choice between a "
    "sure-amount and lottery payout.>";

inline const char* kStanzaLossAversion =
    "# Loss aversion: {score_lossaversion} ({pct_lossaversion} percentile)\n"
    "<note: Higher scores indicate a greater tendency for loss aversion in a choice between a "
    "sure-amount and a lottery payout.>";

inline const char* kStanzaFinLiteracy =
    "# Financial Literacy: {score_finliteracy} ({pct_finliteracy} percentile)\n"
    "<note: The score ranges from 0 to 8, and a higher score indicates you correctly answered more "
    "questions related to general financial literacy.>";

inline const char* kStanzaNumeracy =
    "# Numeracy: {score_numeracy} ({pct_numeracy} percentile)\n"
    "<note: The score ranges from 0 to 8, and a higher score indicates you correctly answered more "
    "questions related to numeracy.>";

inline const char* kStanzaMentalAccounting =
    "# Mental Accounting: {score_mentalaccounting} ({pct_mentalaccounting} percentile)\n"
    "<note: The score ranges from 0 to 100 percent, and higher scores indicate a greater adherence "
    "to the principles of mental accounting proposed by Thaler: segregate gains, integrate losses, "
    "segregate a small gain from a large loss, and integrate a small loss with a large gain.>";

inline const char* kStanzaMaximization =
    "# Maximization: {score_maximization} ({pct_maximization} percentile)\n"
    "<note: The score ranges from 1 to 5, and higher scores indicate a tendency to optimize rather "
    "than satisfice when making decisions.>";

inline const char* kStanzaMinimalism =
    "# Minimalism: {score_minimalism} ({pct_minimalism} percentile)\n"
    "<note: The score ranges from 1 to 5, and a higher score indicates a higher preference for "
    "minimalism.>";

inline const char* kStanzaGreen =
    "# GREEN: {score_GREEN} ({pct_green} percentile)\n"
    "<note: The score ranges from 1 to 5, and higher scores indicate a higher affinity for "
    "environmentalism.>";

inline const char* kStanzaBigFive =
    "# Big 5 Personality:\n"
    "<note: Openness reflects curiosity and receptiveness to new experiences, Conscientiousness "
    "indicates self-discipline and goal-directed behavior, Extraversion measures sociability and "
    "assertiveness, Agreeableness reflects compassion and cooperativeness, and Neuroticism "
    "captures emotional instability and susceptibility to negative emotions. Each score ranges "
    "from 1 to 5, and a higher score indicates a greater display of the associated traits.>\n"
    "- Extraversion: {score_extraversion} ({pct_extraversion} percentile)\n"
    "- Agreeableness: {score_agreeableness} ({pct_agreeableness} percentile)\n"
    "- Conscientiousness: {wave1_score_conscientiousness} ({pct_conscientiousness} percentile)\n"
    "- Openness: {score_openness} ({pct_openness} percentile)\n"
    "- Neuroticism: {score_neuroticism} ({pct_neuroticism} percentile)";

inline const char* kStagedPurchaseBlock =
    "Please consider the following product category: {category}.\n"
    "\n"
    "Suppose you are in a grocery store, and you see the following product in that category: "
    "{product}.\n"
    "\n"
    "The product is currently priced at {price}.\n"
    "\n"
    "Would you or would you not purchase {product}? ___ [\"purchase\" or \"not purchase\"]\n"
    "Return example: purchase";

inline const std::vector<const char*>& staged_stanzas() {
    static const std::vector<const char*> stanzas = {
        kStanzaTightwad,   kStanzaDiscount,    kStanzaRiskAversion,     kStanzaLossAversion,
        kStanzaFinLiteracy, kStanzaNumeracy,    kStanzaMentalAccounting, kStanzaMaximization,
        kStanzaMinimalism, kStanzaGreen,       kStanzaBigFive,
    };
    return stanzas;
}

inline std::string staged_user_template(int stage) {
    if (stage < 1 || stage > 12) throw PromptError("staged_user_template: stage must be 1..12");
    std::string user = kStagedDemographics;
    const auto& stanzas = staged_stanzas();
    for (int s = 2; s <= stage; ++s) {
        user += "\n\n";
        user += stanzas[size_t(s - 2)];
    }
    user += "\n\n";
    user += kStagedPurchaseBlock;
    return user;
}

}  // namespace detail

inline constexpr int kStageCount = 12;

inline std::string staged_strategy_id(int stage) {
    return "persona_stage" + std::to_string(stage);
}

/// All builtin strategies, in a stable order.
inline const std::vector<PromptStrategy>& builtin_strategies() {
    static const std::vector<PromptStrategy> strategies = [] {
        using namespace detail;
        std::vector<PromptStrategy> v;
        v.push_back({"ask_purchase", Blinding::blinded, kSysCustomerBlanksCsv, kUserAskPurchase,
                     "decision", std::nullopt});
        v.push_back({"past_price", Blinding::blinded, kSysCustomerBlanksCsvShort, kUserPastPrice,
                     "past_price", std::nullopt});
        v.push_back({"competing_price", Blinding::blinded, kSysCustomerBlanksCsvShort,
                     kUserCompetingPrice, "competing_price", std::nullopt});
        v.push_back({"expiration_days", Blinding::blinded, kSysCustomerBlanksCsvShort,
                     kUserExpirationDays, "expiration_days", std::nullopt});
        v.push_back({"simple_blinded", Blinding::blinded, "", kUserSimpleBlinded, "decision",
                     std::nullopt});
        v.push_back({"full_record", Blinding::blinded, kSysCustomerBlanksCsv, kUserFullRecord,
                     "full_record", std::nullopt});
        v.push_back({"persona_generate", Blinding::blinded, kSysCustomerBlanksCsv,
                     kUserPersonaGenerate, "persona_record", std::nullopt});
        v.push_back({"persona_decide", Blinding::blinded, kSysCustomerBlanksCsv, kUserPersonaDecide,
                     "decision", std::nullopt});
        v.push_back({"persona_competing", Blinding::blinded, kSysCustomerBlanksCsv,
                     kUserPersonaCompeting, "decision", std::nullopt});
        v.push_back({"amazon_observational", Blinding::blinded, kSysCustomerBlank,
                     kUserAmazonObservational, "decision", std::nullopt});
        v.push_back({"blinded_system", Blinding::blinded, kSysCustomerBlank, kUserAskPurchase,
                     "decision", std::nullopt});
        v.push_back({"unblinded_system", Blinding::unblinded, kSysUnblinded, kUserAskPurchase,
                     "decision", Interpretation::interventional});
        for (int stage = 1; stage <= kStageCount; ++stage)
            v.push_back({staged_strategy_id(stage), Blinding::blinded, kSysCustomerBlanksCsv,
                         staged_user_template(stage), "decision", std::nullopt});
        return v;
    }();
    return strategies;
}

/// One stage of the cumulative covariate-addition design: which covariates the
/// stage introduces and the running total disclosed in the prompt.
struct StageSpec {
    int stage = 1;
    int total_covariates = 0;
    std::vector<std::string> added;

    std::string strategy_id() const { return staged_strategy_id(stage); }
};

inline const std::vector<StageSpec>& default_stage_specs() {
    static const std::vector<StageSpec> specs = {
        {1, 14,
         {"age", "citizen status", "education", "employment status", "household size", "marriage",
          "political affiliation", "political views", "race", "region", "religion",
          "religious attendance", "sex", "total family income"}},
        {2, 15, {"Tightwad-Spendthrift Score"}},
        {3, 17, {"Discount Rate", "Present Bias"}},
        {4, 18, {"Risk Aversion"}},
        {5, 19, {"Loss Aversion"}},
        {6, 20, {"Financial Literacy"}},
        {7, 21, {"Numeracy"}},
        {8, 22, {"score mentalaccounting"}},
        {9, 23, {"score maximization"}},
        {10, 24, {"score minimalism"}},
        {11, 25, {"score GREEN"}},
        {12, 30,
         {"score agreeableness", "score extraversion", "score neuroticism", "score openness",
          "score conscientiousness"}},
    };
    return specs;
}

inline std::vector<std::string> builtin_strategy_ids() {
    std::vector<std::string> ids;
    for (const auto& s : builtin_strategies()) ids.push_back(s.id);
    return ids;
}

inline const PromptStrategy& builtin_strategy(std::string_view id) {
    for (const auto& s : builtin_strategies())
        if (s.id == id) return s;
    throw PromptError("unknown strategy '" + std::string(id) + "'");
}

/// Export the strategy catalog as JSONL (one structured record per strategy),
/// suitable for audit diffs.
inline std::string strategy_catalog_jsonl() {
    std::string out;
    for (const auto& s : builtin_strategies()) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["blinding"] = blinding_name(s.blinding);
        if (s.encodes)
            j["encodes_interpretation"] = interpretation_name(*s.encodes);
        else
            j["encodes_interpretation"] = nullptr;
        j["answer_schema"] = s.answer_schema;
        j["system_template"] = s.system_template;
        j["user_template"] = s.user_template;
        j["template_hash"] = hash_hex(s.hash());
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace promptlab
