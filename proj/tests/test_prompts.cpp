// Prompt strategies: template bytes, strict rendering, the ambiguity checker,
// staged-disclosure assembly, and the catalog export.

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/catalog.hpp"
#include "promptlab/dgp.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/prompts.hpp"

#include "test_support.hpp"

using namespace promptlab;
using Catch::Matchers::ContainsSubstring;

namespace {

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size()))
        ++n;
    return n;
}

std::vector<ProductEntry> bundled_catalog() {
    return load_catalog(testsupport::data_path("catalog.csv"));
}

}  // namespace

// ---- frozen template bytes ----
// These strings are independent copies of the published survey wording; the
// tests fail if the library's templates drift from them.

TEST_CASE("purchase-question template bytes are frozen") {
    const PromptStrategy& s = builtin_strategy("ask_purchase");
    CHECK(s.system_template ==
          "You, AI, are a customer. Your task is to fill in the blanks ___. Return the completed "
          "information in comma-separated values, without any extra text.");
    CHECK(s.user_template ==
          "Please consider the following product category: {category}.\n"
          "\n"
          "Suppose you are in a grocery store, and you see the following product in that category: "
          "{product}.\n"
          "\n"
          "The product is currently priced at {price}. Would you or would you not purchase the "
          "product? ___ [\"purchase\" or \"not purchase\"]\n"
          "\n"
          "Return example: purchase");
    CHECK(s.blinding == Blinding::blinded);
    CHECK(!s.encodes.has_value());
    CHECK(s.answer_schema == "decision");
}

TEST_CASE("unblinded system prompt states the randomization design") {
    const PromptStrategy& s = builtin_strategy("unblinded_system");
    CHECK(s.system_template ==
          "You, AI, are an expert in predicting customer behavior. The customer is given a survey "
          "on their purchase decision for the {product} in {category} where the price of the "
          "product is randomly and uniformly drawn from {min_price} to {max_price}. The customer "
          "is only presented with one price and is blind to this randomization design. The "
          "customer is given the following survey. Your task is to fill in the blank ___. Return "
          "the completed information without extra text.");
    CHECK(s.blinding == Blinding::unblinded);
    REQUIRE(s.encodes.has_value());
    CHECK(*s.encodes == Interpretation::interventional);
    // Shares the purchase-question user template with the blinded variant.
    CHECK(s.user_template == builtin_strategy("blinded_system").user_template);
    CHECK(s.user_template == builtin_strategy("ask_purchase").user_template);
}

TEST_CASE("minimal blinded template has no system prompt") {
    const PromptStrategy& s = builtin_strategy("simple_blinded");
    CHECK(s.system_template.empty());
    CHECK(s.user_template ==
          "Consider the product category: {category}.\n"
          "\n"
          "Suppose you are in a grocery store, and you see the following product in that category: "
          "{product}.\n"
          "\n"
          "The product is priced at: {price}. You decide to ___ ['purchase' or 'not purchase']");
}

TEST_CASE("price-elicitation template bytes are frozen") {
    const PromptStrategy& s = builtin_strategy("past_price");
    CHECK(s.user_template ==
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
          "Return example 1: XX.XX");
    CHECK(s.system_template ==
          "You, AI, are a customer. Your task is to fill in the blanks __. Return the completed "
          "information in comma-separated values, without any extra text.");
}

TEST_CASE("record templates carry the expected number of blanks") {
    // 11 persona traits + frequency, last price, storage, budget, expiration,
    // competing price, decision = 18 blanks.
    CHECK(count_occurrences(builtin_strategy("full_record").user_template, "___") == 18);
    // 11 persona traits + price + decision = 13 blanks.
    CHECK(count_occurrences(builtin_strategy("persona_generate").user_template, "___") == 13);
}

TEST_CASE("record return examples parse under their own schemas") {
    auto full = parse_response(
        "35, female, bachelor's degree, 50000, software engineer, Asian, married, 3, "
        "1, CA, own, occasionally, 2.99, some, 800, 60, 3.49, purchase",
        schema_for("full_record"));
    REQUIRE(full.ok());
    CHECK(full.value->values.back().decision == Decision::purchase);

    // The persona return example omits one space ("Asian,married"); the comma
    // still separates the fields, so it must parse.
    auto persona = parse_response(
        "35, female, bachelor's degree, 50000, software engineer, Asian,married, 3, 1, "
        "CA, own, 3.99, purchase",
        schema_for("persona_record"));
    REQUIRE(persona.ok());
    CHECK(persona.value->values[5].text == "Asian");
    CHECK(persona.value->values[6].text == "married");
}

TEST_CASE("observational shopping template bytes are frozen") {
    const PromptStrategy& s = builtin_strategy("amazon_observational");
    CHECK(s.user_template ==
          "Consider the product category: {category}.\n"
          "\n"
          "Suppose you are shopping online, and you see the product {product}.\n"
          "\n"
          "The product is priced at {price}. You decide to ___ [\"purchase\" or \"not "
          "purchase\"].\n"
          "\n"
          "Return example 1: purchase\n"
          "Return example 2: not purchase");
    CHECK(s.system_template ==
          "You, AI, are a customer. Your task is to fill in the blank ___. Return the completed "
          "information without extra text.");
}

// ---- placeholders and rendering ----

TEST_CASE("placeholders may contain spaces and hyphens") {
    auto names = extract_placeholders("A: {marital status}, B: {score_ST-TW}, C: {x}");
    REQUIRE(names.size() == 3);
    CHECK(names[0] == "marital status");
    CHECK(names[1] == "score_ST-TW");
    CHECK(names[2] == "x");

    auto none = extract_placeholders("braces {not/a placeholder} and {} and {a\nb}");
    CHECK(none.empty());  // '/' and newline are not placeholder chars; empty names don't count
}

TEST_CASE("rendering is strict about bindings") {
    PromptStrategy s;
    s.id = "t";
    s.system_template = "sys {a}";
    s.user_template = "user {b} {b}";

    SECTION("all placeholders bound renders both templates") {
        auto r = render_prompt(s, {{"a", "1"}, {"b", "2"}});
        CHECK(r.system == "sys 1");
        CHECK(r.user == "user 2 2");
    }
    SECTION("missing binding throws") {
        CHECK_THROWS_WITH(render_prompt(s, {{"a", "1"}}), ContainsSubstring("missing binding 'b'"));
    }
    SECTION("unused binding throws") {
        CHECK_THROWS_WITH(render_prompt(s, {{"a", "1"}, {"b", "2"}, {"c", "3"}}),
                          ContainsSubstring("unused binding 'c'"));
    }
}

TEST_CASE("rendered purchase question carries grid prices verbatim") {
    auto catalog = bundled_catalog();
    const auto& coke = find_product(catalog, "soda_carb");
    REQUIRE(coke.regular_price.str() == "8.26");

    Question q{Target::purchase_decision, Interpretation::interventional, "soda_carb",
               grid_absolute(coke.regular_price, 6), {}};
    auto rendered = render_question(builtin_strategy("ask_purchase"), q, catalog);
    REQUIRE(rendered.has_value());
    CHECK_THAT(rendered->user, ContainsSubstring("currently priced at $9.91."));
    CHECK_THAT(rendered->user,
               ContainsSubstring("Coca-Cola Soda Pop, 12 fl oz, 12 Pack Cans"));
    CHECK_THAT(rendered->user, ContainsSubstring("category: Soft Drinks - Carbonated."));

    auto unblinded = render_question(builtin_strategy("unblinded_system"), q, catalog);
    REQUIRE(unblinded.has_value());
    CHECK_THAT(unblinded->system,
               ContainsSubstring("randomly and uniformly drawn from $0.00 to $16.52"));
    CHECK(unblinded->user == rendered->user);
}

TEST_CASE("distinctness key ignores product and price but not context") {
    Question a{Target::purchase_decision, Interpretation::interventional, "soda_carb",
               Money{991}, {}};
    Question b = a;
    b.product_id = "lays_chips";
    b.price = Money{123};
    CHECK(question_distinct_key(a) == question_distinct_key(b));

    Question c = a;
    c.interpretation = Interpretation::observational;
    CHECK(question_distinct_key(a) != question_distinct_key(c));

    Question d = a;
    d.context["note"] = "on sale";
    CHECK(question_distinct_key(a) != question_distinct_key(d));
}

// ---- ambiguity ----

TEST_CASE("blinded purchase prompts collapse interventional and observational asks") {
    auto catalog = bundled_catalog();
    auto [q1, q2] = default_question_pair("soda_carb", Money{499});

    for (const char* id : {"simple_blinded", "ask_purchase", "blinded_system"}) {
        INFO("strategy " << id);
        auto report = check_ambiguity(builtin_strategy(id), {q1, q2}, catalog);
        CHECK(report.ambiguous());
        REQUIRE(report.collisions.size() == 1);
        CHECK(report.collisions[0].differing ==
              "interpretation: interventional vs observational");
        CHECK(report.questions_unrenderable == 0);
    }
}

TEST_CASE("stating the design in the prompt removes the collision") {
    auto catalog = bundled_catalog();
    auto [q1, q2] = default_question_pair("soda_carb", Money{499});
    auto report = check_ambiguity(builtin_strategy("unblinded_system"), {q1, q2}, catalog);
    CHECK_FALSE(report.ambiguous());
    CHECK(report.collisions.empty());
    // The observational question is not expressible by a template that
    // hard-codes the interventional design; it is skipped, not mangled.
    CHECK(report.questions_unrenderable == 1);
    CHECK(report.questions_total == 2);
}

TEST_CASE("a collision makes one fixed answer wrong for some question") {
    // Any answerer is a function of the prompt bytes alone. On a collision the
    // bytes are equal, so its answers are equal — but the two questions have
    // different correct answers under the structural model whenever price
    // moves, so at least one answer is wrong. Verify both halves.
    auto catalog = bundled_catalog();
    const auto& entry = find_product(catalog, "soda_carb");
    Money price = grid_absolute(entry.regular_price, 6);  // +20% over regular
    auto [q1, q2] = default_question_pair("soda_carb", price);

    auto r1 = render_question(builtin_strategy("simple_blinded"), q1, catalog);
    auto r2 = render_question(builtin_strategy("simple_blinded"), q2, catalog);
    REQUIRE(r1.has_value());
    REQUIRE(r2.has_value());
    CHECK(*r1 == *r2);  // identical bytes => identical answer distribution

    DgpConfig config;
    double p_int = ground_truth_demand(config, 0.2, QueryMode::interventional, 7, 20000).probability;
    double p_obs = ground_truth_demand(config, 0.2, QueryMode::observational, 7, 20000).probability;
    CHECK(std::fabs(p_int - p_obs) > 0.02);  // the correct answers genuinely differ
}

TEST_CASE("collisions appear exactly when a varying question component is dropped") {
    auto catalog = bundled_catalog();

    PromptStrategy drops_note;
    drops_note.id = "drops_note";
    drops_note.user_template = "Buy {product} at {price}? ___";
    drops_note.answer_schema = "decision";

    PromptStrategy keeps_note = drops_note;
    keeps_note.id = "keeps_note";
    keeps_note.user_template = "Buy {product} at {price}? ({note}) ___";

    auto note_value = GENERATE(std::string("in-store"), std::string("online"),
                               std::string("after seeing an ad"));
    Question plain{Target::purchase_decision, Interpretation::interventional, "lays_chips",
                   Money{250}, {}};
    Question noted = plain;
    noted.context["note"] = note_value;

    auto dropped = check_ambiguity(drops_note, {plain, noted}, catalog);
    CHECK(dropped.collisions.size() == 1);

    auto kept = check_ambiguity(keeps_note, {plain, noted}, catalog);
    CHECK(kept.collisions.empty());
    CHECK(kept.questions_unrenderable == 1);  // 'plain' has no note to supply
}

// ---- staged disclosure ----

TEST_CASE("stage table is internally consistent") {
    const auto& specs = default_stage_specs();
    REQUIRE(specs.size() == static_cast<std::size_t>(kStageCount));
    REQUIRE(kStageCount == 12);
    CHECK(specs.front().stage == 1);
    CHECK(specs.front().total_covariates == 14);
    CHECK(specs.front().added.size() == 14);
    CHECK(specs.back().total_covariates == 30);
    for (std::size_t i = 1; i < specs.size(); ++i) {
        INFO("stage " << specs[i].stage);
        CHECK(specs[i].stage == specs[i - 1].stage + 1);
        CHECK(specs[i].total_covariates ==
              specs[i - 1].total_covariates + static_cast<int>(specs[i].added.size()));
    }
}

TEST_CASE("stage 1 template is the demographics sheet plus the purchase question") {
    CHECK(builtin_strategy("persona_stage1").user_template ==
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
          "- Employment status: {employment_status}\n"
          "\n"
          "Please consider the following product category: {category}.\n"
          "\n"
          "Suppose you are in a grocery store, and you see the following product in that "
          "category: {product}.\n"
          "\n"
          "The product is currently priced at {price}.\n"
          "\n"
          "Would you or would you not purchase {product}? ___ [\"purchase\" or \"not purchase\"]\n"
          "Return example: purchase");
}

TEST_CASE("stage 2 adds the spend-attitude stanza verbatim") {
    const std::string& t2 = builtin_strategy("persona_stage2").user_template;
    CHECK_THAT(t2, ContainsSubstring(
                       "# Tightwad-Spendthrift: {score_ST-TW} ({pct_spendthrift} percentile)\n"
                       "<note: The score ranges from 4 to 26. Lower scores (4-11) indicate "
                       "difficulty spending money, while higher scores (19-26) indicate "
                       "difficulty controlling spending.>"));
    CHECK_THAT(builtin_strategy("persona_stage1").user_template,
               !ContainsSubstring("Tightwad"));
}

TEST_CASE("stages grow by appending stanzas before the purchase question") {
    const std::string block_suffix =
        "\n\nPlease consider the following product category: {category}.";
    for (int stage = 1; stage < kStageCount; ++stage) {
        const std::string& cur = builtin_strategy(staged_strategy_id(stage)).user_template;
        const std::string& next = builtin_strategy(staged_strategy_id(stage + 1)).user_template;
        auto cut = cur.find(block_suffix);
        REQUIRE(cut != std::string::npos);
        INFO("stage " << stage << " -> " << stage + 1);
        CHECK(next.substr(0, cut) == cur.substr(0, cut));  // shared disclosure prefix
        CHECK(next.size() > cur.size());
    }
    // The final stage discloses the full battery.
    const std::string& t12 = builtin_strategy("persona_stage12").user_template;
    for (const char* heading :
         {"# Demographics:", "# Tightwad-Spendthrift:", "# Discount, Present Bias:",
          "# Risk aversion:", "# Loss aversion:", "# Financial Literacy:", "# Numeracy:",
          "# Mental Accounting:", "# Maximization:", "# Minimalism:", "# GREEN:",
          "# Big 5 Personality:"}) {
        INFO(heading);
        CHECK_THAT(t12, ContainsSubstring(heading));
    }
}

// ---- strategy registry ----

TEST_CASE("builtin strategies are unique, schema-valid, and renderable") {
    const auto& all = builtin_strategies();
    CHECK(all.size() == 24);  // 12 single-purpose + 12 staged
    std::set<std::string> ids;
    for (const auto& s : all) {
        INFO("strategy " << s.id);
        CHECK(ids.insert(s.id).second);
        CHECK_NOTHROW(schema_for(s.answer_schema));
        CHECK(!s.user_template.empty());
    }
    CHECK(ids.count("persona_stage1") == 1);
    CHECK(ids.count("persona_stage12") == 1);
    CHECK_THROWS_AS(builtin_strategy("no_such_strategy"), PromptError);
}

TEST_CASE("strategy catalog exports one JSON record per strategy") {
    std::string jsonl = strategy_catalog_jsonl();
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        REQUIRE(nl != std::string::npos);  // every record newline-terminated
        lines.push_back(jsonl.substr(pos, nl - pos));
        pos = nl + 1;
    }
    const auto& all = builtin_strategies();
    REQUIRE(lines.size() == all.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto j = nlohmann::ordered_json::parse(lines[i]);
        CHECK(j.at("id").get<std::string>() == all[i].id);
        CHECK(j.at("answer_schema").get<std::string>() == all[i].answer_schema);
        CHECK(j.at("template_hash").get<std::string>() == hash_hex(all[i].hash()));
        CHECK(j.at("user_template").get<std::string>() == all[i].user_template);
        if (all[i].encodes)
            CHECK(j.at("encodes_interpretation").get<std::string>() ==
                  interpretation_name(*all[i].encodes));
        else
            CHECK(j.at("encodes_interpretation").is_null());
    }
}

TEST_CASE("rendered prompts hash and compare by bytes") {
    RenderedPrompt a{"sys", "user"};
    RenderedPrompt b{"sys", "user"};
    RenderedPrompt c{"sys", "user "};
    CHECK(a == b);
    CHECK(a.hash() == b.hash());
    CHECK_FALSE(a == c);
    CHECK(a.hash() != c.hash());
    CHECK(a.joined() == "sys\nuser");
}
