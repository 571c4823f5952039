// Acceptance suite: end-to-end checks of the harness's load-bearing
// behaviors, one line per criterion ("PASS"/"FAIL"/"SKIP" + a timing).
// The process exits nonzero iff any criterion fails; a skipped criterion
// (e.g. the live-endpoint run without an API key) is not a failure.
//
// Unlike the unit suite this binary exercises whole pipelines: seeded mock
// sweeps at full catalog scale, audits, fine-tune emission, persona flows,
// and (optionally) one real HTTP run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/analysis.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/dgp.hpp"
#include "promptlab/finetune.hpp"
#include "promptlab/http_backend.hpp"
#include "promptlab/mock_backend.hpp"
#include "promptlab/money.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/prompts.hpp"
#include "promptlab/rng.hpp"
#include "promptlab/runner.hpp"
#include "promptlab/store.hpp"
#include "promptlab/util.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace promptlab;

/// Thrown by a criterion body to report SKIP instead of PASS/FAIL.
struct SkipCriterion : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

void note(const std::string& line) { std::fprintf(stderr, "      %s\n", line.c_str()); }

const std::vector<ProductEntry>& catalog() {
    static const std::vector<ProductEntry> cat = load_catalog(testsupport::data_path("catalog.csv"));
    return cat;
}

fs::path scratch(const std::string& tag) { return fs::path(testsupport::scratch_dir("acceptance_" + tag)); }

std::vector<std::string> read_lines(const fs::path& path) {
    std::vector<std::string> lines;
    std::string text = testsupport::slurp(path.string());
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

/// One chat-format training example, unpacked from a dataset line.
struct Example {
    std::string system, user, assistant;
};

Example parse_example(const std::string& line) {
    auto j = nlohmann::json::parse(line);
    Example ex;
    for (const auto& m : j.at("messages")) {
        const std::string role = m.at("role").get<std::string>();
        const std::string content = m.at("content").get<std::string>();
        if (role == "system") ex.system = content;
        else if (role == "user") ex.user = content;
        else if (role == "assistant") ex.assistant = content;
        else throw std::runtime_error("unexpected role '" + role + "'");
    }
    return ex;
}

// ---------------------------------------------------------------------------
// 1. Undisclosed pricing lets the simulated shopper invent a history that
//    tracks the offered price; disclosing the randomized design removes the
//    dependence. Full catalog scale, under a wall-clock budget.
// ---------------------------------------------------------------------------

void criterion_confounding() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& cat = catalog();

    auto price_history_corr = [&](const std::optional<std::string>& system_id, const char* tag) {
        ExperimentDesign d;
        d.design_id = std::string("accept_confound_") + tag;
        d.run_id = d.design_id;
        d.strategy_id = "full_record";
        d.system_strategy_id = system_id;
        d.n_draws = 50;  // all 40 products x 11 grid prices x 50 draws
        d.temperature = 1.0;
        d.seed = 0;
        MockBackend backend(cat, DgpConfig{}, /*seed=*/0);
        const fs::path store = scratch(std::string("confound_") + tag) / "store.jsonl";
        RunOptions opts;
        opts.parallelism = 4;
        RunSummary s = run_experiment(d, cat, backend, store, opts);
        require(s.ok(), std::string(tag) + " sweep reported failed cells");
        require(s.records_new == 40u * 11u * 50u,
                std::string(tag) + " sweep wrote " + std::to_string(s.records_new) + " records");
        CovariateAudit audit = covariate_audit(load_records(store), schema_for("full_record"), cat);
        return audit.correlation_of("relative_price", "last_price_rel");
    };

    const double corr_obs = price_history_corr(std::nullopt, "observational");
    const double corr_int = price_history_corr(std::string("unblinded_system"), "interventional");
    note(strprintf("corr(relative_price, last_price_rel): observational %+.3f, interventional %+.3f",
                   corr_obs, corr_int));
    require(corr_obs >= 0.5, strprintf("observational correlation %.3f below 0.5", corr_obs));
    require(std::fabs(corr_int) <= 0.1,
            strprintf("interventional |correlation| %.3f above 0.1", std::fabs(corr_int)));

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    note(strprintf("runtime %.1fs (budget 60s)", secs));
    require(secs < 60.0, strprintf("runtime %.1fs exceeds the 60s budget", secs));
}

// ---------------------------------------------------------------------------
// 2. Disclosing the randomization design moves the estimated demand curve
//    toward the interventional ground truth: at least a 10% relative MAE
//    drop. The two MAEs are fully deterministic, so they are also frozen
//    here as regression fixtures.
// ---------------------------------------------------------------------------

// [DERIVED] frozen from the first seeded run of this criterion (seed 0,
// 40 products x 11 prices x 50 draws, default simulator parameters).
constexpr double kFrozenBlindedMae = 0.11460204249709538;
constexpr double kFrozenUnblindedMae = 0.039815959150280682;

void criterion_unblinding_gain() {
    const auto& cat = catalog();
    const auto reference =
        oracle_reference(cat, DgpConfig{}, QueryMode::interventional, /*seed=*/0);

    auto sweep_mae = [&](const std::string& strategy_id) {
        ExperimentDesign d;
        d.design_id = "accept_gain_" + strategy_id;
        d.run_id = d.design_id;
        d.strategy_id = strategy_id;
        d.n_draws = 50;
        d.temperature = 1.0;
        d.seed = 0;
        MockBackend backend(cat, DgpConfig{}, /*seed=*/0);
        const fs::path store = scratch("gain_" + strategy_id) / "store.jsonl";
        RunOptions opts;
        opts.parallelism = 4;
        RunSummary s = run_experiment(d, cat, backend, store, opts);
        require(s.ok(), strategy_id + " sweep reported failed cells");
        MaeResult m = mae_vs_reference(demand_curve(load_records(store)), reference);
        require(m.coverage == 1.0, strategy_id + " demand curve left reference cells uncovered");
        return m.mae;
    };

    const double mae_blinded = sweep_mae("blinded_system");
    const double mae_unblinded = sweep_mae("unblinded_system");
    const double gain = improvement_pct(mae_blinded, mae_unblinded);
    note(strprintf("MAE blinded %.17g, unblinded %.17g, improvement %.1f%%", mae_blinded,
                   mae_unblinded, gain));
    require(gain >= 10.0, strprintf("relative improvement %.1f%% below 10%%", gain));

    require(std::fabs(mae_blinded - kFrozenBlindedMae) < 1e-12,
            strprintf("blinded MAE drifted from frozen fixture: %.17g vs %.17g", mae_blinded,
                      kFrozenBlindedMae));
    require(std::fabs(mae_unblinded - kFrozenUnblindedMae) < 1e-12,
            strprintf("unblinded MAE drifted from frozen fixture: %.17g vs %.17g", mae_unblinded,
                      kFrozenUnblindedMae));
}

// ---------------------------------------------------------------------------
// 3. The MAE scorer agrees with an independent brute-force implementation
//    (nested loops, no maps) to 1e-12 on random small instances, including
//    its join, zero-price filtering, and no-overlap error behavior.
// ---------------------------------------------------------------------------

void criterion_mae_brute_force() {
    Rng rng(0xACCE5503u);
    const std::vector<std::string> ids = {"alpha", "bravo", "charlie", "delta", "echo"};
    int checked = 0, degenerate = 0;

    for (int iteration = 0; iteration < 100; ++iteration) {
        const int n_products = int(rng.uniform_int(1, 5));
        const int n_prices = int(rng.uniform_int(1, 3));
        std::vector<int> grid;
        while (int(grid.size()) < n_prices) {
            int k = int(rng.uniform_int(0, kGridPoints - 1));
            if (std::find(grid.begin(), grid.end(), k) == grid.end()) grid.push_back(k);
        }

        DemandCurve curve;
        curve.strategy_id = "synthetic";
        std::vector<ReferenceRow> ref;
        for (int p = 0; p < n_products; ++p) {
            for (int k : grid) {
                const double rel = grid_relative(k);
                if (rng.uniform01() < 0.9) {
                    const int n_valid = int(rng.uniform_int(0, 30));
                    const int purchases = n_valid > 0 ? int(rng.uniform_int(0, n_valid)) : 0;
                    curve.cells.push_back({ids[size_t(p)], relative_key(rel), rel, purchases,
                                           n_valid, int(rng.uniform_int(0, 3))});
                }
                if (rng.uniform01() < 0.95) ref.push_back({ids[size_t(p)], rel, rng.uniform01(), 50});
            }
        }
        const bool include_zero = rng.bernoulli(0.5);

        // Brute force: scan the reference, linear-search the cells.
        double total = 0.0;
        std::size_t used = 0, in_scope = 0;
        for (const auto& row : ref) {
            if (!include_zero && relative_key(row.relative_price) == relative_key(-1.0)) continue;
            ++in_scope;
            for (const auto& cell : curve.cells) {
                if (cell.product_id != row.product_id) continue;
                if (cell.rel_key != relative_key(row.relative_price)) continue;
                if (cell.n_valid <= 0) continue;
                total += std::fabs(double(cell.purchases) / double(cell.n_valid) -
                                   row.purchase_probability);
                ++used;
                break;
            }
        }

        if (in_scope == 0 || used == 0) {
            bool threw = false;
            try {
                mae_vs_reference(curve, ref, include_zero);
            } catch (const AnalysisError&) {
                threw = true;
            }
            require(threw, "scorer accepted an instance with no scoreable overlap");
            ++degenerate;
            continue;
        }

        MaeResult got = mae_vs_reference(curve, ref, include_zero);
        const double expected = total / double(used);
        require(std::fabs(got.mae - expected) <= 1e-12,
                strprintf("MAE mismatch: scorer %.17g vs brute force %.17g", got.mae, expected));
        require(got.cells_used == used, "cells_used mismatch");
        require(std::fabs(got.coverage - double(used) / double(in_scope)) <= 1e-12,
                "coverage mismatch");
        ++checked;
    }
    note(strprintf("%d instances matched to 1e-12 (%d degenerate instances raised as expected)",
                   checked, degenerate));
}

// ---------------------------------------------------------------------------
// 4. Every product's price grid has exactly 11 points running from free to
//    double the regular price (rounded to cents), with the midpoint equal to
//    the regular price; the flagship soda's regular price is pinned.
// ---------------------------------------------------------------------------

void criterion_grid_exactness() {
    for (const auto& e : catalog()) {
        const auto grid = price_grid(e);
        require(grid.size() == std::size_t(kGridPoints),
                e.product_id + ": grid is not 11 points");
        require(grid.front().absolute == Money(0), e.product_id + ": grid[0] is not $0.00");
        require(grid.back().absolute == round_to_cents(2.0 * e.regular_price.dollars()),
                e.product_id + ": grid[10] is not double the regular price rounded to cents");
        require(grid[5].absolute == e.regular_price,
                e.product_id + ": grid midpoint is not the regular price");
        for (int k = 0; k < kGridPoints; ++k) {
            require(grid[size_t(k)].relative == grid_relative(k),
                    e.product_id + ": grid relative price out of order");
            require(grid[size_t(k)].absolute == grid_absolute(e.regular_price, k),
                    e.product_id + ": grid point disagrees with grid_absolute");
        }
    }
    // [PAPER] the soda's regular price anchors the whole grid at $8.26.
    const ProductEntry& soda = find_product(catalog(), "soda_carb");
    require(price_grid(soda)[5].absolute == parse_money("8.26"),
            "soda_carb regular grid point is not $8.26");
    note(strprintf("%zu products, 11 exact points each", catalog().size()));
}

// ---------------------------------------------------------------------------
// 5. The ambiguity checker flags the minimal blinded strategy (the same
//    prompt bytes answer both the interventional and the observational
//    question) and clears the design-disclosing strategy.
// ---------------------------------------------------------------------------

void criterion_ambiguity() {
    const auto& cat = catalog();
    const ProductEntry& soda = find_product(cat, "soda_carb");
    auto pair = default_question_pair(soda.product_id, soda.regular_price);
    const std::vector<Question> questions = {pair.first, pair.second};

    AmbiguityReport blinded = check_ambiguity(builtin_strategy("simple_blinded"), questions, cat);
    require(blinded.collisions.size() >= 1,
            "simple_blinded rendered the question pair distinctly (expected a collision)");
    AmbiguityReport unblinded =
        check_ambiguity(builtin_strategy("unblinded_system"), questions, cat);
    require(unblinded.collisions.empty(),
            "unblinded_system collided on the question pair (expected none)");
    note(strprintf("simple_blinded: %zu collision(s); unblinded_system: %zu",
                   blinded.collisions.size(), unblinded.collisions.size()));
}

// ---------------------------------------------------------------------------
// 6. Parser properties: canonical renderings of decisions, currency amounts
//    and records re-parse to the same value on 10^4 generated cases each,
//    and arbitrary bytes never crash any parser - every outcome is either a
//    value (empty error) or a failure (non-empty error).
// ---------------------------------------------------------------------------

void criterion_parser_properties() {
    Rng rng(0xACCE5506u);
    const int kCases = 10000;

    // Decisions survive case, separator and wrapper noise.
    const std::vector<std::string> prefixes = {"",         "Answer: ",  "decision - ",
                                               "\"",       ">>> ",      "The customer would "};
    const std::vector<std::string> suffixes = {"", ".", "!", "\"", " today", " (final)"};
    for (int i = 0; i < kCases; ++i) {
        const Decision d = rng.bernoulli(0.5) ? Decision::purchase : Decision::not_purchase;
        std::string mangled;
        for (char c : std::string(decision_text(d))) {
            if (c == ' ') {
                const char* seps[] = {" ", "_", "-", "  "};
                mangled += seps[rng.uniform_int(0, 3)];
            } else {
                mangled += rng.bernoulli(0.5) ? char(std::toupper(c)) : c;
            }
        }
        const std::string text = prefixes[size_t(rng.uniform_int(0, int64_t(prefixes.size()) - 1))] +
                                 mangled +
                                 suffixes[size_t(rng.uniform_int(0, int64_t(suffixes.size()) - 1))];
        auto r = parse_decision(text);
        require(r.ok() && *r.value == d, "decision round-trip failed on '" + text + "'");
    }

    // Currency amounts survive symbols and prose wrappers.
    const std::vector<std::string> money_shapes = {"%s", "$%s", "about $%s", "%s dollars",
                                                   "the price was $%s."};
    for (int i = 0; i < kCases; ++i) {
        const Money m(rng.uniform_int(0, 9999999));  // up to $99,999.99
        const std::string& shape = money_shapes[size_t(rng.uniform_int(0, int64_t(money_shapes.size()) - 1))];
        const std::string text = strprintf(shape.c_str(), m.str().c_str());
        auto r = parse_decimal(text);
        require(r.ok() && *r.value == m, "decimal round-trip failed on '" + text + "'");
    }

    // Records: random well-formed values for every builtin schema re-parse
    // to the same canonical text.
    const auto& schemas = builtin_schemas();
    const std::vector<std::string> safe_text = {"female",        "male",       "college degree",
                                                "software engineer", "married",    "Texas",
                                                "prefer not to say", "white"};
    for (int i = 0; i < kCases; ++i) {
        const ParseSchema& schema = schemas[size_t(rng.uniform_int(0, int64_t(schemas.size()) - 1))];
        ParsedRecord rec;
        rec.schema_id = schema.id;
        for (const FieldSpec& f : schema.fields) {
            switch (f.kind) {
                case FieldKind::decision:
                    rec.values.push_back(FieldValue::of(rng.bernoulli(0.5) ? Decision::purchase
                                                                           : Decision::not_purchase));
                    break;
                case FieldKind::decimal:
                    rec.values.push_back(FieldValue::of(Money(rng.uniform_int(0, 99999))));
                    break;
                case FieldKind::whole:
                    rec.values.push_back(FieldValue::of(rng.uniform_int(0, 500000)));
                    break;
                case FieldKind::text_enum:
                    rec.values.push_back(FieldValue::enumeration(
                        f.allowed[size_t(rng.uniform_int(0, int64_t(f.allowed.size()) - 1))]));
                    break;
                case FieldKind::free_text:
                    rec.values.push_back(FieldValue::free(
                        safe_text[size_t(rng.uniform_int(0, int64_t(safe_text.size()) - 1))]));
                    break;
            }
        }
        const std::string text = format_record(rec);
        auto rt = parse_record(text, schema);
        require(rt.ok(), "record round-trip rejected canonical text '" + text + "' (" +
                             rt.error + ")");
        require(rt.value->values.size() == rec.values.size(), "record round-trip lost fields");
        require(format_record(*rt.value) == text,
                "record round-trip changed canonical text '" + text + "'");
    }

    // Fuzz: arbitrary bytes through every entry point. Any exception here
    // propagates and fails the criterion.
    for (int i = 0; i < kCases; ++i) {
        std::string bytes;
        const int len = int(rng.uniform_int(0, 64));
        for (int b = 0; b < len; ++b) bytes += char(rng.uniform_int(0, 255));

        auto check_outcome = [&](bool ok, const std::string& error, const char* which) {
            require(ok ? error.empty() : !error.empty(),
                    std::string(which) + " returned an inconsistent outcome");
        };
        auto rd = parse_decision(bytes);
        check_outcome(rd.ok(), rd.error, "parse_decision");
        auto rm = parse_decimal(bytes);
        check_outcome(rm.ok(), rm.error, "parse_decimal");
        auto rw = parse_whole(bytes);
        check_outcome(rw.ok(), rw.error, "parse_whole");
        const ParseSchema& schema = schemas[size_t(rng.uniform_int(0, int64_t(schemas.size()) - 1))];
        auto rr = parse_response(bytes, schema);
        check_outcome(rr.ok(), rr.error, "parse_response");
    }
    note(strprintf("%d cases per property, all held", kCases));
}

// ---------------------------------------------------------------------------
// 7. Fine-tune emission: the two survey texts render byte-exactly, the
//    leave-one-group-out folds cover every product exactly once as
//    validation, emitted training data never mentions a holdout product,
//    and mixing appends exactly n purchase-labeled log examples.
// ---------------------------------------------------------------------------

void criterion_finetune_emission() {
    const auto& cat = catalog();
    const fs::path dir = scratch("finetune");
    auto folds = make_folds(cat);

    // Fold partition: every product exactly once on the validation side.
    std::map<std::string, int> validation_count;
    std::size_t total_validation = 0;
    for (const auto& fold : folds) {
        for (const auto& id : fold.validation_products) {
            ++validation_count[id];
            ++total_validation;
        }
    }
    require(folds.size() == 4, "expected four leave-one-group-out folds");
    require(total_validation == cat.size(), "validation sides do not cover the catalog");
    for (const auto& e : cat)
        require(validation_count[e.product_id] == 1,
                e.product_id + " is not validation in exactly one fold");

    // Byte-exact rendering of the two survey texts (system + user) for the
    // flagship soda at +0.2 relative price.
    {
        const Fold& fold = fold_by_name(folds, "holdout_snacks_bakery");
        const std::vector<ReferenceRow> reference = {{"soda_carb", 0.2, 0.5, 3}};
        const fs::path out = dir / "survey.jsonl";
        EmitStats stats =
            emit_dataset(reference, builtin_strategy("unblinded_system"), fold, cat, out, 0);
        require(stats.lines == 3, "expected one example per reference observation");
        // [DERIVED] the disclosure spans the soda's grid: $0.00 to $16.52
        // (double the $8.26 regular price); +0.2 relative is $9.91.
        const std::string expect_system =
            "You, AI, are an expert in predicting customer behavior. The customer is given "
            "a survey on their purchase decision for the Coca-Cola Soda Pop, 12 fl oz, 12 "
            "Pack Cans in Soft Drinks - Carbonated where the price of the product is "
            "randomly and uniformly drawn from $0.00 to $16.52. The customer is only "
            "presented with one price and is blind to this randomization design. The "
            "customer is given the following survey. Your task is to fill in the blank "
            "___. Return the completed information without extra text.";
        const std::string expect_user =
            "Please consider the following product category: Soft Drinks - "
            "Carbonated.\n\nSuppose you are in a grocery store, and you see the "
            "following product in that category: Coca-Cola Soda Pop, 12 fl oz, 12 Pack "
            "Cans.\n\nThe product is currently priced at $9.91. Would you or would you "
            "not purchase the product? ___ [\"purchase\" or \"not purchase\"]\n\n"
            "Return example: purchase";
        for (const auto& line : read_lines(out)) {
            Example ex = parse_example(line);
            require(ex.system == expect_system, "system text is not byte-exact");
            require(ex.user == expect_user, "user text is not byte-exact");
            require(ex.assistant == "purchase" || ex.assistant == "not purchase",
                    "assistant label is not a decision");
        }
    }

    // No-leakage scan: training data for the beverage-holdout fold never
    // names a beverage product.
    const fs::path train = dir / "train.jsonl";
    {
        const Fold& fold = fold_by_name(folds, "holdout_beverages");
        auto reference = oracle_reference(cat, DgpConfig{}, QueryMode::interventional, 0,
                                          /*n_obs=*/1, /*n_draws=*/200);
        EmitStats stats =
            emit_dataset(reference, builtin_strategy("ask_purchase"), fold, cat, train, 3);
        require(stats.excluded_rows == 8u * std::size_t(kGridPoints),
                "holdout rows were not all excluded");
        require(stats.lines == 32u * std::size_t(kGridPoints), "unexpected training line count");
        std::vector<std::string> holdout_names;
        for (const auto& id : fold.validation_products)
            holdout_names.push_back(find_product(cat, id).product);
        for (const auto& line : read_lines(train)) {
            Example ex = parse_example(line);
            for (const auto& name : holdout_names) {
                require(ex.user.find(name) == std::string::npos &&
                            ex.system.find(name) == std::string::npos,
                        "training example mentions holdout product '" + name + "'");
            }
        }
    }

    // Mixing appends exactly n all-"purchase" log examples.
    {
        const fs::path log = dir / "log.csv";
        std::string csv = std::string(kObservationalCsvHeader) + "\n";
        for (int i = 0; i < 10; ++i)
            csv += strprintf("Mix Category %d,Mix Product %d,%d.99\n", i, i, i + 1);
        testsupport::spit(log.string(), csv);

        const fs::path mixed = dir / "mixed.jsonl";
        const std::size_t base_lines = read_lines(train).size();
        MixStats stats = mix_observational(train, log, 6, mixed, 0);
        require(stats.base_lines == base_lines, "mix changed the base line count");
        require(stats.added_lines == 6, "mix did not add exactly 6 lines");
        require(stats.total_lines == base_lines + 6, "mix total is not base + added");

        std::size_t added = 0;
        for (const auto& line : read_lines(mixed)) {
            Example ex = parse_example(line);
            if (ex.user.find("Mix Product ") == std::string::npos) continue;
            ++added;
            require(ex.assistant == "purchase", "mixed log example is not labeled purchase");
        }
        require(added == 6, "mixed output does not contain exactly 6 log examples");
    }
    note("folds partition 40 products; survey bytes exact; no leakage; mix added 6/6 purchases");
}

// ---------------------------------------------------------------------------
// 8. The bundled evaluation tables round-trip through the CSV loader and
//    the report formatter with their headline values intact, and the
//    improvement formula reproduces the headline 25.4% gain.
// ---------------------------------------------------------------------------

void criterion_reference_tables() {
    // [PAPER] headline MAE tables bundled as fixtures.
    const std::string table2 =
        format_eval_table(eval_matrix_from_csv(testsupport::data_path("paper_table2.csv")));
    for (const char* v : {"0.532", "0.397", "0.134", "0.128", "0.130", "0.113"})
        require(table2.find(v) != std::string::npos,
                std::string("rendered table2 is missing ") + v);

    const std::string table3 =
        format_eval_table(eval_matrix_from_csv(testsupport::data_path("paper_table3.csv")));
    for (const char* v : {"0.233", "0.126", "0.145", "0.120"})
        require(table3.find(v) != std::string::npos,
                std::string("rendered table3 is missing ") + v);

    // [DERIVED] (0.532 - 0.397) / 0.532 = 25.4% to one decimal.
    const double gain = improvement_pct(0.532, 0.397);
    require(gain >= 25.35 && gain <= 25.45,
            strprintf("improvement_pct(0.532, 0.397) = %.3f%% outside [25.35, 25.45]", gain));
    note(strprintf("tables render intact; improvement %.2f%%", gain));
}

// ---------------------------------------------------------------------------
// 9. Persona flow: 500 generated personas, score augmentation, and a
//    temperature-0 price sweep are deterministic - two runs from the same
//    seeds agree byte-for-byte and probability-for-probability.
// ---------------------------------------------------------------------------

void criterion_persona_flow() {
    const auto& cat = catalog();
    const ProductEntry& soda = find_product(cat, "soda_carb");

    auto run_once = [&](const std::string& tag) {
        MockBackend backend(cat, DgpConfig{}, /*seed=*/0);
        auto personas = generate_personas(soda, 500, backend);
        require(personas.size() == 500, "persona generation fell short of 500");
        augment_scores(personas, /*seed=*/0);

        ExperimentDesign d;
        d.design_id = "accept_personas";
        d.run_id = d.design_id;
        d.strategy_id = "persona_decide";
        d.product_ids = {soda.product_id};
        d.n_draws = 1;
        d.temperature = 0.0;
        d.seed = 0;
        const fs::path store = scratch("personas_" + tag) / "store.jsonl";
        RunOptions opts;
        opts.parallelism = 4;
        RunSummary s = run_persona_sweep(d, cat, personas, backend, store, opts);
        require(s.ok(), "persona sweep reported failed cells");
        require(s.records_new == 500u * std::size_t(kGridPoints),
                "persona sweep record count is not personas x grid points");

        DemandCurve curve = demand_curve(load_records(store));
        std::vector<double> probabilities;
        for (const auto& pt : curve.aggregate) probabilities.push_back(pt.probability);
        require(probabilities.size() == std::size_t(kGridPoints),
                "aggregate curve does not span the full grid");
        return std::make_pair(probabilities, testsupport::slurp(store.string()));
    };

    const auto first = run_once("a");
    const auto second = run_once("b");
    require(first.first == second.first, "per-price probabilities differ between identical runs");
    require(first.second == second.second, "stores differ between identical runs");
    note(strprintf("500 personas x %d prices, two runs identical (P at regular price %.3f)",
                   kGridPoints, first.first[5]));
}

// ---------------------------------------------------------------------------
// 10. Optional live check: with PROMPTLAB_API_KEY set, a 2-product x
//     11-price run against the configured endpoint parses at least 80% of
//     replies and produces a well-formed demand CSV.
// ---------------------------------------------------------------------------

void criterion_live_endpoint() {
    const char* key = std::getenv("PROMPTLAB_API_KEY");
    if (key == nullptr || *key == '\0') throw SkipCriterion("PROMPTLAB_API_KEY not set");

    const auto& cat = catalog();
    HttpBackendConfig cfg;
    if (const char* url = std::getenv("PROMPTLAB_BASE_URL")) cfg.base_url = url;
    HttpBackend backend(cfg);

    ExperimentDesign d;
    d.design_id = "accept_live";
    d.run_id = d.design_id;
    d.strategy_id = "unblinded_system";
    d.product_ids = {"soda_carb", "gv_milk"};
    d.n_draws = 2;
    d.temperature = 1.0;
    d.seed = 0;
    if (const char* model = std::getenv("PROMPTLAB_MODEL")) d.model = model;

    const fs::path dir = scratch("live");
    const fs::path store = dir / "store.jsonl";
    RunOptions opts;
    opts.parallelism = 4;
    RunSummary s = run_experiment(d, cat, backend, store, opts);
    require(s.ok(), strprintf("%zu live cell(s) failed outright", s.failed_cells.size()));

    const double attempts = double(s.records_new + s.records_skipped);
    const double failure_rate = attempts > 0 ? double(s.parse_failures) / attempts : 1.0;
    note(strprintf("live run: %zu records, parse-failure rate %.1f%%", s.records_new,
                   failure_rate * 100.0));
    require(failure_rate < 0.2,
            strprintf("parse-failure rate %.1f%% is not below 20%%", failure_rate * 100.0));

    // Emit and re-validate the demand CSV.
    DemandCurve curve = demand_curve(load_records(store));
    const fs::path csv_path = dir / "demand.csv";
    {
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        out << "product_id,relative_price,purchases,n_valid,n_failed,probability\n";
        for (const auto& cell : curve.cells)
            out << cell.product_id << ',' << strprintf("%+.1f", cell.relative_price) << ','
                << cell.purchases << ',' << cell.n_valid << ',' << cell.n_failed << ','
                << strprintf("%.6f", cell.probability()) << '\n';
        require(bool(out), "could not write the demand CSV");
    }
    auto lines = read_lines(csv_path);
    require(!lines.empty() &&
                lines[0] == "product_id,relative_price,purchases,n_valid,n_failed,probability",
            "demand CSV header is malformed");
    require(lines.size() == 1 + curve.cells.size(), "demand CSV row count mismatch");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string field;
        int fields = 0;
        while (std::getline(row, field, ',')) {
            require(!field.empty(), "demand CSV has an empty field");
            ++fields;
        }
        require(fields == 6, "demand CSV row does not have 6 fields");
    }
    note(strprintf("demand CSV: %zu cells across 2 products", curve.cells.size()));
}

// ---------------------------------------------------------------------------

struct Criterion {
    int number;
    const char* name;
    void (*body)();
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "observational-confounding-detected-interventional-clean", &criterion_confounding},
        {2, "design-disclosure-cuts-demand-mae", &criterion_unblinding_gain},
        {3, "mae-matches-brute-force-within-1e-12", &criterion_mae_brute_force},
        {4, "price-grid-11-points-exact-endpoints", &criterion_grid_exactness},
        {5, "ambiguity-collision-blinded-only", &criterion_ambiguity},
        {6, "parser-round-trips-and-fuzz-safety", &criterion_parser_properties},
        {7, "finetune-emission-folds-and-mixing", &criterion_finetune_emission},
        {8, "reference-tables-render-exactly", &criterion_reference_tables},
        {9, "persona-sweep-reproducibility", &criterion_persona_flow},
        {10, "live-endpoint-demand-run", &criterion_live_endpoint},
    };

    int passed = 0, failed = 0, skipped = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string status, detail;
        try {
            c.body();
            status = "PASS";
            ++passed;
        } catch (const SkipCriterion& s) {
            status = "SKIP";
            detail = s.what();
            ++skipped;
        } catch (const std::exception& e) {
            status = "FAIL";
            detail = e.what();
            ++failed;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  %2d. %s (%.1fs)%s%s\n", status.c_str(), c.number, c.name, secs,
                    detail.empty() ? "" : " - ", detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d passed, %d failed, %d skipped\n", passed, failed, skipped);
    return failed == 0 ? 0 : 1;
}
