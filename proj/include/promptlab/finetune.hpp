#pragma once

// Fine-tuning dataset compilation from reference demand, leave-one-group-out
// folds, mixing with observational purchase logs, and the evaluation matrix
// comparing models under blinded and unblinded evaluation prompts.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/analysis.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/csv.hpp"
#include "promptlab/prompts.hpp"
#include "promptlab/rng.hpp"
#include "promptlab/runner.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

class FinetuneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- folds ----

struct Fold {
    std::string name;  // "holdout_<group>"
    ProductGroup holdout = ProductGroup::beverages;
    std::vector<std::string> train_products;       // catalog order
    std::vector<std::string> validation_products;  // catalog order
};

/// One fold per product group: that group's products become the validation
/// set and everything else trains. Demands every group be represented so no
/// fold degenerates.
inline std::vector<Fold> make_folds(const std::vector<ProductEntry>& catalog) {
    std::vector<Fold> folds;
    folds.reserve(kAllGroups.size());
    for (ProductGroup g : kAllGroups) {
        Fold f;
        f.name = std::string("holdout_") + group_name(g);
        f.holdout = g;
        for (const auto& e : catalog)
            (e.group == g ? f.validation_products : f.train_products).push_back(e.product_id);
        if (f.validation_products.empty())
            throw FinetuneError(std::string("catalog has no products in group '") + group_name(g) +
                                "'; cannot build folds");
        if (f.train_products.empty())
            throw FinetuneError(std::string("holding out group '") + group_name(g) +
                                "' leaves no training products");
        folds.push_back(std::move(f));
    }
    return folds;
}

inline const Fold& fold_by_name(const std::vector<Fold>& folds, std::string_view name) {
    for (const auto& f : folds)
        if (f.name == name) return f;
    throw FinetuneError("no fold named '" + std::string(name) + "'");
}

// ---- dataset emission ----

struct EmitStats {
    std::size_t lines = 0;          // chat examples written
    std::size_t excluded_rows = 0;  // reference rows outside the training set
};

/// Compile a chat fine-tuning dataset from reference demand: each training
/// reference row becomes n_obs examples whose assistant labels are Bernoulli
/// draws at the row's purchase probability, phrased with the given strategy's
/// exact prompt bytes. Rows for validation products are excluded so the
/// holdout group never leaks into training.
inline EmitStats emit_dataset(const std::vector<ReferenceRow>& reference,
                              const PromptStrategy& strategy, const Fold& fold,
                              const std::vector<ProductEntry>& catalog,
                              const std::filesystem::path& out_path, std::uint64_t seed) {
    std::set<std::string> train(fold.train_products.begin(), fold.train_products.end());
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FinetuneError("cannot write dataset: " + out_path.string());

    EmitStats stats;
    for (const auto& row : reference) {
        if (!train.count(row.product_id)) {
            ++stats.excluded_rows;
            continue;
        }
        const ProductEntry& entry = find_product(catalog, row.product_id);
        Money price = absolute_from_relative(entry.regular_price, row.relative_price);
        Bindings bindings;
        for (const auto& name : strategy.placeholder_set()) {
            if (name == "category")
                bindings[name] = entry.category;
            else if (name == "product")
                bindings[name] = entry.product;
            else if (name == "price")
                bindings[name] = bind_currency(price);
            else if (name == "min_price")
                bindings[name] = bind_currency(grid_absolute(entry.regular_price, 0));
            else if (name == "max_price")
                bindings[name] = bind_currency(grid_absolute(entry.regular_price, kGridPoints - 1));
            else
                throw FinetuneError("strategy '" + strategy.id + "' requires placeholder '" +
                                    name + "', which a reference row cannot supply");
        }
        RenderedPrompt rp = render_prompt(strategy, bindings);

        Rng rng(derive_seed({seed, fnv1a64("finetune_label"), fnv1a64(row.product_id),
                             static_cast<std::uint64_t>(relative_key(row.relative_price))}));
        for (int i = 0; i < row.n_obs; ++i) {
            const bool buy = rng.bernoulli(row.purchase_probability);
            ordered_json line;
            auto messages = ordered_json::array();
            if (!rp.system.empty())
                messages.push_back({{"role", "system"}, {"content", rp.system}});
            messages.push_back({{"role", "user"}, {"content", rp.user}});
            messages.push_back(
                {{"role", "assistant"}, {"content", buy ? "purchase" : "not purchase"}});
            line["messages"] = messages;
            out << line.dump() << '\n';
            ++stats.lines;
        }
    }
    if (!out) throw FinetuneError("dataset write failed: " + out_path.string());
    if (stats.lines == 0)
        throw FinetuneError("no reference rows matched the training products; empty dataset");
    return stats;
}

// ---- observational mixing ----

struct MixStats {
    std::size_t base_lines = 0;
    std::size_t added_lines = 0;
    std::size_t total_lines = 0;
};

inline const char* kObservationalCsvHeader = "category,product,price";

/// Blend a survey-style dataset with n examples drawn from an observational
/// purchase log (category,product,price rows — every logged row is a
/// completed purchase, so the assistant label is always "purchase"). The
/// sample and the final interleave are both seeded, so the output bytes are
/// a pure function of (inputs, n, seed).
inline MixStats mix_observational(const std::filesystem::path& dataset_path,
                                  const std::filesystem::path& source_csv, std::size_t n,
                                  const std::filesystem::path& out_path, std::uint64_t seed) {
    std::ifstream in(dataset_path, std::ios::binary);
    if (!in) throw FinetuneError("cannot read dataset: " + dataset_path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) lines.push_back(line);
    MixStats stats;
    stats.base_lines = lines.size();

    auto rows = csv_read_file(source_csv.string());
    if (rows.empty()) throw FinetuneError("observational CSV is empty: " + source_csv.string());
    const std::vector<std::string> header = {"category", "product", "price"};
    if (rows.front() != header)
        throw FinetuneError("observational CSV has wrong header: " + source_csv.string());
    struct LogRow {
        std::string category;
        std::string product;
        Money price;
    };
    std::vector<LogRow> log;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = source_csv.string() + " row " + std::to_string(i + 1);
        if (r.size() != 3) throw FinetuneError(where + ": expected 3 fields");
        if (r[0].empty() || r[1].empty()) throw FinetuneError(where + ": empty field");
        Money price;
        try {
            price = parse_money(r[2]);
        } catch (const std::exception& e) {
            throw FinetuneError(where + ": bad price: " + e.what());
        }
        log.push_back({r[0], r[1], price});
    }
    if (n > log.size())
        throw FinetuneError("requested " + std::to_string(n) +
                            " observational examples but the log has only " +
                            std::to_string(log.size()));

    std::vector<std::size_t> order(log.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng select_rng(derive_seed({seed, fnv1a64("mix_select")}));
    select_rng.shuffle(order);

    const PromptStrategy& strategy = builtin_strategy("amazon_observational");
    for (std::size_t i = 0; i < n; ++i) {
        const LogRow& r = log[order[i]];
        Bindings bindings;
        for (const auto& name : strategy.placeholder_set()) {
            if (name == "category")
                bindings[name] = r.category;
            else if (name == "product")
                bindings[name] = r.product;
            else if (name == "price")
                bindings[name] = bind_currency(r.price);
            else
                throw FinetuneError("observational strategy requires placeholder '" + name +
                                    "', which a log row cannot supply");
        }
        RenderedPrompt rp = render_prompt(strategy, bindings);
        ordered_json j;
        auto messages = ordered_json::array();
        if (!rp.system.empty()) messages.push_back({{"role", "system"}, {"content", rp.system}});
        messages.push_back({{"role", "user"}, {"content", rp.user}});
        messages.push_back({{"role", "assistant"}, {"content", "purchase"}});
        j["messages"] = messages;
        lines.push_back(j.dump());
        ++stats.added_lines;
    }

    Rng shuffle_rng(derive_seed({seed, fnv1a64("mix_shuffle")}));
    shuffle_rng.shuffle(lines);

    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FinetuneError("cannot write mixed dataset: " + out_path.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw FinetuneError("mixed dataset write failed: " + out_path.string());
    stats.total_lines = lines.size();
    return stats;
}

// ---- evaluation matrix ----

struct EvalEntry {
    std::string label;
    std::string model_id;
    double eval_blinded = std::numeric_limits<double>::quiet_NaN();
    double eval_unblinded = std::numeric_limits<double>::quiet_NaN();
    double coverage_blinded = 0.0;
    double coverage_unblinded = 0.0;
};

struct EvalMatrixReport {
    std::string fold_name;
    std::vector<EvalEntry> rows;
    std::vector<std::string> warnings;
};

struct EvalMatrixConfig {
    std::filesystem::path workdir;  // one store per (model, eval prompt)
    int n_draws = 50;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::vector<int> grid_indices;  // empty = full grid
    int parallelism = 1;
    bool include_zero_price = true;
};

namespace detail {
inline std::string slug(const std::string& s) {
    std::string out;
    for (char c : s)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(
                          static_cast<unsigned char>(c)))
                                                                  : '_');
    return out;
}
}  // namespace detail

/// Score each (label, model id) pair on a fold's validation products under
/// both evaluation prompts: the blinded system prompt and the unblinded one
/// that states the price-randomization design. Cells whose backend calls
/// fail are simply unavailable — they lower coverage instead of aborting.
inline EvalMatrixReport eval_matrix(
    const std::vector<std::pair<std::string, std::string>>& models, const Fold& fold,
    const std::vector<ProductEntry>& catalog, Backend& backend,
    const std::vector<ReferenceRow>& reference, const EvalMatrixConfig& config) {
    if (config.workdir.empty()) throw FinetuneError("eval matrix workdir must be set");
    if (models.empty()) throw FinetuneError("eval matrix needs at least one model");
    std::filesystem::create_directories(config.workdir);

    EvalMatrixReport report;
    report.fold_name = fold.name;
    for (const auto& [label, model_id] : models) {
        EvalEntry entry;
        entry.label = label;
        entry.model_id = model_id;
        for (const char* eval_id : {"blinded_system", "unblinded_system"}) {
            const bool blinded = std::string(eval_id) == "blinded_system";
            ExperimentDesign design;
            design.design_id = "eval_" + detail::slug(label) + "_" + eval_id;
            design.run_id = design.design_id;
            design.strategy_id = eval_id;
            design.product_ids = fold.validation_products;
            design.grid_indices = config.grid_indices;
            design.n_draws = config.n_draws;
            design.temperature = config.temperature;
            design.seed = config.seed;
            design.model = model_id;

            auto store_path = config.workdir / (design.run_id + ".jsonl");
            RunOptions run_options;
            run_options.parallelism = config.parallelism;
            RunSummary rs = run_experiment(design, catalog, backend, store_path, run_options);
            for (const auto& f : rs.failed_cells)
                report.warnings.push_back(design.run_id + ": " + f);

            try {
                DemandCurve curve = demand_curve(load_records(store_path));
                MaeResult mae = mae_vs_reference(curve, reference, config.include_zero_price);
                (blinded ? entry.eval_blinded : entry.eval_unblinded) = mae.mae;
                (blinded ? entry.coverage_blinded : entry.coverage_unblinded) = mae.coverage;
            } catch (const AnalysisError& e) {
                report.warnings.push_back(design.run_id + ": " + e.what());
            }
        }
        report.rows.push_back(std::move(entry));
    }
    return report;
}

// ---- report formatting ----

inline const char* kEvalCsvHeader = "label,eval_blinded,eval_unblinded";

inline std::string format_eval_cell(double v) {
    return std::isnan(v) ? std::string("-") : strprintf("%.3f", v);
}

/// Plain-text table, one row per model, MAE at 3 decimals.
inline std::string format_eval_table(const EvalMatrixReport& report) {
    std::size_t width = std::string("Model").size();
    for (const auto& r : report.rows) width = std::max(width, r.label.size());
    std::string out;
    if (!report.fold_name.empty()) out += "Validation: " + report.fold_name + "\n";
    out += strprintf("%-*s  %12s  %14s\n", static_cast<int>(width), "Model", "Blinded eval",
                     "Unblinded eval");
    for (const auto& r : report.rows)
        out += strprintf("%-*s  %12s  %14s\n", static_cast<int>(width), r.label.c_str(),
                         format_eval_cell(r.eval_blinded).c_str(),
                         format_eval_cell(r.eval_unblinded).c_str());
    return out;
}

inline std::string eval_matrix_to_csv(const EvalMatrixReport& report) {
    std::string out = std::string(kEvalCsvHeader) + "\n";
    for (const auto& r : report.rows)
        out += csv_row({r.label, std::isnan(r.eval_blinded) ? "" : strprintf("%.3f", r.eval_blinded),
                        std::isnan(r.eval_unblinded) ? "" : strprintf("%.3f", r.eval_unblinded)});
    return out;
}

inline EvalMatrixReport eval_matrix_from_csv(const std::filesystem::path& path) {
    auto rows = csv_read_file(path.string());
    if (rows.empty()) throw FinetuneError("eval CSV is empty: " + path.string());
    const std::vector<std::string> header = {"label", "eval_blinded", "eval_unblinded"};
    if (rows.front() != header)
        throw FinetuneError("eval CSV has wrong header: " + path.string());
    EvalMatrixReport report;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = path.string() + " row " + std::to_string(i + 1);
        if (r.size() != 3) throw FinetuneError(where + ": expected 3 fields");
        EvalEntry e;
        e.label = r[0];
        if (e.label.empty()) throw FinetuneError(where + ": empty label");
        auto parse_cell = [&](const std::string& s) {
            if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0' || v < 0.0)
                throw FinetuneError(where + ": bad MAE '" + s + "'");
            return v;
        };
        e.eval_blinded = parse_cell(r[1]);
        e.eval_unblinded = parse_cell(r[2]);
        report.rows.push_back(std::move(e));
    }
    return report;
}

}  // namespace promptlab
