#pragma once

// Demand-curve estimation from stored draws, comparison against reference
// demand (MAE), covariate audits of elicited records, and the staged
// covariate-disclosure sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptlab/catalog.hpp"
#include "promptlab/csv.hpp"
#include "promptlab/dgp.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/prompts.hpp"
#include "promptlab/runner.hpp"
#include "promptlab/store.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- demand curves ----

struct DemandCell {
    std::string product_id;
    std::int64_t rel_key = 0;
    double relative_price = 0.0;
    int purchases = 0;
    int n_valid = 0;
    int n_failed = 0;

    double probability() const {
        return n_valid > 0 ? static_cast<double>(purchases) / n_valid
                           : std::numeric_limits<double>::quiet_NaN();
    }
};

/// Demand aggregated across products at one relative price: the unweighted
/// mean of per-product purchase probabilities (products are equal citizens,
/// regardless of how many of their draws parsed).
struct DemandPoint {
    std::int64_t rel_key = 0;
    double relative_price = 0.0;
    double probability = 0.0;
    int n_products = 0;
};

struct DemandCurve {
    std::string strategy_id;
    std::vector<DemandCell> cells;       // (product, price), sorted
    std::vector<DemandPoint> aggregate;  // by price, sorted
    std::vector<std::string> empty_cells;  // cells where every draw failed to parse
};

inline DemandCurve demand_curve(const std::vector<DrawRecord>& records) {
    if (records.empty()) throw AnalysisError("no records to analyze");
    DemandCurve curve;
    curve.strategy_id = records.front().strategy_id;

    std::map<std::pair<std::string, std::int64_t>, DemandCell> cells;
    for (const auto& rec : records) {
        if (rec.strategy_id != curve.strategy_id)
            throw AnalysisError("records mix strategies '" + curve.strategy_id + "' and '" +
                                rec.strategy_id + "'; analyze one strategy at a time");
        auto key = std::make_pair(rec.product_id, relative_key(rec.relative_price));
        DemandCell& cell = cells[key];
        if (cell.product_id.empty()) {
            cell.product_id = rec.product_id;
            cell.rel_key = key.second;
            cell.relative_price = rec.relative_price;
        }
        if (!rec.parse_ok()) {
            ++cell.n_failed;
            continue;
        }
        if (!rec.parsed.is_object() || !rec.parsed.contains("decision"))
            throw AnalysisError("record for " + rec.product_id +
                                " has no parsed decision; demand needs a decision-bearing schema");
        const std::string d = rec.parsed.at("decision").get<std::string>();
        ++cell.n_valid;
        if (d == "purchase") ++cell.purchases;
    }

    std::map<std::int64_t, DemandPoint> agg;
    for (auto& [key, cell] : cells) {
        if (cell.n_valid == 0) {
            curve.empty_cells.push_back(cell.product_id + "@" +
                                        strprintf("%+.1f", cell.relative_price));
        } else {
            DemandPoint& pt = agg[cell.rel_key];
            pt.rel_key = cell.rel_key;
            pt.relative_price = cell.relative_price;
            pt.probability += cell.probability();
            ++pt.n_products;
        }
        curve.cells.push_back(cell);
    }
    for (auto& [rk, pt] : agg) {
        pt.probability /= pt.n_products;
        curve.aggregate.push_back(pt);
    }
    return curve;
}

// ---- reference demand ----

struct ReferenceRow {
    std::string product_id;
    double relative_price = 0.0;
    double purchase_probability = 0.0;
    int n_obs = 0;
};

inline const char* kReferenceCsvHeader = "product_id,relative_price,purchase_probability,n_obs";

inline std::vector<ReferenceRow> load_reference_csv(const std::filesystem::path& path) {
    auto rows = csv_read_file(path.string());
    if (rows.empty()) throw AnalysisError("reference CSV is empty: " + path.string());
    const std::vector<std::string> header = {"product_id", "relative_price",
                                             "purchase_probability", "n_obs"};
    if (rows.front() != header)
        throw AnalysisError("reference CSV has wrong header: " + path.string());
    std::vector<ReferenceRow> out;
    std::set<std::pair<std::string, std::int64_t>> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = path.string() + " row " + std::to_string(i + 1);
        if (r.size() != 4) throw AnalysisError(where + ": expected 4 fields");
        ReferenceRow row;
        row.product_id = r[0];
        if (row.product_id.empty()) throw AnalysisError(where + ": empty product_id");
        char* end = nullptr;
        row.relative_price = std::strtod(r[1].c_str(), &end);
        if (end == r[1].c_str() || *end != '\0')
            throw AnalysisError(where + ": bad relative_price '" + r[1] + "'");
        row.purchase_probability = std::strtod(r[2].c_str(), &end);
        if (end == r[2].c_str() || *end != '\0' || row.purchase_probability < 0.0 ||
            row.purchase_probability > 1.0)
            throw AnalysisError(where + ": bad purchase_probability '" + r[2] + "'");
        row.n_obs = std::atoi(r[3].c_str());
        if (row.n_obs < 1) throw AnalysisError(where + ": n_obs must be at least 1");
        if (!seen.insert({row.product_id, relative_key(row.relative_price)}).second)
            throw AnalysisError(where + ": duplicate (product, relative price)");
        out.push_back(std::move(row));
    }
    return out;
}

inline void save_reference_csv(const std::filesystem::path& path,
                               const std::vector<ReferenceRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AnalysisError("cannot write reference CSV: " + path.string());
    out << kReferenceCsvHeader << '\n';
    for (const auto& r : rows)
        out << csv_row({r.product_id, strprintf("%.6f", r.relative_price),
                        strprintf("%.6f", r.purchase_probability), std::to_string(r.n_obs)});
    if (!out) throw AnalysisError("reference CSV write failed: " + path.string());
}

/// Reference demand from the structural model: one row per product and grid
/// point. The model's demand depends on price only through the relative
/// discount, so each grid point is evaluated once and shared across products.
inline std::vector<ReferenceRow> oracle_reference(const std::vector<ProductEntry>& products,
                                                  const DgpConfig& config, QueryMode mode,
                                                  std::uint64_t seed, int n_obs = 50,
                                                  int n_draws = 100000) {
    std::vector<double> prob(kGridPoints);
    for (int k = 0; k < kGridPoints; ++k)
        prob[k] = ground_truth_demand(config, grid_relative(k), mode, seed, n_draws).probability;
    std::vector<ReferenceRow> rows;
    rows.reserve(products.size() * kGridPoints);
    for (const auto& e : products)
        for (int k = 0; k < kGridPoints; ++k)
            rows.push_back({e.product_id, grid_relative(k), prob[k], n_obs});
    return rows;
}

// ---- error metrics ----

struct MaeResult {
    double mae = 0.0;
    std::size_t cells_used = 0;
    double coverage = 0.0;  // matched cells / reference rows in scope
};

/// Mean absolute error of estimated cell probabilities against reference
/// rows, joined on (product, relative price). `include_zero_price` controls
/// whether the free-product point (relative price -1.0) is scored.
inline MaeResult mae_vs_reference(const DemandCurve& curve, const std::vector<ReferenceRow>& ref,
                                  bool include_zero_price = true) {
    std::map<std::pair<std::string, std::int64_t>, double> est;
    for (const auto& cell : curve.cells)
        if (cell.n_valid > 0) est[{cell.product_id, cell.rel_key}] = cell.probability();

    const std::int64_t zero_key = relative_key(-1.0);
    double total = 0.0;
    std::size_t used = 0, in_scope = 0;
    for (const auto& r : ref) {
        std::int64_t rk = relative_key(r.relative_price);
        if (!include_zero_price && rk == zero_key) continue;
        ++in_scope;
        auto it = est.find({r.product_id, rk});
        if (it == est.end()) continue;
        total += std::fabs(it->second - r.purchase_probability);
        ++used;
    }
    if (in_scope == 0) throw AnalysisError("reference has no rows in scope");
    if (used == 0) throw AnalysisError("estimates and reference share no cells");
    return {total / static_cast<double>(used), used,
            static_cast<double>(used) / static_cast<double>(in_scope)};
}

/// Percent reduction in MAE when moving from the blinded to the unblinded
/// estimate.
inline double improvement_pct(double mae_blinded, double mae_unblinded) {
    if (!(mae_blinded > 0.0)) throw AnalysisError("blinded MAE must be positive");
    return (mae_blinded - mae_unblinded) / mae_blinded * 100.0;
}

// ---- covariate audit ----

/// Joint second moments of the elicited record fields against the offered
/// relative price. Decimal (currency) fields are normalized by each product's
/// regular price — a past price of $4 means something different for a $2
/// product than a $12 one — and renamed "<field>_rel". Whole-number fields
/// enter raw; categorical fields are excluded and listed.
struct CovariateAudit {
    std::vector<std::string> variables;
    std::vector<std::string> excluded;
    std::vector<double> means;
    std::vector<std::vector<double>> covariance;   // sample covariance (n - 1)
    std::vector<std::vector<double>> correlation;  // NaN for constant variables
    std::size_t rows = 0;

    double correlation_of(const std::string& a, const std::string& b) const {
        auto idx = [&](const std::string& name) {
            auto it = std::find(variables.begin(), variables.end(), name);
            if (it == variables.end()) throw AnalysisError("no audited variable '" + name + "'");
            return static_cast<std::size_t>(it - variables.begin());
        };
        return correlation[idx(a)][idx(b)];
    }
};

inline CovariateAudit covariate_audit(const std::vector<DrawRecord>& records,
                                      const ParseSchema& schema,
                                      const std::vector<ProductEntry>& catalog) {
    CovariateAudit audit;
    std::vector<const FieldSpec*> numeric;
    audit.variables.push_back("relative_price");
    for (const auto& f : schema.fields) {
        if (f.kind == FieldKind::decimal) {
            numeric.push_back(&f);
            audit.variables.push_back(f.name + "_rel");
        } else if (f.kind == FieldKind::whole) {
            numeric.push_back(&f);
            audit.variables.push_back(f.name);
        } else {
            audit.excluded.push_back(f.name);
        }
    }
    if (audit.variables.size() < 2)
        throw AnalysisError("schema '" + schema.id + "' has no numeric fields to audit");

    std::vector<std::vector<double>> data;
    for (const auto& rec : records) {
        if (!rec.parse_ok()) continue;
        const ProductEntry& entry = find_product(catalog, rec.product_id);
        std::vector<double> row;
        row.reserve(audit.variables.size());
        row.push_back(rec.relative_price);
        bool complete = true;
        for (const FieldSpec* f : numeric) {
            if (!rec.parsed.is_object() || !rec.parsed.contains(f->name)) {
                complete = false;
                break;
            }
            double v = rec.parsed.at(f->name).get<double>();
            if (f->kind == FieldKind::decimal) v /= entry.regular_price.dollars();
            row.push_back(v);
        }
        if (complete) data.push_back(std::move(row));
    }
    if (data.size() < 2)
        throw AnalysisError("covariate audit needs at least 2 fully parsed records, got " +
                            std::to_string(data.size()));

    const std::size_t n = data.size();
    const std::size_t dim = audit.variables.size();
    audit.rows = n;
    audit.means.assign(dim, 0.0);
    for (const auto& row : data)
        for (std::size_t j = 0; j < dim; ++j) audit.means[j] += row[j];
    for (std::size_t j = 0; j < dim; ++j) audit.means[j] /= static_cast<double>(n);

    audit.covariance.assign(dim, std::vector<double>(dim, 0.0));
    for (const auto& row : data)
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = i; j < dim; ++j)
                audit.covariance[i][j] += (row[i] - audit.means[i]) * (row[j] - audit.means[j]);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i; j < dim; ++j) {
            audit.covariance[i][j] /= static_cast<double>(n - 1);
            audit.covariance[j][i] = audit.covariance[i][j];
        }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    audit.correlation.assign(dim, std::vector<double>(dim, nan));
    for (std::size_t i = 0; i < dim; ++i) {
        if (audit.covariance[i][i] <= 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) {
            if (audit.covariance[j][j] <= 0.0) continue;
            audit.correlation[i][j] = audit.covariance[i][j] /
                                      std::sqrt(audit.covariance[i][i] * audit.covariance[j][j]);
        }
    }
    return audit;
}

// ---- staged covariate-disclosure sweep ----

struct StageResult {
    int stage = 0;
    int total_covariates = 0;
    std::string added;  // "; "-joined covariate names
    double mae = std::numeric_limits<double>::quiet_NaN();
    double coverage = 0.0;
    bool skipped = false;
    std::string skip_reason;
};

struct SweepConfig {
    std::filesystem::path workdir;  // one store per stage lives here
    std::string model = "gpt-4o-mini-2024-07-18";
    std::uint64_t seed = 0;
    std::vector<int> grid_indices;  // empty = full grid
    int parallelism = 1;
    bool include_zero_price = true;
    std::string run_prefix = "sweep";
};

/// Run every runnable disclosure stage over the given products and personas
/// and score each stage's demand curve against the reference. Stages whose
/// templates reference persona fields the personas lack are reported as
/// skipped, with the reason, instead of failing the whole sweep.
inline std::vector<StageResult> covariate_sweep(const std::vector<StageSpec>& stages,
                                                const std::vector<ProductEntry>& products,
                                                const std::vector<Persona>& personas,
                                                const std::vector<ProductEntry>& catalog,
                                                Backend& backend,
                                                const std::vector<ReferenceRow>& reference,
                                                const SweepConfig& config) {
    if (config.workdir.empty()) throw AnalysisError("sweep workdir must be set");
    if (products.empty()) throw AnalysisError("sweep needs at least one product");
    if (personas.empty()) throw AnalysisError("sweep needs at least one persona");
    std::filesystem::create_directories(config.workdir);

    std::vector<StageResult> out;
    out.reserve(stages.size());
    for (const auto& spec : stages) {
        StageResult result;
        result.stage = spec.stage;
        result.total_covariates = spec.total_covariates;
        for (std::size_t i = 0; i < spec.added.size(); ++i)
            result.added += (i ? "; " : "") + spec.added[i];

        const PromptStrategy& strategy = builtin_strategy(spec.strategy_id());
        try {
            const ProductEntry& probe = find_product(catalog, personas.front().product_id);
            persona_bindings(strategy, probe, probe.regular_price, personas.front());
        } catch (const RunnerError& e) {
            result.skipped = true;
            result.skip_reason = e.what();
            out.push_back(std::move(result));
            continue;
        }

        ExperimentDesign design;
        design.design_id = config.run_prefix + "_stage" + std::to_string(spec.stage);
        design.run_id = design.design_id;
        design.strategy_id = spec.strategy_id();
        for (const auto& p : products) design.product_ids.push_back(p.product_id);
        design.grid_indices = config.grid_indices;
        design.n_draws = 1;
        design.temperature = 0.0;
        design.seed = config.seed;
        design.model = config.model;

        auto store_path =
            config.workdir / ("stage" + std::to_string(spec.stage) + ".jsonl");
        RunOptions run_options;
        run_options.parallelism = config.parallelism;
        run_persona_sweep(design, catalog, personas, backend, store_path, run_options);

        DemandCurve curve = demand_curve(load_records(store_path));
        MaeResult mae = mae_vs_reference(curve, reference, config.include_zero_price);
        result.mae = mae.mae;
        result.coverage = mae.coverage;
        out.push_back(std::move(result));
    }
    return out;
}

inline const char* kStageResultsCsvHeader =
    "stage,total_covariates,added,mae,coverage,skipped,skip_reason";

inline void save_stage_results(const std::filesystem::path& path,
                               const std::vector<StageResult>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AnalysisError("cannot write stage results: " + path.string());
    out << kStageResultsCsvHeader << '\n';
    for (const auto& r : rows)
        out << csv_row({std::to_string(r.stage), std::to_string(r.total_covariates), r.added,
                        r.skipped ? "" : strprintf("%.6f", r.mae),
                        r.skipped ? "" : strprintf("%.6f", r.coverage),
                        r.skipped ? "true" : "false", r.skip_reason});
    if (!out) throw AnalysisError("stage results write failed: " + path.string());
}

}  // namespace promptlab
