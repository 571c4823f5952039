// promptlab: command-line harness for designing, executing, and auditing
// simulated demand-estimation experiments.
//
// Subcommands map 1:1 onto library operations; every artifact is a file
// (CSV/JSONL) plus a one-screen summary on stdout. Exit codes: 0 success,
// 1 operational failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "promptlab/analysis.hpp"
#include "promptlab/backends.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/dgp.hpp"
#include "promptlab/finetune.hpp"
#include "promptlab/http_backend.hpp"
#include "promptlab/mock_backend.hpp"
#include "promptlab/money.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/prompts.hpp"
#include "promptlab/runner.hpp"
#include "promptlab/store.hpp"

namespace fs = std::filesystem;
using namespace promptlab;

namespace {

/// Bad invocations that only surface after flag parsing (mutually exclusive
/// modes, unparseable composite values): reported as usage errors.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string data_default(const char* name) {
    const char* dir = std::getenv("PROMPTLAB_DATA_DIR");
    return (fs::path(dir ? dir : "data") / name).string();
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

// ---- backend selection ----

struct BackendOpts {
    std::string backend = "mock";
    std::string base_url = "https://api.openai.com";
    std::uint64_t seed = 0;
    int parallelism = 4;
    DgpConfig dgp;
};

void add_dgp_options(CLI::App* cmd, DgpConfig& dgp) {
    auto* g = cmd->add_option_group("simulator", "Structural-model overrides (mock backend)");
    g->add_option("--dgp-alpha", dgp.alpha, "Purchase intercept")->capture_default_str();
    g->add_option("--dgp-beta", dgp.beta, "Causal relative-price slope")->capture_default_str();
    g->add_option("--dgp-kappa", dgp.kappa, "Confounder loading")->capture_default_str();
    g->add_option("--dgp-gamma", dgp.gamma, "Confounder shift per unit relative price")
        ->capture_default_str();
    g->add_option("--dgp-gamma-quad", dgp.gamma_quad, "Confounder shift curvature")
        ->capture_default_str();
    g->add_option("--dgp-sigma-u", dgp.sigma_u, "Confounder dispersion")->capture_default_str();
    g->add_option("--dgp-lambda-past", dgp.lambda_past, "Past-price confounder sensitivity")
        ->capture_default_str();
    g->add_option("--dgp-lambda-competing", dgp.lambda_competing,
                  "Competing-price confounder sensitivity")
        ->capture_default_str();
    g->add_option("--dgp-lambda-expiration", dgp.lambda_expiration,
                  "Expiration-days confounder sensitivity")
        ->capture_default_str();
    g->add_option("--dgp-price-noise", dgp.price_noise_frac,
                  "Elicited-price noise as a fraction of regular price")
        ->capture_default_str();
    g->add_option("--dgp-expiration-base", dgp.expiration_base_days, "Base shelf life in days")
        ->capture_default_str();
}

void add_backend_options(CLI::App* cmd, BackendOpts& o) {
    cmd->add_option("--backend", o.backend,
                    "Answer source: seeded simulator or live chat-completions endpoint")
        ->check(CLI::IsMember({"mock", "http"}))
        ->capture_default_str();
    cmd->add_option("--base-url", o.base_url, "Chat-completions base URL (http backend)")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "Root seed for all randomness")->capture_default_str();
    cmd->add_option("--parallelism", o.parallelism, "Concurrent backend calls")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_dgp_options(cmd, o.dgp);
}

std::unique_ptr<Backend> make_backend(const BackendOpts& o,
                                      const std::vector<ProductEntry>& catalog) {
    if (o.backend == "mock") return std::make_unique<MockBackend>(catalog, o.dgp, o.seed);
    HttpBackendConfig config;
    config.base_url = o.base_url;
    config.max_in_flight = o.parallelism;
    return std::make_unique<HttpBackend>(std::move(config));
}

// ---- demand cells CSV (the `demand` artifact that `mae` scores) ----

const char* kDemandCellsCsvHeader = "product_id,relative_price,purchases,n_valid,n_failed,probability";

void save_demand_cells_csv(const fs::path& path, const DemandCurve& curve) {
    std::string out = std::string(kDemandCellsCsvHeader) + "\n";
    for (const auto& c : curve.cells)
        out += csv_row({c.product_id, strprintf("%.6f", c.relative_price),
                        std::to_string(c.purchases), std::to_string(c.n_valid),
                        std::to_string(c.n_failed),
                        c.n_valid > 0 ? strprintf("%.6f", c.probability()) : ""});
    write_text(path, out);
}

DemandCurve load_demand_cells_csv(const fs::path& path) {
    auto rows = csv_read_file(path.string());
    if (rows.empty()) throw std::runtime_error("demand CSV is empty: " + path.string());
    const std::vector<std::string> header = {"product_id", "relative_price", "purchases",
                                             "n_valid",    "n_failed",       "probability"};
    if (rows.front() != header)
        throw std::runtime_error("demand CSV has wrong header: " + path.string());
    DemandCurve curve;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = path.string() + " row " + std::to_string(i + 1);
        if (r.size() != 6) throw std::runtime_error(where + ": expected 6 fields");
        DemandCell cell;
        cell.product_id = r[0];
        if (cell.product_id.empty()) throw std::runtime_error(where + ": empty product_id");
        char* end = nullptr;
        cell.relative_price = std::strtod(r[1].c_str(), &end);
        if (end == r[1].c_str() || *end != '\0')
            throw std::runtime_error(where + ": bad relative_price '" + r[1] + "'");
        cell.rel_key = relative_key(cell.relative_price);
        cell.purchases = std::atoi(r[2].c_str());
        cell.n_valid = std::atoi(r[3].c_str());
        cell.n_failed = std::atoi(r[4].c_str());
        if (cell.purchases < 0 || cell.n_valid < 0 || cell.purchases > cell.n_valid)
            throw std::runtime_error(where + ": inconsistent purchase counts");
        curve.cells.push_back(std::move(cell));
    }
    return curve;
}

const char* kAggregateCsvHeader = "relative_price,probability,n_products";

void save_aggregate_csv(const fs::path& path, const DemandCurve& curve) {
    std::string out = std::string(kAggregateCsvHeader) + "\n";
    for (const auto& pt : curve.aggregate)
        out += csv_row({strprintf("%.6f", pt.relative_price), strprintf("%.6f", pt.probability),
                        std::to_string(pt.n_products)});
    write_text(path, out);
}

// ---- stage table (bundled staged-disclosure results) ----

struct StageTableRow {
    int stage = 0;
    int total_covariates = 0;
    std::string added;
    double mae = 0.0;
};

std::vector<StageTableRow> load_stage_table(const fs::path& path) {
    auto rows = csv_read_file(path.string());
    if (rows.empty()) throw std::runtime_error("stage table is empty: " + path.string());
    const std::vector<std::string> header = {"stage", "total_covariates", "added", "mae"};
    if (rows.front() != header)
        throw std::runtime_error("stage table has wrong header: " + path.string());
    std::vector<StageTableRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string where = path.string() + " row " + std::to_string(i + 1);
        if (r.size() != 4) throw std::runtime_error(where + ": expected 4 fields");
        StageTableRow row;
        row.stage = std::atoi(r[0].c_str());
        row.total_covariates = std::atoi(r[1].c_str());
        row.added = r[2];
        char* end = nullptr;
        row.mae = std::strtod(r[3].c_str(), &end);
        if (row.stage < 1 || row.total_covariates < 1 || end == r[3].c_str() || *end != '\0')
            throw std::runtime_error(where + ": bad stage row");
        out.push_back(std::move(row));
    }
    return out;
}

std::string format_stage_table(const std::vector<StageTableRow>& rows) {
    std::string out = strprintf("%5s  %10s  %6s  %s\n", "Stage", "Covariates", "MAE", "Added");
    for (const auto& r : rows)
        out += strprintf("%5d  %10d  %6.4f  %s\n", r.stage, r.total_covariates, r.mae,
                         r.added.c_str());
    return out;
}

// ---- shared printing ----

void print_run_summary(const RunSummary& s, const std::string& store) {
    std::cout << "cells: " << s.cells_completed << "/" << s.cells_total << " completed\n"
              << "records: " << s.records_new << " new, " << s.records_skipped
              << " already present\n"
              << "parse failures: " << s.parse_failures << ", retries: " << s.retries_total << "\n"
              << "store: " << store << "\n";
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& f : s.failed_cells) std::cerr << "failed cell: " << f << "\n";
}

std::vector<ProductEntry> pick_products(const std::vector<ProductEntry>& catalog,
                                        const std::vector<std::string>& ids) {
    std::vector<ProductEntry> out;
    for (const auto& id : ids) out.push_back(find_product(catalog, id));
    return out;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void register_catalog(CLI::App& app) {
    auto* cmd = app.add_subcommand("catalog", "Inspect and validate product catalogs");
    cmd->require_subcommand(1);
    auto path = std::make_shared<std::string>(data_default("catalog.csv"));
    auto* validate = cmd->add_subcommand("validate", "Load a catalog CSV and report its shape");
    validate->add_option("--catalog", *path, "Product catalog CSV")->capture_default_str();
    validate->callback([path] {
        auto entries = load_catalog(*path);
        std::map<std::string, int> groups;
        for (const auto& e : entries) ++groups[group_name(e.group)];
        std::cout << "catalog OK: " << entries.size() << " products\n";
        for (const auto& [g, n] : groups) std::cout << "  " << g << ": " << n << "\n";
        const auto& first = entries.front();
        std::cout << "price grid: " << kGridPoints << " points per product, e.g. "
                  << first.product_id << " "
                  << bind_currency(grid_absolute(first.regular_price, 0)) << " to "
                  << bind_currency(grid_absolute(first.regular_price, kGridPoints - 1)) << "\n";
    });
}

void register_run(CLI::App& app) {
    struct Opts {
        BackendOpts backend;
        std::string catalog = data_default("catalog.csv");
        std::string strategy;
        std::string system_strategy;
        std::vector<std::string> products;
        std::vector<int> grid;
        int draws = 50;
        double temperature = 1.0;
        std::string model = "gpt-4o-mini-2024-07-18";
        std::string design_id;
        std::string run_id;
        std::string store;
        std::string personas;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "run", "Execute a price-sweep experiment into a resumable JSONL store");
    add_backend_options(cmd, o->backend);
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--strategy", o->strategy, "Prompt strategy id")->required();
    cmd->add_option("--system-strategy", o->system_strategy,
                    "Strategy donating its system prompt (e.g. unblinded_system)");
    cmd->add_option("--products", o->products, "Product ids (default: whole catalog)")
        ->delimiter(',');
    cmd->add_option("--grid", o->grid, "Price-grid indices 0..10 (default: all)")->delimiter(',');
    cmd->add_option("--draws", o->draws, "Draws per cell")->capture_default_str();
    cmd->add_option("--temperature", o->temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--model", o->model, "Model id recorded and sent")->capture_default_str();
    cmd->add_option("--design-id", o->design_id, "Design id (default: <strategy>_s<seed>)");
    cmd->add_option("--run-id", o->run_id, "Run id (default: design id)");
    cmd->add_option("--store", o->store, "Output JSONL store")->required();
    cmd->add_option("--personas", o->personas,
                    "Persona JSONL: sweep (product, price, persona) cells instead");
    cmd->callback([o, cmd] {
        auto entries = load_catalog(o->catalog);
        auto backend = make_backend(o->backend, entries);

        ExperimentDesign design;
        design.strategy_id = o->strategy;
        if (!o->system_strategy.empty()) design.system_strategy_id = o->system_strategy;
        design.product_ids = o->products;
        design.grid_indices = o->grid;
        design.n_draws = o->draws;
        // Persona sweeps ask each persona once unless --draws says otherwise.
        if (!o->personas.empty() && cmd->count("--draws") == 0) design.n_draws = 1;
        design.temperature = o->temperature;
        design.seed = o->backend.seed;
        design.model = o->model;
        design.design_id = o->design_id.empty()
                               ? o->strategy + "_s" + std::to_string(o->backend.seed)
                               : o->design_id;
        design.run_id = o->run_id.empty() ? design.design_id : o->run_id;

        RunOptions options;
        options.parallelism = o->backend.parallelism;
        RunSummary summary;
        if (o->personas.empty()) {
            summary = run_experiment(design, entries, *backend, o->store, options);
        } else {
            auto personas = load_personas(o->personas);
            summary = run_persona_sweep(design, entries, personas, *backend, o->store, options);
        }
        std::cout << "run " << design.run_id << " (strategy " << design.strategy_id << ")\n";
        print_run_summary(summary, o->store);
        if (!summary.ok())
            throw std::runtime_error(std::to_string(summary.failed_cells.size()) +
                                     " cell(s) failed; rerun with the same store to resume");
    });
}

void register_personas(CLI::App& app) {
    struct Opts {
        BackendOpts backend;
        std::string catalog = data_default("catalog.csv");
        std::string product;
        int count = 500;
        std::string model = "gpt-4o-mini-2024-07-18";
        double temperature = 1.0;
        int max_rounds = 5;
        bool augment = true;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand("personas",
                                   "Generate consumer personas for a product into JSONL");
    add_backend_options(cmd, o->backend);
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--product", o->product, "Product id the personas shop for")->required();
    cmd->add_option("--count", o->count, "Personas to generate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--model", o->model, "Model id for generation")->capture_default_str();
    cmd->add_option("--temperature", o->temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--max-rounds", o->max_rounds, "Redraw rounds for unparseable personas")
        ->capture_default_str();
    cmd->add_flag("--augment,!--no-augment", o->augment,
                  "Attach seeded psychometric scores (on by default)");
    cmd->add_option("--out", o->out, "Output persona JSONL")->required();
    cmd->callback([o] {
        auto entries = load_catalog(o->catalog);
        const ProductEntry& entry = find_product(entries, o->product);
        auto backend = make_backend(o->backend, entries);
        PersonaGenOptions gen;
        gen.model = o->model;
        gen.temperature = o->temperature;
        gen.max_rounds = o->max_rounds;
        auto personas = generate_personas(entry, o->count, *backend, gen);
        if (o->augment) augment_scores(personas, o->backend.seed);
        save_personas(o->out, personas);
        std::cout << "generated " << personas.size() << " personas for '" << o->product << "' ("
                  << (o->augment ? "augmented with scores" : "raw") << ")\n"
                  << "personas: " << o->out << "\n";
    });
}

void register_demand(CLI::App& app) {
    struct Opts {
        std::string store;
        std::string out;
        std::string aggregate;
        bool oracle = false;
        std::string mode = "interventional";
        std::string catalog = data_default("catalog.csv");
        std::vector<std::string> products;
        std::uint64_t seed = 0;
        int oracle_obs = 50;
        int oracle_draws = 100000;
        DgpConfig dgp;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "demand", "Estimate a demand curve from a store, or emit the simulator's reference curve");
    cmd->add_option("--store", o->store, "JSONL store to estimate from");
    cmd->add_option("--out", o->out, "Per-cell demand CSV (estimate) or reference CSV (oracle)");
    cmd->add_option("--aggregate", o->aggregate, "Across-product demand CSV (estimate mode)");
    cmd->add_flag("--oracle", o->oracle,
                  "Emit the structural model's exact demand as a reference CSV");
    cmd->add_option("--mode", o->mode, "Oracle law: randomized prices or self-selected prices")
        ->check(CLI::IsMember({"interventional", "observational"}))
        ->capture_default_str();
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--products", o->products, "Product ids (default: whole catalog)")
        ->delimiter(',');
    cmd->add_option("--seed", o->seed, "Oracle seed")->capture_default_str();
    cmd->add_option("--oracle-obs", o->oracle_obs, "n_obs recorded per reference row")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--oracle-draws", o->oracle_draws, "Simulation draws per grid point")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_dgp_options(cmd, o->dgp);
    cmd->callback([o] {
        if (o->oracle && !o->store.empty())
            throw UsageError("--oracle and --store are mutually exclusive");
        if (!o->oracle && o->store.empty())
            throw UsageError("demand needs exactly one of --store or --oracle");
        if (o->oracle) {
            auto entries = load_catalog(o->catalog);
            auto products = o->products.empty() ? entries : pick_products(entries, o->products);
            QueryMode mode = o->mode == "interventional" ? QueryMode::interventional
                                                         : QueryMode::observational;
            auto rows =
                oracle_reference(products, o->dgp, mode, o->seed, o->oracle_obs, o->oracle_draws);
            if (o->out.empty()) throw UsageError("--oracle requires --out");
            save_reference_csv(o->out, rows);
            std::cout << "wrote " << rows.size() << " reference rows (" << o->mode << ") to "
                      << o->out << "\n";
            return;
        }
        DemandCurve curve = demand_curve(load_records(o->store));
        std::cout << "strategy " << curve.strategy_id << ": " << curve.cells.size()
                  << " cells\n";
        std::cout << strprintf("%9s  %11s  %s\n", "rel.price", "probability", "products");
        for (const auto& pt : curve.aggregate)
            std::cout << strprintf("%+9.1f  %11.4f  %8d\n", pt.relative_price, pt.probability,
                                   pt.n_products);
        for (const auto& c : curve.empty_cells) std::cerr << "empty cell: " << c << "\n";
        if (!o->out.empty()) {
            save_demand_cells_csv(o->out, curve);
            std::cout << "cells: " << o->out << "\n";
        }
        if (!o->aggregate.empty()) {
            save_aggregate_csv(o->aggregate, curve);
            std::cout << "aggregate: " << o->aggregate << "\n";
        }
    });
}

void register_mae(CLI::App& app) {
    struct Opts {
        std::string pred;
        std::string ref;
        std::string out;
        bool include_zero = true;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "mae", "Score a per-cell demand CSV against a reference demand CSV");
    cmd->add_option("--pred", o->pred, "Estimated demand cells CSV (from `demand`)")->required();
    cmd->add_option("--ref", o->ref, "Reference demand CSV")->required();
    cmd->add_flag("--include-zero-price,!--exclude-zero-price", o->include_zero,
                  "Score the free-product point (on by default)");
    cmd->add_option("--out", o->out, "One-row result CSV");
    cmd->callback([o] {
        DemandCurve curve = load_demand_cells_csv(o->pred);
        auto reference = load_reference_csv(o->ref);
        MaeResult r = mae_vs_reference(curve, reference, o->include_zero);
        std::cout << strprintf("MAE: %.6f over %zu cells (coverage %.3f)\n", r.mae, r.cells_used,
                               r.coverage);
        if (!o->out.empty())
            write_text(o->out, "mae,cells_used,coverage\n" +
                                   csv_row({strprintf("%.6f", r.mae),
                                            std::to_string(r.cells_used),
                                            strprintf("%.6f", r.coverage)}));
    });
}

void register_improvement(CLI::App& app) {
    struct Opts {
        double blinded = 0.0;
        double unblinded = 0.0;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "improvement", "Percent MAE reduction from a blinded to an unblinded estimate");
    cmd->add_option("--blinded", o->blinded, "Blinded MAE")->required();
    cmd->add_option("--unblinded", o->unblinded, "Unblinded MAE")->required();
    cmd->add_option("--out", o->out, "One-row result CSV");
    cmd->callback([o] {
        double pct = improvement_pct(o->blinded, o->unblinded);
        std::cout << strprintf("improvement: %.1f%% (blinded %.6f -> unblinded %.6f)\n", pct,
                               o->blinded, o->unblinded);
        if (!o->out.empty())
            write_text(o->out, "mae_blinded,mae_unblinded,improvement_pct\n" +
                                   csv_row({strprintf("%.6f", o->blinded),
                                            strprintf("%.6f", o->unblinded),
                                            strprintf("%.6f", pct)}));
    });
}

void register_audit(CLI::App& app) {
    struct Opts {
        std::string store;
        std::string catalog = data_default("catalog.csv");
        std::string schema;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "audit", "Covariance audit: do elicited record fields track the offered price?");
    cmd->add_option("--store", o->store, "JSONL store of parsed records")->required();
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--schema", o->schema,
                    "Answer schema id (default: derived from the store's strategy)");
    cmd->add_option("--out", o->out, "Correlation matrix CSV");
    cmd->callback([o] {
        auto records = load_records(o->store);
        if (records.empty()) throw std::runtime_error("store is empty: " + o->store);
        std::string schema_id =
            o->schema.empty() ? builtin_strategy(records.front().strategy_id).answer_schema
                              : o->schema;
        auto entries = load_catalog(o->catalog);
        CovariateAudit audit = covariate_audit(records, schema_for(schema_id), entries);

        std::cout << "audited " << audit.rows << " records, " << audit.variables.size()
                  << " numeric variables";
        if (!audit.excluded.empty()) {
            std::cout << " (excluded:";
            for (const auto& e : audit.excluded) std::cout << " " << e;
            std::cout << ")";
        }
        std::cout << "\n";
        for (std::size_t j = 1; j < audit.variables.size(); ++j) {
            double c = audit.correlation[0][j];
            std::cout << "corr(relative_price, " << audit.variables[j] << ") = "
                      << (std::isnan(c) ? std::string("n/a") : strprintf("%+.3f", c)) << "\n";
        }
        if (!o->out.empty()) {
            std::string csv = "variable,mean";
            for (const auto& v : audit.variables) csv += "," + v;
            csv += "\n";
            for (std::size_t i = 0; i < audit.variables.size(); ++i) {
                std::vector<std::string> row = {audit.variables[i],
                                                strprintf("%.6f", audit.means[i])};
                for (std::size_t j = 0; j < audit.variables.size(); ++j)
                    row.push_back(std::isnan(audit.correlation[i][j])
                                      ? ""
                                      : strprintf("%.6f", audit.correlation[i][j]));
                csv += csv_row(row);
            }
            write_text(o->out, csv);
            std::cout << "matrix: " << o->out << "\n";
        }
    });
}

void register_sweep(CLI::App& app) {
    struct Opts {
        BackendOpts backend;
        std::string catalog = data_default("catalog.csv");
        std::string personas;
        std::string reference;
        std::string workdir;
        std::string out;
        std::vector<std::string> products;
        std::vector<int> grid;
        std::string model = "gpt-4o-mini-2024-07-18";
        bool include_zero = true;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "sweep", "Staged covariate-disclosure sweep: re-estimate demand as personas reveal more");
    add_backend_options(cmd, o->backend);
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--personas", o->personas, "Persona JSONL (augmented for stages 2+)")
        ->required();
    cmd->add_option("--reference", o->reference, "Reference demand CSV to score against")
        ->required();
    cmd->add_option("--workdir", o->workdir, "Directory for per-stage stores")->required();
    cmd->add_option("--out", o->out, "Stage results CSV");
    cmd->add_option("--products", o->products,
                    "Product ids (default: the personas' products)")
        ->delimiter(',');
    cmd->add_option("--grid", o->grid, "Price-grid indices (default: all)")->delimiter(',');
    cmd->add_option("--model", o->model, "Model id recorded and sent")->capture_default_str();
    cmd->add_flag("--include-zero-price,!--exclude-zero-price", o->include_zero,
                  "Score the free-product point (on by default)");
    cmd->callback([o] {
        auto entries = load_catalog(o->catalog);
        auto personas = load_personas(o->personas);
        auto reference = load_reference_csv(o->reference);
        std::vector<ProductEntry> products;
        if (o->products.empty()) {
            std::set<std::string> seen;
            for (const auto& p : personas)
                if (seen.insert(p.product_id).second)
                    products.push_back(find_product(entries, p.product_id));
        } else {
            products = pick_products(entries, o->products);
        }
        auto backend = make_backend(o->backend, entries);

        SweepConfig config;
        config.workdir = o->workdir;
        config.model = o->model;
        config.seed = o->backend.seed;
        config.grid_indices = o->grid;
        config.parallelism = o->backend.parallelism;
        config.include_zero_price = o->include_zero;
        auto results = covariate_sweep(default_stage_specs(), products, personas, entries,
                                       *backend, reference, config);
        for (const auto& r : results) {
            if (r.skipped)
                std::cout << strprintf("stage %2d (%2d covariates): skipped - %s\n", r.stage,
                                       r.total_covariates, r.skip_reason.c_str());
            else
                std::cout << strprintf("stage %2d (%2d covariates): mae %.4f coverage %.2f\n",
                                       r.stage, r.total_covariates, r.mae, r.coverage);
        }
        if (!o->out.empty()) {
            save_stage_results(o->out, results);
            std::cout << "stages: " << o->out << "\n";
        }
    });
}

void register_ambiguity(CLI::App& app) {
    struct Opts {
        std::string catalog = data_default("catalog.csv");
        std::string strategy;
        std::string product = "soda_carb";
        std::string price;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "ambiguity",
        "Check whether a strategy collapses distinct questions into identical prompts");
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--strategy", o->strategy, "Prompt strategy id")->required();
    cmd->add_option("--product", o->product, "Product id for the probe questions")
        ->capture_default_str();
    cmd->add_option("--price", o->price, "Focal price, e.g. 8.26 (default: regular price)");
    cmd->add_option("--out", o->out, "Collision CSV");
    cmd->callback([o] {
        auto entries = load_catalog(o->catalog);
        const ProductEntry& entry = find_product(entries, o->product);
        Money price = o->price.empty() ? entry.regular_price : parse_money(o->price);
        auto [qa, qb] = default_question_pair(o->product, price);
        AmbiguityReport report =
            check_ambiguity(builtin_strategy(o->strategy), {qa, qb}, entries);
        std::cout << "strategy '" << report.strategy_id << "': " << report.collisions.size()
                  << " collision(s) across " << report.questions_total << " questions ("
                  << report.questions_unrenderable << " unrenderable)\n";
        for (const auto& c : report.collisions)
            std::cout << "  " << c.question_a_desc << "\n  " << c.question_b_desc
                      << "\n    same prompt bytes, but the questions differ by " << c.differing
                      << "\n";
        if (!o->out.empty()) {
            std::string csv = "strategy_id,question_a,question_b,differing\n";
            for (const auto& c : report.collisions)
                csv += csv_row({report.strategy_id, c.question_a_desc, c.question_b_desc,
                                c.differing});
            write_text(o->out, csv);
            std::cout << "collisions: " << o->out << "\n";
        }
    });
}

void register_folds(CLI::App& app) {
    struct Opts {
        std::string catalog = data_default("catalog.csv");
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "folds", "Leave-one-group-out folds over the catalog's product groups");
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--out", o->out, "Fold membership CSV");
    cmd->callback([o] {
        auto entries = load_catalog(o->catalog);
        auto folds = make_folds(entries);
        for (const auto& f : folds)
            std::cout << f.name << ": " << f.train_products.size() << " train, "
                      << f.validation_products.size() << " validation\n";
        if (!o->out.empty()) {
            std::string csv = "fold,role,product_id\n";
            for (const auto& f : folds) {
                for (const auto& id : f.train_products) csv += csv_row({f.name, "train", id});
                for (const auto& id : f.validation_products)
                    csv += csv_row({f.name, "validation", id});
            }
            write_text(o->out, csv);
            std::cout << "folds: " << o->out << "\n";
        }
    });
}

void register_emit_finetune(CLI::App& app) {
    struct Opts {
        std::string catalog = data_default("catalog.csv");
        std::string reference;
        std::string strategy;
        std::string fold;
        std::string out;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "emit-finetune", "Compile a chat fine-tuning JSONL from reference demand");
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--reference", o->reference, "Reference demand CSV")->required();
    cmd->add_option("--strategy", o->strategy, "Prompt strategy phrasing the examples")
        ->required();
    cmd->add_option("--fold", o->fold, "Fold name, e.g. holdout_beverages")->required();
    cmd->add_option("--out", o->out, "Output dataset JSONL")->required();
    cmd->add_option("--seed", o->seed, "Label-draw seed")->capture_default_str();
    cmd->callback([o] {
        auto entries = load_catalog(o->catalog);
        auto reference = load_reference_csv(o->reference);
        auto folds = make_folds(entries);
        const Fold& fold = fold_by_name(folds, o->fold);
        EmitStats stats = emit_dataset(reference, builtin_strategy(o->strategy), fold, entries,
                                       o->out, o->seed);
        std::cout << "wrote " << stats.lines << " training examples to " << o->out << " ("
                  << stats.excluded_rows << " holdout rows excluded)\n";
    });
}

void register_mix(CLI::App& app) {
    struct Opts {
        std::string dataset;
        std::string source;
        std::size_t count = 0;
        std::string out;
        std::uint64_t seed = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "mix", "Blend purchase-log examples into a fine-tuning dataset");
    cmd->add_option("--dataset", o->dataset, "Base dataset JSONL")->required();
    cmd->add_option("--source", o->source, "Observational purchase-log CSV")->required();
    cmd->add_option("--count", o->count, "Log examples to add")->required();
    cmd->add_option("--out", o->out, "Output dataset JSONL")->required();
    cmd->add_option("--seed", o->seed, "Sampling/interleave seed")->capture_default_str();
    cmd->callback([o] {
        MixStats stats = mix_observational(o->dataset, o->source, o->count, o->out, o->seed);
        std::cout << "mixed " << stats.added_lines << " purchase-log examples into "
                  << stats.base_lines << " survey examples -> " << stats.total_lines
                  << " lines at " << o->out << "\n";
    });
}

void register_eval_matrix(CLI::App& app) {
    struct Opts {
        BackendOpts backend;
        std::string catalog = data_default("catalog.csv");
        std::vector<std::string> models;
        std::string fold;
        std::string reference;
        std::string workdir;
        std::string out;
        int draws = 50;
        double temperature = 1.0;
        std::vector<int> grid;
        bool include_zero = true;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "eval-matrix",
        "Score models on a fold's holdout products under blinded and unblinded evaluation");
    add_backend_options(cmd, o->backend);
    cmd->add_option("--catalog", o->catalog, "Product catalog CSV")->capture_default_str();
    cmd->add_option("--model", o->models, "Label=model_id (repeatable)")->required();
    cmd->add_option("--fold", o->fold, "Fold whose validation products are scored")->required();
    cmd->add_option("--reference", o->reference, "Reference demand CSV")->required();
    cmd->add_option("--workdir", o->workdir, "Directory for per-run stores")->required();
    cmd->add_option("--out", o->out, "Eval matrix CSV");
    cmd->add_option("--draws", o->draws, "Draws per cell")->capture_default_str();
    cmd->add_option("--temperature", o->temperature, "Sampling temperature")
        ->capture_default_str();
    cmd->add_option("--grid", o->grid, "Price-grid indices (default: all)")->delimiter(',');
    cmd->add_flag("--include-zero-price,!--exclude-zero-price", o->include_zero,
                  "Score the free-product point (on by default)");
    cmd->callback([o] {
        std::vector<std::pair<std::string, std::string>> models;
        for (const auto& spec : o->models) {
            auto eq = spec.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
                throw UsageError("--model expects Label=model_id, got '" + spec + "'");
            models.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
        }
        auto entries = load_catalog(o->catalog);
        auto folds = make_folds(entries);
        const Fold& fold = fold_by_name(folds, o->fold);
        auto reference = load_reference_csv(o->reference);
        auto backend = make_backend(o->backend, entries);

        EvalMatrixConfig config;
        config.workdir = o->workdir;
        config.n_draws = o->draws;
        config.temperature = o->temperature;
        config.seed = o->backend.seed;
        config.grid_indices = o->grid;
        config.parallelism = o->backend.parallelism;
        config.include_zero_price = o->include_zero;
        EvalMatrixReport report =
            eval_matrix(models, fold, entries, *backend, reference, config);
        std::cout << format_eval_table(report);
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
        if (!o->out.empty()) {
            write_text(o->out, eval_matrix_to_csv(report));
            std::cout << "matrix: " << o->out << "\n";
        }
    });
}

void register_report(CLI::App& app) {
    struct Opts {
        bool strategies = false;
        bool table2 = false;
        bool table3 = false;
        bool stages = false;
        std::string file;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = app.add_subcommand(
        "report", "Render bundled or generated result tables and the strategy catalog");
    cmd->add_flag("--strategies", o->strategies, "Strategy catalog as JSONL");
    cmd->add_flag("--table2", o->table2, "Bundled out-of-box vs fine-tuned eval table");
    cmd->add_flag("--table3", o->table3, "Bundled purchase-log-mix eval table");
    cmd->add_flag("--stages", o->stages, "Bundled staged covariate-disclosure table");
    cmd->add_option("--file", o->file, "Read this CSV instead of the bundled one");
    cmd->add_option("--out", o->out, "Also write the rendering here");
    cmd->callback([o] {
        const int picked = int(o->strategies) + int(o->table2) + int(o->table3) + int(o->stages);
        if (picked != 1)
            throw UsageError(
                "report needs exactly one of --strategies, --table2, --table3, --stages");
        std::string text;
        if (o->strategies) {
            text = strategy_catalog_jsonl();
        } else if (o->table2 || o->table3) {
            std::string path = !o->file.empty()
                                   ? o->file
                                   : data_default(o->table2 ? "paper_table2.csv"
                                                            : "paper_table3.csv");
            text = format_eval_table(eval_matrix_from_csv(path));
        } else {
            std::string path = !o->file.empty() ? o->file : data_default("stage_table.csv");
            text = format_stage_table(load_stage_table(path));
        }
        std::cout << text;
        if (!o->out.empty()) write_text(o->out, text);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"promptlab: design, execute, and audit simulated demand-estimation experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value config file; flags override file values");
    app.set_version_flag("--version", "promptlab 1.0.0");

    auto allow_parent_flags = [](CLI::App* cmd) {
        cmd->fallthrough();  // lets `promptlab <sub> --config file` reach the app-level option
    };

    register_catalog(app);
    register_run(app);
    register_personas(app);
    register_audit(app);
    register_demand(app);
    register_mae(app);
    register_improvement(app);
    register_sweep(app);
    register_ambiguity(app);
    register_folds(app);
    register_emit_finetune(app);
    register_mix(app);
    register_eval_matrix(app);
    register_report(app);
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        allow_parent_flags(sub);
        for (auto* nested : sub->get_subcommands([](const CLI::App*) { return true; }))
            allow_parent_flags(nested);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version print and exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
