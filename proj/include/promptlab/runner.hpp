#pragma once

// Experiment execution: price-sweep designs, resumable runs against a
// backend, persona generation/augmentation, and persona-conditioned sweeps.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "promptlab/backends.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/prompts.hpp"
#include "promptlab/rng.hpp"
#include "promptlab/store.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

class RunnerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string utc_timestamp_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
#if defined(_WIN32)
    gmtime_s(&tm, &t);
#else
    gmtime_r(&t, &tm);
#endif
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Fixed timestamp used for deterministic backends so stores are byte-stable.
inline const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

// ---- designs ----

struct ExperimentDesign {
    std::string design_id;
    std::string run_id;
    std::string strategy_id;
    /// When set, the named strategy donates its system prompt (and, if it
    /// states one, its causal interpretation) while `strategy_id` keeps the
    /// user template. Records are filed under `strategy_id`.
    std::optional<std::string> system_strategy_id;
    std::vector<std::string> product_ids;  // empty = every catalog product
    std::vector<int> grid_indices;         // empty = all grid points
    int n_draws = 50;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::string model = "gpt-4o-mini-2024-07-18";

    std::vector<int> resolved_grid() const {
        if (!grid_indices.empty()) return grid_indices;
        std::vector<int> all(kGridPoints);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }

    std::uint64_t hash() const {
        std::string blob = design_id + '\x1f' + run_id + '\x1f' + strategy_id + '\x1f' +
                           system_strategy_id.value_or("") + '\x1f';
        for (const auto& p : product_ids) blob += p + ',';
        blob += '\x1f';
        for (int k : grid_indices) blob += std::to_string(k) + ',';
        blob += '\x1f' + std::to_string(n_draws) + '\x1f' + strprintf("%.17g", temperature) +
                '\x1f' + std::to_string(seed) + '\x1f' + model;
        return fnv1a64(blob);
    }

    ordered_json to_json() const {
        ordered_json j;
        j["design_id"] = design_id;
        j["run_id"] = run_id;
        j["strategy_id"] = strategy_id;
        if (system_strategy_id) j["system_strategy_id"] = *system_strategy_id;
        j["product_ids"] = product_ids;
        j["grid_indices"] = grid_indices;
        j["n_draws"] = n_draws;
        j["temperature"] = temperature;
        j["seed"] = seed;
        j["model"] = model;
        return j;
    }

    static ExperimentDesign from_json(const ordered_json& j) {
        if (!j.is_object()) throw RunnerError("design is not a JSON object");
        ExperimentDesign d;
        try {
            d.design_id = j.at("design_id").get<std::string>();
            d.run_id = j.at("run_id").get<std::string>();
            d.strategy_id = j.at("strategy_id").get<std::string>();
            if (j.contains("system_strategy_id"))
                d.system_strategy_id = j.at("system_strategy_id").get<std::string>();
            if (j.contains("product_ids"))
                d.product_ids = j.at("product_ids").get<std::vector<std::string>>();
            if (j.contains("grid_indices"))
                d.grid_indices = j.at("grid_indices").get<std::vector<int>>();
            if (j.contains("n_draws")) d.n_draws = j.at("n_draws").get<int>();
            if (j.contains("temperature")) d.temperature = j.at("temperature").get<double>();
            if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("model")) d.model = j.at("model").get<std::string>();
        } catch (const std::exception& e) {
            throw RunnerError(std::string("design is missing or mistypes a field: ") + e.what());
        }
        return d;
    }
};

/// The strategy a design actually executes: the base strategy, optionally
/// with the system prompt (and stated interpretation) of a companion strategy.
inline PromptStrategy resolve_strategy(const ExperimentDesign& design) {
    PromptStrategy s = builtin_strategy(design.strategy_id);
    if (design.system_strategy_id) {
        const PromptStrategy& sys = builtin_strategy(*design.system_strategy_id);
        s.system_template = sys.system_template;
        s.blinding = sys.blinding;
        if (sys.encodes) s.encodes = sys.encodes;
    }
    return s;
}

inline void validate_design(const ExperimentDesign& d, const std::vector<ProductEntry>& catalog) {
    if (d.design_id.empty()) throw RunnerError("design_id must not be empty");
    if (d.run_id.empty()) throw RunnerError("run_id must not be empty");
    if (d.n_draws < 1) throw RunnerError("n_draws must be at least 1");
    if (!(d.temperature >= 0.0 && d.temperature <= 2.0))
        throw RunnerError("temperature must be in [0, 2]");
    if (d.model.empty()) throw RunnerError("model must not be empty");
    std::set<int> grid_seen;
    for (int k : d.grid_indices) {
        if (k < 0 || k >= kGridPoints)
            throw RunnerError("grid index " + std::to_string(k) + " out of range [0, " +
                              std::to_string(kGridPoints - 1) + "]");
        if (!grid_seen.insert(k).second)
            throw RunnerError("duplicate grid index " + std::to_string(k));
    }
    std::set<std::string> product_seen;
    for (const auto& id : d.product_ids) {
        find_product(catalog, id);  // raises CatalogError when unknown
        if (!product_seen.insert(id).second)
            throw RunnerError("duplicate product id '" + id + "'");
    }
    resolve_strategy(d);  // raises PromptError when a strategy id is unknown
}

inline std::vector<ProductEntry> resolve_products(const ExperimentDesign& d,
                                                  const std::vector<ProductEntry>& catalog) {
    if (d.product_ids.empty()) return catalog;
    std::vector<ProductEntry> out;
    out.reserve(d.product_ids.size());
    for (const auto& id : d.product_ids) out.push_back(find_product(catalog, id));
    return out;
}

// ---- run bookkeeping ----

struct RunOptions {
    int parallelism = 1;
    /// Timestamp source. Unset means: fixed epoch for deterministic backends
    /// (byte-stable stores), real UTC for live ones.
    std::function<std::string()> timestamp;
};

struct RunSummary {
    std::size_t cells_total = 0;
    std::size_t cells_completed = 0;
    std::size_t records_new = 0;
    std::size_t records_skipped = 0;  // draws already present in the store
    std::size_t parse_failures = 0;
    std::size_t retries_total = 0;
    std::vector<std::string> failed_cells;
    std::vector<std::string> warnings;

    bool ok() const { return failed_cells.empty(); }
};

namespace detail {

inline std::function<std::string()> timestamp_source(const Backend& backend,
                                                     const RunOptions& options) {
    if (options.timestamp) return options.timestamp;
    if (backend.deterministic())
        return [] { return std::string(kEpochTimestamp); };
    return [] { return utc_timestamp_now(); };
}

inline std::size_t meta_retries(const CompletionResponse& resp) {
    auto it = resp.meta.find("retries");
    if (it == resp.meta.end()) return 0;
    return std::strtoull(it->second.c_str(), nullptr, 10);
}

/// One (product, price[, persona]) cell with its outstanding work.
struct PlannedCell {
    std::string label;
    std::string product_id;
    double relative_price = 0.0;
    Money absolute_price{};
    std::string persona_id;
    std::vector<CompletionRequest> requests;  // one per missing contiguous draw run
    std::vector<std::pair<int, int>> runs;    // (first draw index, count), aligned
    int skipped = 0;                          // draws already in the store
};

struct CellOutcome {
    std::vector<std::pair<int, std::string>> texts;  // (draw index, raw text)
    std::string error;
    std::size_t retries = 0;
};

/// Contiguous runs of draw indices in [0, n_draws) missing from the store.
inline std::vector<std::pair<int, int>> missing_runs(const ResultStore& store, DrawKey key,
                                                     int n_draws, int* present) {
    std::vector<std::pair<int, int>> runs;
    *present = 0;
    for (int d = 0; d < n_draws; ++d) {
        key.draw_index = d;
        if (store.contains(key)) {
            ++*present;
            continue;
        }
        if (!runs.empty() && runs.back().first + runs.back().second == d)
            ++runs.back().second;
        else
            runs.emplace_back(d, 1);
    }
    return runs;
}

/// Execute cells with a bounded look-ahead window; `handle` always sees
/// completed cells in their planned order, so store appends stay deterministic
/// no matter how requests interleave in flight.
inline void execute_cells(const std::vector<PlannedCell>& cells, Backend& backend, int parallelism,
                          const std::function<void(const PlannedCell&, CellOutcome&&)>& handle) {
    auto run_one = [&backend](const PlannedCell& cell) {
        CellOutcome out;
        for (std::size_t r = 0; r < cell.requests.size(); ++r) {
            try {
                CompletionResponse resp = backend.complete(cell.requests[r]);
                out.retries += meta_retries(resp);
                if (static_cast<int>(resp.texts.size()) != cell.requests[r].n_draws) {
                    out.error = "backend returned " + std::to_string(resp.texts.size()) +
                                " texts for a request of " +
                                std::to_string(cell.requests[r].n_draws);
                    return out;
                }
                for (int i = 0; i < cell.requests[r].n_draws; ++i)
                    out.texts.emplace_back(cell.runs[r].first + i, std::move(resp.texts[i]));
            } catch (const BackendError& e) {
                out.error = e.what();
                return out;
            }
        }
        return out;
    };

    if (parallelism <= 1) {
        for (const auto& cell : cells) {
            CellOutcome oc = cell.requests.empty() ? CellOutcome{} : run_one(cell);
            handle(cell, std::move(oc));
        }
        return;
    }

    std::deque<std::optional<std::future<CellOutcome>>> window;
    std::size_t next = 0;
    for (std::size_t consume = 0; consume < cells.size(); ++consume) {
        for (; next < cells.size() && next < consume + static_cast<std::size_t>(parallelism);
             ++next) {
            if (cells[next].requests.empty())
                window.emplace_back(std::nullopt);
            else
                window.emplace_back(
                    std::async(std::launch::async, run_one, std::cref(cells[next])));
        }
        auto fut = std::move(window.front());
        window.pop_front();
        CellOutcome oc = fut ? fut->get() : CellOutcome{};
        handle(cells[consume], std::move(oc));
    }
}

/// Parse a finished cell's draws into records and append them in draw order.
inline void absorb_cell(const ExperimentDesign& design, const ParseSchema& schema,
                        const std::function<std::string()>& ts, ResultStore& store,
                        RunSummary& summary, const PlannedCell& cell, CellOutcome&& oc) {
    summary.records_skipped += static_cast<std::size_t>(cell.skipped);
    summary.retries_total += oc.retries;
    if (!oc.error.empty()) {
        summary.failed_cells.push_back(cell.label + ": " + oc.error);
        return;
    }
    for (auto& [draw_index, text] : oc.texts) {
        DrawRecord rec;
        rec.run_id = design.run_id;
        rec.design_id = design.design_id;
        rec.strategy_id = design.strategy_id;
        rec.product_id = cell.product_id;
        rec.relative_price = cell.relative_price;
        rec.absolute_price = cell.absolute_price;
        rec.draw_index = draw_index;
        rec.persona_id = cell.persona_id;
        rec.model = design.model;
        rec.temperature = design.temperature;
        rec.raw_text = std::move(text);
        auto parsed = parse_response(rec.raw_text, schema);
        if (parsed.ok()) {
            rec.parsed = parsed.value->to_json(schema);
        } else {
            rec.parsed = nullptr;
            rec.parse_error = parsed.error;
            ++summary.parse_failures;
        }
        rec.timestamp = ts();
        store.append(rec);
        ++summary.records_new;
    }
    ++summary.cells_completed;
}

inline std::string cell_label(const std::string& product_id, double rel,
                              const std::string& persona_id) {
    std::string s = product_id + "@" + strprintf("%+.1f", rel);
    if (!persona_id.empty()) s += "/" + persona_id;
    return s;
}

}  // namespace detail

inline StoreManifest manifest_for(const ExperimentDesign& design, const PromptStrategy& strategy,
                                  const std::vector<ProductEntry>& catalog,
                                  const Backend& backend) {
    StoreManifest m;
    m.run_id = design.run_id;
    m.design_id = design.design_id;
    m.design_hash = hash_hex(design.hash());
    m.strategy_hash = hash_hex(strategy.hash());
    m.catalog_hash = hash_hex(catalog_hash(catalog));
    m.model = design.model;
    m.backend = backend.name();
    m.seed = design.seed;
    return m;
}

// ---- price-sweep runs ----

/// Run (or resume) a design: every (product, grid price) cell times n_draws.
/// Completed draws found in the store are never re-requested, and missing
/// draws are requested with their original draw offsets, so a deterministic
/// backend yields byte-identical stores whether or not the run was
/// interrupted. Cells whose backend calls fail are reported in the summary
/// and the run continues.
inline RunSummary run_experiment(const ExperimentDesign& design,
                                 const std::vector<ProductEntry>& catalog, Backend& backend,
                                 const std::filesystem::path& store_path,
                                 const RunOptions& options = {}) {
    validate_design(design, catalog);
    PromptStrategy strategy = resolve_strategy(design);
    const ParseSchema& schema = schema_for(strategy.answer_schema);

    static const std::set<std::string> kStandard = {"category", "product", "price", "min_price",
                                                    "max_price"};
    for (const auto& name : strategy.placeholder_set())
        if (!kStandard.count(name))
            throw RunnerError("strategy '" + design.strategy_id + "' requires placeholder '" +
                              name + "', which a price sweep cannot supply; run a persona sweep");

    ensure_manifest(store_path, manifest_for(design, strategy, catalog, backend));
    ResultStore store(store_path);
    auto stats = store.open();

    RunSummary summary;
    if (!stats.warning.empty()) summary.warnings.push_back(stats.warning);

    auto ts = detail::timestamp_source(backend, options);
    auto products = resolve_products(design, catalog);
    auto grid = design.resolved_grid();

    std::vector<detail::PlannedCell> cells;
    cells.reserve(products.size() * grid.size());
    for (const auto& entry : products) {
        Bindings bindings;
        auto required = strategy.placeholder_set();
        auto maybe = [&](const std::string& key, const std::string& value) {
            if (required.count(key)) bindings[key] = value;
        };
        for (int k : grid) {
            double rel = grid_relative(k);
            Money price = grid_absolute(entry.regular_price, k);
            bindings.clear();
            maybe("category", entry.category);
            maybe("product", entry.product);
            maybe("price", bind_currency(price));
            maybe("min_price", bind_currency(grid_absolute(entry.regular_price, 0)));
            maybe("max_price", bind_currency(grid_absolute(entry.regular_price, kGridPoints - 1)));
            RenderedPrompt rp = render_prompt(strategy, bindings);

            detail::PlannedCell cell;
            cell.label = detail::cell_label(entry.product_id, rel, "");
            cell.product_id = entry.product_id;
            cell.relative_price = rel;
            cell.absolute_price = price;
            DrawKey base{design.run_id, design.strategy_id, entry.product_id, relative_key(rel), 0,
                         ""};
            cell.runs = detail::missing_runs(store, base, design.n_draws, &cell.skipped);
            for (const auto& [start, count] : cell.runs) {
                CompletionRequest req;
                req.model = design.model;
                req.system = rp.system;
                req.user = rp.user;
                req.temperature = design.temperature;
                req.n_draws = count;
                req.draw_offset = start;
                cell.requests.push_back(std::move(req));
            }
            cells.push_back(std::move(cell));
        }
    }
    summary.cells_total = cells.size();

    detail::execute_cells(cells, backend, options.parallelism,
                          [&](const detail::PlannedCell& cell, detail::CellOutcome&& oc) {
                              detail::absorb_cell(design, schema, ts, store, summary, cell,
                                                  std::move(oc));
                          });
    store.flush();
    return summary;
}

// ---- personas ----

struct Persona {
    std::string persona_id;
    std::string product_id;
    std::map<std::string, std::string> fields;

    ordered_json to_json() const {
        ordered_json j;
        j["persona_id"] = persona_id;
        j["product_id"] = product_id;
        ordered_json f = ordered_json::object();
        for (const auto& [k, v] : fields) f[k] = v;
        j["fields"] = f;
        return j;
    }

    static Persona from_json(const ordered_json& j) {
        if (!j.is_object()) throw RunnerError("persona is not a JSON object");
        Persona p;
        try {
            p.persona_id = j.at("persona_id").get<std::string>();
            p.product_id = j.at("product_id").get<std::string>();
            for (const auto& [k, v] : j.at("fields").items())
                p.fields[k] = v.get<std::string>();
        } catch (const std::exception& e) {
            throw RunnerError(std::string("persona is missing or mistypes a field: ") + e.what());
        }
        return p;
    }
};

inline void save_personas(const std::filesystem::path& path, const std::vector<Persona>& ps) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RunnerError("cannot write personas: " + path.string());
    for (const auto& p : ps) out << p.to_json().dump() << '\n';
    if (!out) throw RunnerError("persona write failed: " + path.string());
}

inline std::vector<Persona> load_personas(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RunnerError("cannot read personas: " + path.string());
    std::vector<Persona> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ordered_json j = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded())
            throw RunnerError(path.string() + ": malformed persona at line " +
                              std::to_string(line_no));
        out.push_back(Persona::from_json(j));
    }
    return out;
}

struct PersonaGenOptions {
    std::string model = "gpt-4o-mini-2024-07-18";
    double temperature = 1.0;
    int max_rounds = 5;  // redraw rounds before giving up on unparseable output
};

/// Elicit n personas for a product by asking the model to fill in a consumer
/// self-description. Unparseable answers are discarded and redrawn (at
/// advancing draw offsets, so retries never reuse randomness); if the quota
/// is still unmet after max_rounds, throws with a few example rejects.
inline std::vector<Persona> generate_personas(const ProductEntry& entry, int n, Backend& backend,
                                              const PersonaGenOptions& options = {}) {
    if (n <= 0) throw RunnerError("persona count must be positive");
    const PromptStrategy& strategy = builtin_strategy("persona_generate");
    const ParseSchema& schema = schema_for(strategy.answer_schema);

    Bindings bindings;
    for (const auto& name : strategy.placeholder_set()) {
        if (name == "category")
            bindings[name] = entry.category;
        else if (name == "product")
            bindings[name] = entry.product;
        else
            throw RunnerError("persona generation cannot supply placeholder '" + name + "'");
    }
    RenderedPrompt rp = render_prompt(strategy, bindings);

    std::vector<Persona> out;
    std::vector<std::string> rejects;
    int offset = 0;
    for (int round = 0; round < options.max_rounds && static_cast<int>(out.size()) < n; ++round) {
        int need = n - static_cast<int>(out.size());
        CompletionRequest req;
        req.model = options.model;
        req.system = rp.system;
        req.user = rp.user;
        req.temperature = options.temperature;
        req.n_draws = need;
        req.draw_offset = offset;
        offset += need;
        CompletionResponse resp = backend.complete(req);
        for (const auto& text : resp.texts) {
            if (static_cast<int>(out.size()) >= n) break;
            auto parsed = parse_response(text, schema);
            if (!parsed.ok()) {
                if (rejects.size() < 3)
                    rejects.push_back(parsed.error + " in: \"" + text.substr(0, 120) + "\"");
                continue;
            }
            Persona p;
            p.persona_id = strprintf("p%04d", static_cast<int>(out.size()));
            p.product_id = entry.product_id;
            // Keep the demographic fields only; the trailing price guess and
            // purchase decision are procedure byproducts, not traits.
            for (std::size_t i = 0; i + 2 < schema.fields.size(); ++i)
                p.fields[schema.fields[i].name] = parsed.value->values[i].format();
            out.push_back(std::move(p));
        }
    }
    if (static_cast<int>(out.size()) < n) {
        std::string msg = "persona generation for '" + entry.product_id + "' yielded " +
                          std::to_string(out.size()) + " of " + std::to_string(n) + " after " +
                          std::to_string(options.max_rounds) + " rounds";
        for (const auto& r : rejects) msg += "\n  reject: " + r;
        throw RunnerError(msg);
    }
    return out;
}

/// Deterministically extend personas with the profile fields the staged
/// disclosure templates reference: census-style demographics (some copied
/// from the elicited persona under the staged names) plus behavioral scores.
/// The spend-attitude score is the behavioral anchor: it is drawn as a latent
/// standard normal and reported on the 4-26 scale with its percentile.
inline void augment_scores(std::vector<Persona>& personas, std::uint64_t seed) {
    for (auto& p : personas) {
        Rng rng(derive_seed(
            {seed, fnv1a64("augment_scores"), fnv1a64(p.product_id), fnv1a64(p.persona_id)}));
        auto& f = p.fields;
        auto copy_from = [&f](const char* dst, const char* src) {
            auto it = f.find(src);
            if (it != f.end()) f.emplace(dst, it->second);
        };
        copy_from("sex", "gender");
        copy_from("race", "ethnicity");
        copy_from("marriage", "marital_status");
        copy_from("total_family_income", "household_income");

        auto pick = [&rng](std::initializer_list<const char*> xs) {
            std::vector<const char*> v(xs);
            return std::string(v[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))]);
        };
        f.emplace("region", pick({"Northeast", "Midwest", "South", "West"}));
        f.emplace("citizen_status", rng.bernoulli(0.92) ? "yes" : "no");
        f.emplace("religion", pick({"Protestant", "Catholic", "Jewish", "Muslim", "Buddhist",
                                    "Hindu", "none", "other"}));
        f.emplace("religious_attendance",
                  pick({"never", "rarely", "a few times a year", "monthly", "weekly"}));
        f.emplace("political_affiliation",
                  pick({"Democrat", "Republican", "Independent", "other"}));
        f.emplace("political_views", pick({"liberal", "slightly liberal", "moderate",
                                           "slightly conservative", "conservative"}));
        f.emplace("employment_status",
                  pick({"employed full-time", "employed part-time", "self-employed", "unemployed",
                        "retired", "student", "homemaker"}));

        double z = rng.normal01();
        long score = std::clamp(std::lround(15.0 + 3.5 * z), 4L, 26L);
        long pct = std::clamp(std::lround(normal_cdf(z) * 100.0), 1L, 99L);
        f["score_ST-TW"] = std::to_string(score);
        f["pct_spendthrift"] = std::to_string(pct);

        auto pct_uniform = [&rng] { return std::to_string(rng.uniform_int(1, 99)); };
        auto with_pct = [&](const char* name, std::string value, const char* pct_name) {
            f[name] = std::move(value);
            f[pct_name] = pct_uniform();
        };
        with_pct("score_discount", strprintf("%.2f", rng.uniform01()), "pct_discount");
        with_pct("score_presentbias", strprintf("%.2f", 0.8 + 0.4 * rng.uniform01()),
                 "pct_presentbias");
        with_pct("score_riskaversion", std::to_string(rng.uniform_int(1, 10)),
                 "pct_riskaversion");
        with_pct("score_lossaversion", std::to_string(rng.uniform_int(1, 10)),
                 "pct_lossaversion");
        with_pct("score_finliteracy", std::to_string(rng.uniform_int(0, 8)), "pct_finliteracy");
        with_pct("score_numeracy", std::to_string(rng.uniform_int(0, 8)), "pct_numeracy");
        with_pct("score_mentalaccounting", std::to_string(rng.uniform_int(0, 100)),
                 "pct_mentalaccounting");
        with_pct("score_maximization", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_maximization");
        with_pct("score_minimalism", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_minimalism");
        with_pct("score_GREEN", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()), "pct_green");
        with_pct("score_extraversion", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_extraversion");
        with_pct("score_agreeableness", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_agreeableness");
        with_pct("wave1_score_conscientiousness", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_conscientiousness");
        with_pct("score_openness", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_openness");
        with_pct("score_neuroticism", strprintf("%.1f", 1.0 + 4.0 * rng.uniform01()),
                 "pct_neuroticism");
    }
}

/// Resolve a strategy placeholder for one persona at one price. Product
/// facts bind first; persona fields bind by exact name, by the documented
/// prompt aliases, then with spaces mapped to underscores. The competing
/// product's price is quoted at the focal product's regular price.
inline Bindings persona_bindings(const PromptStrategy& strategy, const ProductEntry& entry,
                                 Money price, const Persona& persona) {
    static const std::map<std::string, std::string> kAliases = {
        {"income", "household_income"},
        {"marital status", "marital_status"},
        {"household size", "household_size"},
        {"number of children", "number_of_children"},
        {"home ownership", "home_ownership"},
    };
    Bindings b;
    for (const auto& name : strategy.placeholder_set()) {
        if (name == "category") {
            b[name] = entry.category;
        } else if (name == "product") {
            b[name] = entry.product;
        } else if (name == "price") {
            b[name] = bind_currency(price);
        } else if (name == "min_price") {
            b[name] = bind_currency(grid_absolute(entry.regular_price, 0));
        } else if (name == "max_price") {
            b[name] = bind_currency(grid_absolute(entry.regular_price, kGridPoints - 1));
        } else if (name == "competing_price") {
            b[name] = bind_currency(entry.regular_price);
        } else if (auto direct = persona.fields.find(name); direct != persona.fields.end()) {
            b[name] = direct->second;
        } else if (auto alias = kAliases.find(name);
                   alias != kAliases.end() && persona.fields.count(alias->second)) {
            b[name] = persona.fields.at(alias->second);
        } else {
            std::string underscored = name;
            std::replace(underscored.begin(), underscored.end(), ' ', '_');
            auto fb = persona.fields.find(underscored);
            if (fb == persona.fields.end())
                throw RunnerError("persona '" + persona.persona_id +
                                  "' cannot supply placeholder '" + name + "'");
            b[name] = fb->second;
        }
    }
    return b;
}

/// Run (or resume) a persona-conditioned sweep: one temperature-0 draw per
/// (product, grid price, persona) cell. Order is product, then price
/// ascending, then persona, so stores are byte-stable under resume exactly
/// like price sweeps.
inline RunSummary run_persona_sweep(const ExperimentDesign& design,
                                    const std::vector<ProductEntry>& catalog,
                                    const std::vector<Persona>& personas, Backend& backend,
                                    const std::filesystem::path& store_path,
                                    const RunOptions& options = {}) {
    validate_design(design, catalog);
    if (design.n_draws != 1)
        throw RunnerError("persona sweeps take exactly one draw per cell; set n_draws = 1");
    PromptStrategy strategy = resolve_strategy(design);
    const ParseSchema& schema = schema_for(strategy.answer_schema);

    std::map<std::string, std::vector<const Persona*>> by_product;
    for (const auto& p : personas) by_product[p.product_id].push_back(&p);

    ensure_manifest(store_path, manifest_for(design, strategy, catalog, backend));
    ResultStore store(store_path);
    auto stats = store.open();

    RunSummary summary;
    if (!stats.warning.empty()) summary.warnings.push_back(stats.warning);

    auto ts = detail::timestamp_source(backend, options);
    auto products = resolve_products(design, catalog);
    auto grid = design.resolved_grid();

    std::vector<detail::PlannedCell> cells;
    for (const auto& entry : products) {
        auto it = by_product.find(entry.product_id);
        if (it == by_product.end() || it->second.empty())
            throw RunnerError("no personas supplied for product '" + entry.product_id + "'");
        for (int k : grid) {
            double rel = grid_relative(k);
            Money price = grid_absolute(entry.regular_price, k);
            for (const Persona* persona : it->second) {
                detail::PlannedCell cell;
                cell.label = detail::cell_label(entry.product_id, rel, persona->persona_id);
                cell.product_id = entry.product_id;
                cell.relative_price = rel;
                cell.absolute_price = price;
                cell.persona_id = persona->persona_id;
                DrawKey key{design.run_id, design.strategy_id, entry.product_id,
                            relative_key(rel), 0, persona->persona_id};
                if (store.contains(key)) {
                    cell.skipped = 1;
                } else {
                    RenderedPrompt rp =
                        render_prompt(strategy, persona_bindings(strategy, entry, price, *persona));
                    CompletionRequest req;
                    req.model = design.model;
                    req.system = rp.system;
                    req.user = rp.user;
                    req.temperature = design.temperature;
                    req.n_draws = 1;
                    req.draw_offset = 0;
                    cell.requests.push_back(std::move(req));
                    cell.runs.emplace_back(0, 1);
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    summary.cells_total = cells.size();

    detail::execute_cells(cells, backend, options.parallelism,
                          [&](const detail::PlannedCell& cell, detail::CellOutcome&& oc) {
                              detail::absorb_cell(design, schema, ts, store, summary, cell,
                                                  std::move(oc));
                          });
    store.flush();
    return summary;
}

}  // namespace promptlab
