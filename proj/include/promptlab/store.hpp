#pragma once

// Append-only JSONL store for individual model draws, plus a sidecar manifest
// that pins the configuration a store was created under so a resumed run can
// refuse to mix incompatible records into the same file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/catalog.hpp"
#include "promptlab/money.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

using ordered_json = nlohmann::ordered_json;

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Identity of a single draw. Two records with equal keys would answer the
// same question twice, so the store rejects duplicates.
struct DrawKey {
    std::string run_id;
    std::string strategy_id;
    std::string product_id;
    std::int64_t relative_key = 0;  // relative price scaled by 1e6
    int draw_index = 0;
    std::string persona_id;  // empty when the draw is not persona-conditioned

    auto tied() const {
        return std::tie(run_id, strategy_id, product_id, relative_key, draw_index, persona_id);
    }
    friend bool operator<(const DrawKey& a, const DrawKey& b) { return a.tied() < b.tied(); }
    friend bool operator==(const DrawKey& a, const DrawKey& b) { return a.tied() == b.tied(); }

    std::string describe() const {
        std::string s = run_id + "/" + strategy_id + "/" + product_id + "@" +
                        strprintf("%.6f", static_cast<double>(relative_key) / 1e6) + "#" +
                        std::to_string(draw_index);
        if (!persona_id.empty()) s += "/" + persona_id;
        return s;
    }
};

struct DrawRecord {
    std::string run_id;
    std::string design_id;
    std::string strategy_id;
    std::string product_id;
    double relative_price = 0.0;
    Money absolute_price{};
    int draw_index = 0;
    std::string persona_id;  // empty when not persona-conditioned
    std::string model;
    double temperature = 1.0;
    std::string raw_text;
    ordered_json parsed;      // null when parsing failed
    std::string parse_error;  // empty when parsing succeeded
    std::string timestamp;

    bool parse_ok() const { return parse_error.empty() && !parsed.is_null(); }

    DrawKey key() const {
        return DrawKey{run_id, strategy_id, product_id, relative_key(relative_price),
                       draw_index, persona_id};
    }

    ordered_json to_json() const {
        ordered_json j;
        j["run_id"] = run_id;
        j["design_id"] = design_id;
        j["strategy_id"] = strategy_id;
        j["product_id"] = product_id;
        j["relative_price"] = relative_price;
        j["absolute_price"] = absolute_price.str();
        j["draw_index"] = draw_index;
        j["persona_id"] = persona_id;
        j["model"] = model;
        j["temperature"] = temperature;
        j["raw_text"] = raw_text;
        j["parsed"] = parsed;
        j["parse_error"] = parse_error;
        j["timestamp"] = timestamp;
        return j;
    }

    static DrawRecord from_json(const ordered_json& j) {
        if (!j.is_object()) throw StoreError("draw record is not a JSON object");
        DrawRecord r;
        try {
            r.run_id = j.at("run_id").get<std::string>();
            r.design_id = j.at("design_id").get<std::string>();
            r.strategy_id = j.at("strategy_id").get<std::string>();
            r.product_id = j.at("product_id").get<std::string>();
            r.relative_price = j.at("relative_price").get<double>();
            r.absolute_price = parse_money(j.at("absolute_price").get<std::string>());
            r.draw_index = j.at("draw_index").get<int>();
            r.persona_id = j.at("persona_id").get<std::string>();
            r.model = j.at("model").get<std::string>();
            r.temperature = j.at("temperature").get<double>();
            r.raw_text = j.at("raw_text").get<std::string>();
            r.parsed = j.at("parsed");
            r.parse_error = j.at("parse_error").get<std::string>();
            r.timestamp = j.at("timestamp").get<std::string>();
        } catch (const StoreError&) {
            throw;
        } catch (const std::exception& e) {
            throw StoreError(std::string("draw record is missing or mistypes a field: ") + e.what());
        }
        return r;
    }
};

// JSONL store. `open()` loads whatever is already on disk so callers can skip
// completed work. A process killed mid-write leaves a final line without a
// terminating newline; that torn tail is dropped and the file truncated so a
// resumed run regenerates the draw. Damage anywhere *before* the final line is
// real corruption and raises StoreError instead of being papered over.
class ResultStore {
public:
    struct OpenStats {
        std::size_t records = 0;
        bool repaired_tail = false;
        std::string warning;  // non-empty iff repaired_tail
    };

    explicit ResultStore(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const { return path_; }

    OpenStats open() {
        namespace fs = std::filesystem;
        records_.clear();
        keys_.clear();
        OpenStats stats;
        if (fs::exists(path_)) {
            std::ifstream in(path_, std::ios::binary);
            if (!in) throw StoreError("cannot open result store: " + path_.string());
            std::string content{std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>()};
            in.close();

            std::vector<std::pair<std::size_t, std::string>> lines;  // (byte offset, text)
            std::size_t pos = 0;
            std::size_t keep_bytes = content.size();
            while (pos < content.size()) {
                std::size_t nl = content.find('\n', pos);
                if (nl == std::string::npos) {
                    keep_bytes = pos;
                    stats.repaired_tail = true;
                    stats.warning = "dropped torn trailing line (no newline) in " + path_.string();
                    break;
                }
                lines.emplace_back(pos, content.substr(pos, nl - pos));
                pos = nl + 1;
            }

            for (std::size_t i = 0; i < lines.size(); ++i) {
                const auto& [offset, text] = lines[i];
                const bool last_line = (i + 1 == lines.size());
                ordered_json j = ordered_json::parse(text, nullptr, /*allow_exceptions=*/false);
                if (j.is_discarded()) {
                    if (last_line && !stats.repaired_tail) {
                        keep_bytes = offset;
                        stats.repaired_tail = true;
                        stats.warning =
                            "dropped unparseable final line in " + path_.string();
                        break;
                    }
                    throw StoreError(path_.string() + ": malformed record at line " +
                                     std::to_string(i + 1));
                }
                DrawRecord rec;
                try {
                    rec = DrawRecord::from_json(j);
                } catch (const StoreError& e) {
                    throw StoreError(path_.string() + ": line " + std::to_string(i + 1) + ": " +
                                     e.what());
                }
                if (!keys_.insert(rec.key()).second) {
                    throw StoreError(path_.string() + ": duplicate draw at line " +
                                     std::to_string(i + 1) + ": " + rec.key().describe());
                }
                records_.push_back(std::move(rec));
            }

            if (keep_bytes < content.size()) fs::resize_file(path_, keep_bytes);
        }
        stats.records = records_.size();
        return stats;
    }

    bool contains(const DrawKey& key) const { return keys_.count(key) != 0; }
    std::size_t size() const { return records_.size(); }
    const std::vector<DrawRecord>& read_all() const { return records_; }

    void append(const DrawRecord& rec) {
        DrawKey key = rec.key();
        if (keys_.count(key)) throw StoreError("duplicate draw appended: " + key.describe());
        ensure_writable();
        out_ << rec.to_json().dump() << '\n';
        if (!out_) throw StoreError("write failed: " + path_.string());
        keys_.insert(std::move(key));
        records_.push_back(rec);
    }

    void flush() {
        if (out_.is_open()) {
            out_.flush();
            if (!out_) throw StoreError("flush failed: " + path_.string());
        }
    }

private:
    void ensure_writable() {
        if (out_.is_open()) return;
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        out_.open(path_, std::ios::binary | std::ios::app);
        if (!out_) throw StoreError("cannot open result store for append: " + path_.string());
    }

    std::filesystem::path path_;
    std::ofstream out_;
    std::set<DrawKey> keys_;
    std::vector<DrawRecord> records_;
};

// Convenience loader for post-hoc analysis of a finished store.
inline std::vector<DrawRecord> load_records(const std::filesystem::path& path) {
    ResultStore store(path);
    store.open();
    return store.read_all();
}

// Sidecar manifest pinning the configuration a store was produced under.
struct StoreManifest {
    std::string run_id;
    std::string design_id;
    std::string design_hash;    // hex
    std::string strategy_hash;  // hex, hash of the fully resolved strategy
    std::string catalog_hash;   // hex
    std::string model;
    std::string backend;
    std::uint64_t seed = 0;

    ordered_json to_json() const {
        ordered_json j;
        j["run_id"] = run_id;
        j["design_id"] = design_id;
        j["design_hash"] = design_hash;
        j["strategy_hash"] = strategy_hash;
        j["catalog_hash"] = catalog_hash;
        j["model"] = model;
        j["backend"] = backend;
        j["seed"] = seed;
        return j;
    }

    static StoreManifest from_json(const ordered_json& j) {
        if (!j.is_object()) throw StoreError("store manifest is not a JSON object");
        StoreManifest m;
        try {
            m.run_id = j.at("run_id").get<std::string>();
            m.design_id = j.at("design_id").get<std::string>();
            m.design_hash = j.at("design_hash").get<std::string>();
            m.strategy_hash = j.at("strategy_hash").get<std::string>();
            m.catalog_hash = j.at("catalog_hash").get<std::string>();
            m.model = j.at("model").get<std::string>();
            m.backend = j.at("backend").get<std::string>();
            m.seed = j.at("seed").get<std::uint64_t>();
        } catch (const std::exception& e) {
            throw StoreError(std::string("store manifest is missing or mistypes a field: ") +
                             e.what());
        }
        return m;
    }

    // Fields that must agree for a resume to be legal. `backend` is exempt:
    // pointing a resumed run at a different transport for the same model is
    // legitimate (e.g. moving between a proxy and the real endpoint).
    std::vector<std::string> mismatches(const StoreManifest& other) const {
        std::vector<std::string> out;
        auto cmp = [&out](const char* name, const auto& a, const auto& b) {
            if (!(a == b)) out.push_back(name);
        };
        cmp("run_id", run_id, other.run_id);
        cmp("design_id", design_id, other.design_id);
        cmp("design_hash", design_hash, other.design_hash);
        cmp("strategy_hash", strategy_hash, other.strategy_hash);
        cmp("catalog_hash", catalog_hash, other.catalog_hash);
        cmp("model", model, other.model);
        cmp("seed", seed, other.seed);
        return out;
    }
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& store_path) {
    return std::filesystem::path(store_path.string() + ".manifest.json");
}

inline void write_manifest(const std::filesystem::path& store_path, const StoreManifest& m) {
    auto path = manifest_path_for(store_path);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write manifest: " + path.string());
    out << m.to_json().dump(2) << '\n';
    if (!out) throw StoreError("manifest write failed: " + path.string());
}

inline std::optional<StoreManifest> read_manifest(const std::filesystem::path& store_path) {
    auto path = manifest_path_for(store_path);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    ordered_json j = ordered_json::parse(content, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw StoreError("manifest is not valid JSON: " + path.string());
    return StoreManifest::from_json(j);
}

// Called before touching a store: writes the manifest on first use, verifies
// it on resume, and throws naming every differing field on a mismatch.
inline void ensure_manifest(const std::filesystem::path& store_path, const StoreManifest& m) {
    auto existing = read_manifest(store_path);
    if (!existing) {
        write_manifest(store_path, m);
        return;
    }
    auto bad = existing->mismatches(m);
    if (!bad.empty()) {
        std::string fields;
        for (const auto& f : bad) {
            if (!fields.empty()) fields += ", ";
            fields += f;
        }
        throw StoreError("store " + store_path.string() +
                         " was created under a different configuration (mismatched: " + fields +
                         "); refusing to resume");
    }
}

}  // namespace promptlab
