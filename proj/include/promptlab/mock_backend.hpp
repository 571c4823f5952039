#pragma once

// Deterministic mock backend. It reads rendered prompts the way the real
// service would see them — raw text — and answers from the structural
// simulation in dgp.hpp. Two properties matter:
//
//  * Determinism: every draw's randomness derives from (seed, prompt bytes,
//    absolute draw index), so concurrency, batching, and resume cannot change
//    a single byte of output. Temperature 0 collapses all draws to index 0.
//
//  * Mode awareness: a prompt that discloses the randomization design (the
//    phrase "randomly and uniformly drawn") is answered from the
//    interventional law; anything else is answered observationally, i.e. with
//    the confounder tracking price. A prompt that discloses a
//    Tightwad-Spendthrift score has its confounder pinned by that score
//    instead — disclosed covariates replace latent ones.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "promptlab/backends.hpp"
#include "promptlab/catalog.hpp"
#include "promptlab/dgp.hpp"
#include "promptlab/money.hpp"
#include "promptlab/parsing.hpp"
#include "promptlab/rng.hpp"

namespace promptlab {

/// Prompt text the mock cannot make sense of (no catalog product, no known
/// question form). Not retryable.
class MockError : public BackendError {
public:
    using BackendError::BackendError;
};

class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<ProductEntry> catalog, DgpConfig config = {}, uint64_t seed = 0)
        : catalog_(std::move(catalog)), config_(config), seed_(seed) {
        config_.validate();
        if (catalog_.empty()) throw std::invalid_argument("MockBackend: empty catalog");
    }

    std::string name() const override { return "mock"; }
    bool deterministic() const override { return true; }
    int calls() const { return calls_.load(); }
    const DgpConfig& config() const { return config_; }

    CompletionResponse complete(const CompletionRequest& request) override {
        request.validate();
        calls_.fetch_add(1);
        const std::string& user = request.user;

        const ProductEntry* entry = match_product(user);
        if (!entry)
            throw MockError("mock backend: prompt names no catalog product");

        QueryMode mode = contains(request.system, "randomly and uniformly drawn") ||
                                 contains(user, "randomly and uniformly drawn")
                             ? QueryMode::interventional
                             : QueryMode::observational;

        std::optional<Money> price = find_focal_price(user);
        std::optional<double> d;
        if (price) d = (price->dollars() - entry->regular_price.dollars()) / entry->regular_price.dollars();

        Form form = classify(user);
        if (form != Form::persona_generate && !d)
            throw MockError("mock backend: prompt has no focal price");

        // Persona prompts fix the respondent: the latent taste is keyed by the
        // persona block so it is constant across prices and draws.
        std::optional<double> persona_z;
        if (auto block = persona_block(user))
            persona_z = Rng(derive_seed({seed_, fnv1a64("persona_z"), fnv1a64(*block)})).normal01();
        std::optional<double> disclosed_u = tightwad_override(user);

        uint64_t sys_hash = fnv1a64(request.system);
        uint64_t user_hash = fnv1a64(user);

        CompletionResponse response;
        response.texts.reserve(size_t(request.n_draws));
        for (int i = 0; i < request.n_draws; ++i) {
            int global_draw = request.temperature == 0.0 ? 0 : request.draw_offset + i;
            Rng rng(derive_seed({seed_, fnv1a64("draw"), sys_hash, user_hash, uint64_t(global_draw)}));
            response.texts.push_back(answer(form, *entry, d, mode, persona_z, disclosed_u, rng));
        }
        response.meta["backend"] = "mock";
        response.meta["retries"] = "0";
        response.meta["latency_ms"] = "0";
        return response;
    }

private:
    enum class Form { full_record, past_price, competing_price, expiration_days, persona_generate, decision };

    const ProductEntry* match_product(const std::string& user) const {
        const ProductEntry* best = nullptr;
        for (const auto& e : catalog_)
            if (contains(user, e.product) && (!best || e.product.size() > best->product.size()))
                best = &e;
        return best;
    }

    /// Focal price: a "$X.XX" immediately after a pricing phrase (optionally
    /// ": "). Blanks ("___") after the phrase mean the prompt left price open.
    static std::optional<Money> find_focal_price(const std::string& user) {
        for (const char* marker : {"currently priced at", "The product is priced at"}) {
            size_t pos = user.find(marker);
            if (pos == std::string::npos) continue;
            size_t i = pos + std::string(marker).size();
            while (i < user.size() && user[i] == ' ') ++i;
            if (i < user.size() && user[i] == ':') ++i;
            while (i < user.size() && user[i] == ' ') ++i;
            if (i >= user.size() || user[i] != '$') continue;
            auto parsed = parse_decimal(std::string_view(user).substr(i + 1, 24));
            if (parsed.ok()) return *parsed.value;
        }
        return std::nullopt;
    }

    static Form classify(const std::string& user) {
        if (contains(user, "You have purchased this product")) return Form::full_record;
        if (contains(user, "The last time you purchased this product")) return Form::past_price;
        if (contains(user, "The price of a similar competing product from a different brand is ___"))
            return Form::competing_price;
        if (contains(user, "The expiration date of the product is ___")) return Form::expiration_days;
        if (contains(user, "Age: ___")) return Form::persona_generate;
        if (contains(user, "Would you or would you not purchase") || contains(user, "You decide to"))
            return Form::decision;
        throw MockError("mock backend: unrecognized prompt form");
    }

    static std::optional<std::string> persona_block(const std::string& user) {
        const std::string start = "You are a consumer with the following characteristics:";
        size_t b = user.find(start);
        if (b == std::string::npos) return std::nullopt;
        size_t e = user.find("Please consider the following product category:", b);
        if (e == std::string::npos) e = user.size();
        return user.substr(b, e - b);
    }

    /// A disclosed Tightwad-Spendthrift score pins the confounder: the latent
    /// taste was synthesized as score = 15 + 3.5*z, so u = sigma_u*(score-15)/3.5.
    std::optional<double> tightwad_override(const std::string& user) const {
        const std::string marker = "# Tightwad-Spendthrift: ";
        size_t pos = user.find(marker);
        if (pos == std::string::npos) return std::nullopt;
        auto parsed = parse_decimal(std::string_view(user).substr(pos + marker.size(), 16));
        if (!parsed.ok()) return std::nullopt;
        double score = parsed.value->dollars();
        return config_.sigma_u * (score - 15.0) / 3.5;
    }

    std::string answer(Form form, const ProductEntry& entry, std::optional<double> d, QueryMode mode,
                       std::optional<double> persona_z, std::optional<double> disclosed_u,
                       Rng& rng) const {
        switch (form) {
            case Form::decision: {
                double z = persona_z ? *persona_z : rng.normal01();
                double u = disclosed_u ? *disclosed_u : config_.confound_shift(*d, mode) + config_.sigma_u * z;
                double p = sigmoid(config_.alpha + config_.beta * *d + config_.kappa * u);
                return rng.bernoulli(p) ? "purchase" : "not purchase";
            }
            case Form::past_price:
                return elicit_price(entry, *d, mode, config_.lambda_past, rng).str();
            case Form::competing_price:
                return elicit_price(entry, *d, mode, config_.lambda_competing, rng).str();
            case Form::expiration_days:
                return std::to_string(elicit_expiration(*d, mode, rng));
            case Form::full_record:
                return full_record_answer(entry, *d, mode, persona_z, disclosed_u, rng);
            case Form::persona_generate:
                return persona_record_answer(entry, rng);
        }
        throw std::logic_error("mock backend: bad form");
    }

    /// Elicited price: regular * (1 + lambda * confound shift) + noise, >= 0.
    Money elicit_price(const ProductEntry& entry, double d, QueryMode mode, double lambda,
                       Rng& rng) const {
        double p0 = entry.regular_price.dollars();
        double value = p0 * (1.0 + lambda * config_.confound_shift(d, mode)) +
                       rng.normal01() * config_.price_noise_frac * p0;
        Money m = round_to_cents(value);
        return m.cents < 0 ? Money(0) : m;
    }

    int64_t elicit_expiration(double d, QueryMode mode, Rng& rng) const {
        double base = config_.expiration_base_days;
        double value = base * (1.0 + config_.lambda_expiration * config_.confound_shift(d, mode)) +
                       rng.normal01() * 0.05 * base;
        int64_t days = llround(value);
        return days < 0 ? 0 : days;
    }

    struct Demographics {
        int64_t age, income, household, children, budget;
        std::string gender, education, occupation, ethnicity, marital, state, ownership;
    };

    static Demographics draw_demographics(Rng& rng) {
        static const std::vector<std::string> genders = {"female", "male"};
        static const std::vector<std::string> educations = {
            "high school diploma", "some college", "associate degree", "bachelor's degree",
            "master's degree"};
        static const std::vector<std::string> occupations = {
            "teacher",   "software engineer", "nurse",   "retail associate",
            "accountant", "construction worker", "retired", "student"};
        static const std::vector<std::string> ethnicities = {"White", "Black", "Hispanic", "Asian",
                                                             "Other"};
        static const std::vector<std::string> maritals = {"single", "married", "divorced", "widowed"};
        static const std::vector<std::string> states = {"CA", "TX", "NY", "FL", "IL", "OH", "PA",
                                                        "GA", "NC", "MI", "WA", "AZ"};
        auto pick = [&](const std::vector<std::string>& v) {
            return v[size_t(rng.uniform_int(0, int64_t(v.size()) - 1))];
        };
        Demographics demo;
        demo.age = rng.uniform_int(18, 79);
        demo.gender = pick(genders);
        demo.education = pick(educations);
        demo.income = 20000 + 1000 * rng.uniform_int(0, 180);
        demo.occupation = pick(occupations);
        demo.ethnicity = pick(ethnicities);
        demo.marital = pick(maritals);
        demo.household = rng.uniform_int(1, 6);
        demo.children = rng.uniform_int(0, std::max<int64_t>(0, demo.household - 1));
        demo.state = pick(states);
        demo.ownership = rng.bernoulli(0.6) ? "own" : "rent";
        // Budget tracks income (with spread) so the audit sees a plausible
        // within-record correlation that is orthogonal to price.
        demo.budget = llround(double(demo.income) / 12.0 * (0.08 + 0.08 * rng.uniform01()) / 10.0) * 10;
        return demo;
    }

    std::string full_record_answer(const ProductEntry& entry, double d, QueryMode mode,
                                   std::optional<double> persona_z, std::optional<double> disclosed_u,
                                   Rng& rng) const {
        Demographics demo = draw_demographics(rng);
        static const std::vector<std::string> freqs = {"frequently", "occasionally", "rarely"};
        static const std::vector<std::string> storages = {"a lot of", "some", "limited"};
        std::string freq = freqs[size_t(rng.uniform_int(0, 2))];
        std::string storage = storages[size_t(rng.uniform_int(0, 2))];
        Money last_price = elicit_price(entry, d, mode, config_.lambda_past, rng);
        int64_t exp_days = elicit_expiration(d, mode, rng);
        Money competing = elicit_price(entry, d, mode, config_.lambda_competing, rng);
        double z = persona_z ? *persona_z : rng.normal01();
        double u = disclosed_u ? *disclosed_u : config_.confound_shift(d, mode) + config_.sigma_u * z;
        double p = sigmoid(config_.alpha + config_.beta * d + config_.kappa * u);
        const char* decision = rng.bernoulli(p) ? "purchase" : "not purchase";
        return strprintf("%lld, %s, %s, %lld, %s, %s, %s, %lld, %lld, %s, %s, %s, %s, %s, %lld, %lld, %s, %s",
                         (long long)demo.age, demo.gender.c_str(), demo.education.c_str(),
                         (long long)demo.income, demo.occupation.c_str(), demo.ethnicity.c_str(),
                         demo.marital.c_str(), (long long)demo.household, (long long)demo.children,
                         demo.state.c_str(), demo.ownership.c_str(), freq.c_str(),
                         last_price.str().c_str(), storage.c_str(), (long long)demo.budget,
                         (long long)exp_days, competing.str().c_str(), decision);
    }

    std::string persona_record_answer(const ProductEntry& entry, Rng& rng) const {
        Demographics demo = draw_demographics(rng);
        // Price left open by the prompt: a plausible guess near regular price.
        Money guess = round_to_cents(entry.regular_price.dollars() * (0.8 + 0.4 * rng.uniform01()));
        double z = rng.normal01();
        double p = sigmoid(config_.alpha + config_.kappa * config_.sigma_u * z);
        const char* decision = rng.bernoulli(p) ? "purchase" : "not purchase";
        return strprintf("%lld, %s, %s, %lld, %s, %s, %s, %lld, %lld, %s, %s, %s, %s",
                         (long long)demo.age, demo.gender.c_str(), demo.education.c_str(),
                         (long long)demo.income, demo.occupation.c_str(), demo.ethnicity.c_str(),
                         demo.marital.c_str(), (long long)demo.household, (long long)demo.children,
                         demo.state.c_str(), demo.ownership.c_str(), guess.str().c_str(), decision);
    }

    std::vector<ProductEntry> catalog_;
    DgpConfig config_;
    uint64_t seed_ = 0;
    std::atomic<int> calls_{0};
};

}  // namespace promptlab
