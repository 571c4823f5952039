#pragma once

// Product catalog: load/validate the bundled 40-product CSV and derive the
// 11-point experimental price grid (0% to 200% of regular price in 20% steps).
// Grid arithmetic is exact on integer cents so the same catalog always yields
// the same absolute prices, bit for bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "promptlab/csv.hpp"
#include "promptlab/money.hpp"
#include "promptlab/util.hpp"

namespace promptlab {

enum class ProductGroup { beverages, refrigerated, snacks_bakery, household_pet };

inline const char* group_name(ProductGroup g) {
    switch (g) {
        case ProductGroup::beverages: return "beverages";
        case ProductGroup::refrigerated: return "refrigerated";
        case ProductGroup::snacks_bakery: return "snacks_bakery";
        case ProductGroup::household_pet: return "household_pet";
    }
    throw std::logic_error("group_name: bad enum");
}

inline constexpr std::array<ProductGroup, 4> kAllGroups = {
    ProductGroup::beverages, ProductGroup::refrigerated, ProductGroup::snacks_bakery,
    ProductGroup::household_pet};

inline std::optional<ProductGroup> group_from_name(std::string_view name) {
    for (ProductGroup g : kAllGroups)
        if (name == group_name(g)) return g;
    return std::nullopt;
}

struct ProductEntry {
    std::string product_id;
    std::string category;
    std::string product;
    Money regular_price;
    ProductGroup group = ProductGroup::beverages;
};

class CatalogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One grid point: relative price (-1.0 .. +1.0 of regular, i.e. 0%..200%)
/// plus the exact absolute price in cents.
struct PricePoint {
    double relative = 0.0;
    Money absolute;
};

inline constexpr int kGridPoints = 11;

/// Relative price for grid index k in [0, 10]: -1.0, -0.8, ..., +1.0.
inline double grid_relative(int k) {
    if (k < 0 || k >= kGridPoints) throw std::out_of_range("grid_relative: index");
    return double(k - 5) / 5.0;
}

/// Absolute price at grid index k: regular * (1 + relative), rounded half-up
/// on exact integer arithmetic. regular*(5+j)/5 with j=k-5, half-up.
inline Money grid_absolute(Money regular_price, int k) {
    if (k < 0 || k >= kGridPoints) throw std::out_of_range("grid_absolute: index");
    int64_t n = regular_price.cents * int64_t(k);  // = cents*(5+j), j=k-5
    return Money((2 * n + 5) / 10);
}

inline std::array<PricePoint, kGridPoints> price_grid(const ProductEntry& e) {
    std::array<PricePoint, kGridPoints> grid;
    for (int k = 0; k < kGridPoints; ++k) grid[k] = {grid_relative(k), grid_absolute(e.regular_price, k)};
    return grid;
}

/// Stable join key for a relative price (grid values are not exact binaries).
inline int64_t relative_key(double relative) { return llround(relative * 1e6); }

/// Map a relative price back to its grid index, or nullopt if off-grid.
inline std::optional<int> grid_index(double relative) {
    double scaled = relative * 5.0;
    long k = lround(scaled);
    if (std::fabs(scaled - double(k)) > 1e-6) return std::nullopt;
    if (k < -5 || k > 5) return std::nullopt;
    return int(k + 5);
}

/// General absolute price for possibly off-grid relative values (used when
/// reference data carries non-grid points): regular * (1 + relative), half-up.
inline Money absolute_from_relative(Money regular_price, double relative) {
    if (auto k = grid_index(relative)) return grid_absolute(regular_price, *k);
    return round_to_cents(regular_price.dollars() * (1.0 + relative));
}

inline const std::vector<std::string> kCatalogHeader = {"product_id", "category", "product",
                                                        "regular_price", "group"};

/// Load and validate a catalog CSV. Error messages cite 1-based file rows.
inline std::vector<ProductEntry> load_catalog(const std::string& path) {
    auto rows = csv_read_file(path);
    if (rows.empty()) throw CatalogError("catalog " + path + ": empty file");
    if (rows[0] != kCatalogHeader)
        throw CatalogError("catalog " + path + ": bad header (want product_id,category,product,regular_price,group)");
    std::vector<ProductEntry> entries;
    std::vector<std::string> seen_ids;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::string where = "catalog " + path + " row " + std::to_string(r + 1);
        if (row.size() != 5) throw CatalogError(where + ": expected 5 fields, got " + std::to_string(row.size()));
        ProductEntry e;
        e.product_id = trim(row[0]);
        e.category = trim(row[1]);
        e.product = trim(row[2]);
        if (e.product_id.empty()) throw CatalogError(where + ": empty product_id");
        if (e.category.empty()) throw CatalogError(where + ": empty category");
        if (e.product.empty()) throw CatalogError(where + ": empty product name");
        for (const auto& id : seen_ids)
            if (id == e.product_id) throw CatalogError(where + ": duplicate product_id '" + e.product_id + "'");
        seen_ids.push_back(e.product_id);
        try {
            e.regular_price = parse_money(row[3]);
        } catch (const std::exception& ex) {
            throw CatalogError(where + ": bad regular_price: " + ex.what());
        }
        if (e.regular_price.cents < 5)
            throw CatalogError(where + ": regular_price must be at least 0.05 (got " + e.regular_price.str() + ")");
        auto g = group_from_name(trim(row[4]));
        if (!g) throw CatalogError(where + ": unknown group '" + row[4] + "'");
        e.group = *g;
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw CatalogError("catalog " + path + ": no product rows");
    return entries;
}

inline const ProductEntry& find_product(const std::vector<ProductEntry>& catalog,
                                        std::string_view product_id) {
    for (const auto& e : catalog)
        if (e.product_id == product_id) return e;
    throw CatalogError("unknown product_id '" + std::string(product_id) + "'");
}

/// Content hash over all entries, for run manifests.
inline uint64_t catalog_hash(const std::vector<ProductEntry>& catalog) {
    std::string blob;
    for (const auto& e : catalog) {
        blob += e.product_id;
        blob.push_back('\x1f');
        blob += e.category;
        blob.push_back('\x1f');
        blob += e.product;
        blob.push_back('\x1f');
        blob += e.regular_price.str();
        blob.push_back('\x1f');
        blob += group_name(e.group);
        blob.push_back('\x1e');
    }
    return fnv1a64(blob);
}

}  // namespace promptlab
