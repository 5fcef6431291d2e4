#pragma once

#include "trendlens/corpus.hpp"

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trendlens {

/// Lowercases, splits on commas/semicolons/periods, strips everything except letters, digits,
/// spaces and hyphens, collapses whitespace, and drops empty or letter-free pieces.
/// Repeated phrases keep their first position.
std::vector<std::string> clean_caption(std::string_view raw);

/// All distinct phrases of a catalog with the products they came from.
struct FeatureUniverse {
    /// Number of distinct products whose caption yields the phrase.
    std::map<std::string, std::size_t> frequency;
    std::map<std::string, std::set<std::string>> source_index;

    bool empty() const noexcept { return frequency.empty(); }
    std::size_t size() const noexcept { return frequency.size(); }
    std::vector<std::string> phrases() const;

    /// Adds one product's phrase list (already cleaned).
    void add(const std::string& product_id, const std::vector<std::string>& phrases);
};

FeatureUniverse build_universe(const Catalog& catalog);

}  // namespace trendlens
