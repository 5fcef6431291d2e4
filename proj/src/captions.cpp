#include "trendlens/captions.hpp"

#include <algorithm>
#include <unordered_set>

namespace trendlens {

namespace {

bool is_delimiter(char c) { return c == ',' || c == ';' || c == '.'; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string normalize_piece(std::string_view piece) {
    std::string out;
    bool pending_space = false;
    bool has_letter = false;
    for (char raw : piece) {
        const auto c = static_cast<unsigned char>(raw);
        if (is_space(raw)) {
            pending_space = !out.empty();
            continue;
        }
        char kept = 0;
        if (c >= 'A' && c <= 'Z') {
            kept = static_cast<char>(c - 'A' + 'a');
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-') {
            kept = static_cast<char>(c);
        }
        if (kept == 0) {
            continue;
        }
        has_letter = has_letter || (kept >= 'a' && kept <= 'z');
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(kept);
    }
    return has_letter ? out : std::string{};
}

}  // namespace

std::vector<std::string> clean_caption(std::string_view raw) {
    std::vector<std::string> phrases;
    std::unordered_set<std::string> seen;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= raw.size(); ++i) {
        if (i < raw.size() && !is_delimiter(raw[i])) {
            continue;
        }
        auto phrase = normalize_piece(raw.substr(start, i - start));
        start = i + 1;
        if (!phrase.empty() && seen.insert(phrase).second) {
            phrases.push_back(std::move(phrase));
        }
    }
    return phrases;
}

std::vector<std::string> FeatureUniverse::phrases() const {
    std::vector<std::string> out;
    out.reserve(frequency.size());
    for (const auto& [phrase, _] : frequency) {
        out.push_back(phrase);
    }
    return out;
}

void FeatureUniverse::add(const std::string& product_id, const std::vector<std::string>& phrases) {
    for (const auto& phrase : phrases) {
        auto& ids = source_index[phrase];
        if (ids.insert(product_id).second) {
            frequency[phrase] = ids.size();
        }
    }
}

FeatureUniverse build_universe(const Catalog& catalog) {
    FeatureUniverse universe;
    for (const auto& p : catalog.products) {
        universe.add(p.id, clean_caption(p.caption));
    }
    return universe;
}

}  // namespace trendlens
