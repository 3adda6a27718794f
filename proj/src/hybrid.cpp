#include "mars/hybrid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "mars/errors.hpp"
#include "mars/text.hpp"

namespace mars {

std::map<std::string, std::vector<DatasetItem>> by_category(const std::vector<DatasetItem>& items) {
    std::map<std::string, std::vector<DatasetItem>> out;
    for (const auto& item : items) out[item.category].push_back(item);
    return out;
}

SplitResult split_dataset(const std::vector<DatasetItem>& items, const SplitSpec& spec) {
    if (items.empty()) throw EmptyDataset("split_dataset requires at least one item");
    const double sum = spec.train_ratio + spec.val_ratio + spec.test_ratio;
    if (spec.train_ratio <= 0 || spec.val_ratio <= 0 || spec.test_ratio <= 0 ||
        std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("split ratios must be positive and sum to 1");
    }

    // Remember dataset order so each split can be emitted in stable order.
    std::map<std::string, std::vector<std::size_t>> categories;
    for (std::size_t i = 0; i < items.size(); ++i) categories[items[i].category].push_back(i);

    SplitResult result;
    std::array<std::vector<std::size_t>, 3> picked;  // train, val, test indices
    for (auto& [category, indices] : categories) {
        const std::size_t n = indices.size();
        if (n < 10) {
            result.warnings.push_back("category '" + category + "' has only " +
                                      std::to_string(n) +
                                      " items; splits may leave validation or test empty");
        }

        // Largest-remainder quotas; remainder ties resolve train → val → test.
        const std::array<double, 3> raw{spec.train_ratio * static_cast<double>(n),
                                        spec.val_ratio * static_cast<double>(n),
                                        spec.test_ratio * static_cast<double>(n)};
        std::array<std::size_t, 3> quota{};
        std::array<double, 3> frac{};
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            quota[s] = static_cast<std::size_t>(std::floor(raw[s]));
            frac[s] = raw[s] - static_cast<double>(quota[s]);
            assigned += quota[s];
        }
        std::array<int, 3> order{0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return frac[a] > frac[b]; });
        for (std::size_t r = 0; r < n - assigned; ++r) ++quota[order[r % 3]];

        // Per-category generator: the same seed gives the same shuffle no
        // matter which other categories exist. Explicit Fisher-Yates keeps
        // the permutation identical across standard-library implementations.
        std::mt19937_64 rng(spec.seed ^ fnv1a64(category));
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(indices[i - 1], indices[j]);
        }

        std::size_t cursor = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t k = 0; k < quota[s]; ++k) picked[s].push_back(indices[cursor++]);
        }
    }

    for (int s = 0; s < 3; ++s) std::sort(picked[s].begin(), picked[s].end());
    for (std::size_t i : picked[0]) result.train.push_back(items[i]);
    for (std::size_t i : picked[1]) result.val.push_back(items[i]);
    for (std::size_t i : picked[2]) result.test.push_back(items[i]);
    return result;
}

VariantKind HybridPolicy::variant_for(const std::string& category) const {
    auto it = by_category.find(category);
    return it == by_category.end() ? default_variant : it->second;
}

HybridSelection select_hybrid(const std::map<std::string, std::vector<DatasetItem>>& val_by_category,
                              const PromptTable& prompts, const AccuracyFn& accuracy) {
    HybridSelection selection;
    for (const auto& [category, val_items] : val_by_category) {
        if (val_items.empty()) {
            selection.warnings.push_back("category '" + category +
                                         "' has no validation items; using default variant");
            selection.policy.by_category[category] = selection.policy.default_variant;
            continue;
        }
        auto prompts_it = prompts.find(category);

        // Incumbent semantics: 'concise' starts as winner at accuracy 0 and
        // is replaced only by a strictly better variant.
        double best_acc = 0.0;
        VariantKind best = VariantKind::concise;
        for (VariantKind kind : kAllVariants) {
            if (prompts_it == prompts.end()) break;
            auto p = prompts_it->second.find(kind);
            if (p == prompts_it->second.end()) continue;
            double acc = accuracy(p->second, val_items);
            selection.accuracies[category][kind] = acc;
            if (acc > best_acc) {
                best_acc = acc;
                best = kind;
            }
        }
        selection.policy.by_category[category] = best;

        char line[256];
        std::snprintf(line, sizeof(line), "  %s: '%s' (acc: %.1f%%)", category.c_str(),
                      std::string(variant_name(best)).c_str(), best_acc * 100.0);
        selection.log_lines.emplace_back(line);
    }
    return selection;
}

std::vector<const EnhancedPrompt*> apply_policy(const HybridPolicy& policy,
                                                const std::vector<DatasetItem>& test_items,
                                                const PromptTable& prompts) {
    std::vector<const EnhancedPrompt*> out;
    out.reserve(test_items.size());
    for (const auto& item : test_items) {
        VariantKind kind = policy.variant_for(item.category);
        auto cat_it = prompts.find(item.category);
        if (cat_it == prompts.end()) {
            throw MissingPrompt("no prompts rendered for category '" + item.category + "'");
        }
        auto p = cat_it->second.find(kind);
        if (p == cat_it->second.end()) {
            throw MissingPrompt("category '" + item.category + "' has no '" +
                                std::string(variant_name(kind)) + "' prompt");
        }
        out.push_back(&p->second);
    }
    return out;
}

std::string policy_to_text(const HybridPolicy& policy) {
    std::ostringstream os;
    os << "default\t" << variant_name(policy.default_variant) << "\n";
    for (const auto& [category, kind] : policy.by_category)
        os << category << "\t" << variant_name(kind) << "\n";
    return os.str();
}

HybridPolicy policy_from_text(const std::string& text) {
    HybridPolicy policy;
    for (const auto& line : split(text, '\n')) {
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError("policy line is not tab-separated: " + line);
        std::string category{trim(line.substr(0, tab))};
        VariantKind kind = parse_variant(trim(line.substr(tab + 1)));
        if (category == "default") {
            policy.default_variant = kind;
        } else {
            policy.by_category[category] = kind;
        }
    }
    return policy;
}

} // namespace mars
