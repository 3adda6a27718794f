#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mars/dataset.hpp"
#include "mars/taxonomy.hpp"

namespace mars {

struct SplitSpec {
    double train_ratio = 0.8;
    double val_ratio = 0.1;
    double test_ratio = 0.1;
    std::uint64_t seed = 0;
};

struct SplitResult {
    std::vector<DatasetItem> train;
    std::vector<DatasetItem> val;
    std::vector<DatasetItem> test;
    std::vector<std::string> warnings;  // small-category notices
};

// Stratified per category, deterministic given the seed. Quotas use the
// largest-remainder method so every category lands within one item of the
// requested ratios. Throws EmptyDataset / ValidationError.
SplitResult split_dataset(const std::vector<DatasetItem>& items, const SplitSpec& spec);

struct HybridPolicy {
    std::map<std::string, VariantKind> by_category;
    VariantKind default_variant = VariantKind::concise;

    VariantKind variant_for(const std::string& category) const;
};

// prompts are keyed per category; a category may carry any subset of variants.
using PromptTable = std::map<std::string, std::map<VariantKind, EnhancedPrompt>>;

// Validation accuracy of one prompt over one category's items.
using AccuracyFn =
    std::function<double(const EnhancedPrompt& prompt, const std::vector<DatasetItem>& items)>;

struct HybridSelection {
    HybridPolicy policy;
    // category → variant → validation accuracy (absent = no prompt).
    std::map<std::string, std::map<VariantKind, double>> accuracies;
    std::vector<std::string> log_lines;  //   {category}: '{variant}' (acc: NN.N%)
    std::vector<std::string> warnings;
};

// Per-category argmax with incumbent 'concise' at accuracy 0 and
// strictly-greater replacement in concise → reasoning → specific order.
HybridSelection select_hybrid(const std::map<std::string, std::vector<DatasetItem>>& val_by_category,
                              const PromptTable& prompts, const AccuracyFn& accuracy);

// The per-item prompt each test item receives under the policy.
// Throws MissingPrompt when a selected variant has no prompt.
std::vector<const EnhancedPrompt*> apply_policy(const HybridPolicy& policy,
                                                const std::vector<DatasetItem>& test_items,
                                                const PromptTable& prompts);

std::map<std::string, std::vector<DatasetItem>> by_category(const std::vector<DatasetItem>& items);

std::string policy_to_text(const HybridPolicy& policy);
HybridPolicy policy_from_text(const std::string& text);

} // namespace mars
