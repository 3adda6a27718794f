#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mars/taxonomy.hpp"

namespace mars {

// One benchmark item. `predicted`/`reasoning` are populated only in
// failed-run files produced by run-baseline.
struct DatasetItem {
    std::string id;
    std::string question;
    std::vector<std::string> options;  // empty for free-form answers
    std::string answer;
    std::string category;
    std::string predicted;
    std::string reasoning;
};

nlohmann::json item_to_json(const DatasetItem& item, bool with_predictions);
DatasetItem item_from_json(const nlohmann::json& j);

// Line-delimited JSON. Validates that every line parses, ids are unique,
// answers are non-empty, and categories are present; `expect_predictions`
// additionally requires the failed-run fields. Throws ValidationError.
std::vector<DatasetItem> load_dataset(const std::string& path, bool expect_predictions = false);
void save_dataset(const std::string& path, const std::vector<DatasetItem>& items,
                  bool with_predictions);

FailureRecord to_failure_record(const DatasetItem& item);

} // namespace mars
