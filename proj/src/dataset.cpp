#include "mars/dataset.hpp"

#include <fstream>
#include <set>

#include "mars/errors.hpp"
#include "mars/text.hpp"

namespace mars {

nlohmann::json item_to_json(const DatasetItem& item, bool with_predictions) {
    nlohmann::json j{{"id", item.id},
                     {"question", item.question},
                     {"answer", item.answer},
                     {"category", item.category}};
    if (!item.options.empty()) j["options"] = item.options;
    if (with_predictions) {
        j["predicted"] = item.predicted;
        j["reasoning"] = item.reasoning;
    }
    return j;
}

DatasetItem item_from_json(const nlohmann::json& j) {
    DatasetItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    if (j.contains("options")) item.options = j.at("options").get<std::vector<std::string>>();
    item.answer = j.at("answer").get<std::string>();
    item.category = j.at("category").get<std::string>();
    item.predicted = j.value("predicted", "");
    item.reasoning = j.value("reasoning", "");
    return item;
}

std::vector<DatasetItem> load_dataset(const std::string& path, bool expect_predictions) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset file: " + path);

    std::vector<DatasetItem> items;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ValidationError(where + ": line is not valid JSON");
        DatasetItem item;
        try {
            item = item_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": " + e.what());
        }
        if (item.id.empty()) throw ValidationError(where + ": id must be non-empty");
        if (!seen_ids.insert(item.id).second)
            throw ValidationError(where + ": duplicate id '" + item.id + "'");
        if (item.answer.empty()) throw ValidationError(where + ": answer must be non-empty");
        if (item.category.empty()) throw ValidationError(where + ": category must be non-empty");
        if (expect_predictions && !j.contains("predicted"))
            throw ValidationError(where + ": failed-run file is missing 'predicted'");
        items.push_back(std::move(item));
    }
    if (items.empty()) throw EmptyDataset("dataset file has no records: " + path);
    return items;
}

void save_dataset(const std::string& path, const std::vector<DatasetItem>& items,
                  bool with_predictions) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write dataset file: " + path);
    for (const auto& item : items) out << item_to_json(item, with_predictions).dump() << "\n";
}

FailureRecord to_failure_record(const DatasetItem& item) {
    return FailureRecord{.question_id = item.id,
                         .question_text = item.question,
                         .options = item.options,
                         .gold_answer = item.answer,
                         .predicted_answer = item.predicted,
                         .reasoning_trace = item.reasoning,
                         .category = item.category};
}

} // namespace mars
