#include "mars/allocation.hpp"

#include <algorithm>
#include <map>

#include "mars/errors.hpp"

namespace mars {

TypeTopicGroup build_error_profile(const std::vector<FailureAnalysis>& analyses) {
    if (analyses.empty()) throw EmptyInput("cannot build an error profile from zero analyses");
    TypeTopicGroup group{make_key(analyses.front()), {}, {}, {}, {}, {}};
    for (const auto& a : analyses) {
        if (make_key(a) != group.key) {
            throw MixedKeys("analysis " + a.question_id + " has key " + make_key(a).to_string() +
                            ", expected " + group.key.to_string());
        }
        group.error_types.insert(a.error_type);
        group.root_causes.insert(a.root_cause);
        group.required_knowledge.insert(a.requires_knowledge.begin(), a.requires_knowledge.end());
        group.difficulty_factors.insert(a.difficulty_factors.begin(), a.difficulty_factors.end());
        group.analyses.push_back(a);
    }
    return group;
}

std::vector<TypeTopicGroup> group_by_type_topic(const std::vector<FailureAnalysis>& analyses) {
    if (analyses.empty()) throw EmptyInput("group_by_type_topic requires at least one analysis");

    // std::map keys on TypeTopicKey's ordering; members keep input order.
    std::map<TypeTopicKey, std::vector<FailureAnalysis>> buckets;
    for (const auto& a : analyses) buckets[make_key(a)].push_back(a);

    std::vector<TypeTopicGroup> groups;
    groups.reserve(buckets.size());
    for (auto& [key, members] : buckets) groups.push_back(build_error_profile(members));

    std::stable_sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.key.to_string() < b.key.to_string();
    });
    return groups;
}

nlohmann::json analysis_to_json(const FailureAnalysis& a) {
    return {{"question_id", a.question_id},
            {"question_type", question_type_name(a.question_type)},
            {"topics", a.topics},
            {"error_type", error_type_name(a.error_type)},
            {"root_cause", a.root_cause},
            {"specific_mistake", a.specific_mistake},
            {"requires_knowledge", a.requires_knowledge},
            {"difficulty_factors", a.difficulty_factors}};
}

FailureAnalysis analysis_from_json(const nlohmann::json& j) {
    FailureAnalysis a;
    a.question_id = j.at("question_id").get<std::string>();
    a.question_type = parse_question_type(j.at("question_type").get<std::string>());
    a.topics = j.at("topics").get<std::vector<std::string>>();
    a.error_type = parse_error_type(j.at("error_type").get<std::string>());
    a.root_cause = j.value("root_cause", "");
    a.specific_mistake = j.value("specific_mistake", "");
    a.requires_knowledge = j.value("requires_knowledge", std::vector<std::string>{});
    a.difficulty_factors = j.value("difficulty_factors", std::vector<std::string>{});
    return a;
}

nlohmann::json group_to_json(const TypeTopicGroup& g) {
    nlohmann::json j{{"key", g.key.to_string()},
                     {"question_type", question_type_name(g.key.question_type())},
                     {"topics", g.key.topic_set()},
                     {"size", g.size()}};
    j["error_types"] = nlohmann::json::array();
    for (auto e : g.error_types) j["error_types"].push_back(error_type_name(e));
    j["root_causes"] = std::vector<std::string>(g.root_causes.begin(), g.root_causes.end());
    j["required_knowledge"] =
        std::vector<std::string>(g.required_knowledge.begin(), g.required_knowledge.end());
    j["difficulty_factors"] =
        std::vector<std::string>(g.difficulty_factors.begin(), g.difficulty_factors.end());
    j["analyses"] = nlohmann::json::array();
    for (const auto& a : g.analyses) j["analyses"].push_back(analysis_to_json(a));
    return j;
}

TypeTopicGroup group_from_json(const nlohmann::json& j) {
    std::vector<FailureAnalysis> members;
    for (const auto& aj : j.at("analyses")) members.push_back(analysis_from_json(aj));
    return build_error_profile(members);
}

} // namespace mars
