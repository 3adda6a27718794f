#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "mars/taxonomy.hpp"

namespace mars {

// Aggregate analyses that share one type-topic key into a group with its
// error profile. Throws MixedKeys when the inputs disagree.
TypeTopicGroup build_error_profile(const std::vector<FailureAnalysis>& analyses);

// Phase 2: partition analyses by type-topic key. Output is sorted by
// descending group size, ties by lexicographic key string.
std::vector<TypeTopicGroup> group_by_type_topic(const std::vector<FailureAnalysis>& analyses);

nlohmann::json analysis_to_json(const FailureAnalysis& a);
FailureAnalysis analysis_from_json(const nlohmann::json& j);

// Groups serialize with their full member analyses so later phases can be
// run from the file alone; the profile fields are recomputed on load.
nlohmann::json group_to_json(const TypeTopicGroup& g);
TypeTopicGroup group_from_json(const nlohmann::json& j);

} // namespace mars
