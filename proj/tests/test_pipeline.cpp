#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mars/allocation.hpp"
#include "mars/errors.hpp"
#include "mars/pipeline.hpp"
#include "test_support.hpp"

using namespace mars;

namespace {

PipelineContext make_context(std::ostringstream& log,
                             std::optional<std::string> cache_dir = std::nullopt) {
    PipelineContext ctx;
    ctx.mock_script_path = test::data_path("e2e/mock_script.json");
    ctx.cache_dir = std::move(cache_dir);
    ctx.log = &log;
    ctx.initialize();
    return ctx;
}

std::string dataset_path() { return test::data_path("e2e/dataset.jsonl"); }
std::string base_prompt_path() { return test::data_path("e2e/base_prompt.txt"); }

std::vector<Enhancement> read_enhancements(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::vector<Enhancement> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(enhancement_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

// The fixture's baseline rules answer alg-07..10 and geo-06..10 correctly.
bool fixture_baseline_correct(const DatasetItem& item) {
    const int n = std::stoi(item.id.substr(4));
    return item.category == "algebra" ? n >= 7 : n >= 6;
}

} // namespace

TEST_CASE("category names sanitize to safe file stems") {
    CHECK(sanitize_category("algebra") == "algebra");
    CHECK(sanitize_category("mixed math") == "mixed_math");
    CHECK(sanitize_category("a/b:c") == "a_b_c");
    CHECK(sanitize_category("Algebra-2.x_y") == "Algebra-2.x_y");
    CHECK(sanitize_category("") == "uncategorized");
}

TEST_CASE("prompt files are read with trailing whitespace stripped") {
    test::TempDir tmp("mars-prompt");
    test::write_file(tmp.sub("p.txt"), "You are terse.\nAnswer briefly. \n\n");
    CHECK(read_prompt_file(tmp.sub("p.txt")) == "You are terse.\nAnswer briefly.");
    test::write_file(tmp.sub("blank.txt"), "\n \n");
    CHECK_THROWS_AS(read_prompt_file(tmp.sub("blank.txt")), ValidationError);
    CHECK_THROWS_AS(read_prompt_file(tmp.sub("absent.txt")), ValidationError);
}

TEST_CASE("prompt tables recover suffixes and tolerate missing variants") {
    test::TempDir tmp("mars-table");
    test::write_file(tmp.sub("algebra_concise.txt"), "BASE\n\n## GUIDANCE\nbody\n");
    test::write_file(tmp.sub("algebra_reasoning.txt"), "unrelated full text\n");

    PromptTable table = load_prompt_table(tmp.str(), "BASE", {"algebra", "geometry"});
    REQUIRE(table.count("algebra") == 1);
    CHECK(table.count("geometry") == 0);  // no files -> no entry
    const auto& variants = table.at("algebra");
    REQUIRE(variants.count(VariantKind::concise) == 1);
    CHECK(variants.at(VariantKind::concise).full_text == "BASE\n\n## GUIDANCE\nbody");
    CHECK(variants.at(VariantKind::concise).suffix == "## GUIDANCE\nbody");
    // A file that does not extend the base prompt still loads; it simply
    // carries no recoverable suffix.
    REQUIRE(variants.count(VariantKind::reasoning) == 1);
    CHECK(variants.at(VariantKind::reasoning).full_text == "unrelated full text");
    CHECK(variants.at(VariantKind::reasoning).suffix.empty());
    CHECK(variants.count(VariantKind::specific) == 0);
}

TEST_CASE("baseline run scores the corpus and saves its failures") {
    test::TempDir out("mars-baseline");
    std::ostringstream log;
    auto ctx = make_context(log);

    auto summary =
        cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), out.str());
    CHECK(summary.total == 20);
    CHECK(summary.failed == 11);
    CHECK(summary.mean_score == doctest::Approx(0.45));

    auto records = load_run_records(summary.results_path);
    REQUIRE(records.size() == 20);
    CHECK(records[0].strategy == "zero_shot");
    CHECK_FALSE(records[0].variant.has_value());
    CHECK(records[0].question_id == "alg-01");
    CHECK(records[0].score == 0.0);
    CHECK(records[6].question_id == "alg-07");
    CHECK(records[6].score == 1.0);

    auto failed = load_dataset(summary.failed_path, true);
    REQUIRE(failed.size() == 11);
    CHECK(failed.front().id == "alg-01");
    CHECK(failed.front().predicted == "A");
    CHECK(failed.front().reasoning ==
          "<reasoning>Baseline attempt 1.</reasoning>\n<answer>A</answer>");
    CHECK(failed.back().id == "geo-05");

    CHECK(log.str().find("baseline (zero_shot): 20 items") != std::string::npos);
    CHECK(ctx.ledger->grand_total().calls == 20);
}

TEST_CASE("diagnose, group, and synthesize chain over recorded failures") {
    test::TempDir out("mars-chain");
    std::ostringstream log;
    auto ctx = make_context(log);

    auto baseline =
        cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), out.str());

    auto diagnosed = cmd_diagnose(ctx, baseline.failed_path, "zero_shot", out.str());
    CHECK(diagnosed.analyses == 11);
    CHECK(diagnosed.skips == 0);

    auto grouped = cmd_group(ctx, diagnosed.analyses_path, out.str());
    CHECK(grouped.groups == 2);
    {
        std::ifstream in(grouped.groups_path);
        REQUIRE(in);
        std::string line;
        std::vector<TypeTopicGroup> groups;
        while (std::getline(in, line))
            if (!line.empty()) groups.push_back(group_from_json(nlohmann::json::parse(line)));
        REQUIRE(groups.size() == 2);
        // Largest cluster first: six algebra failures vs five geometry ones.
        CHECK(groups[0].key.to_string() == "calculation|algebra,equations");
        CHECK(groups[0].size() == 6);
        CHECK(groups[1].key.to_string() == "conceptual|geometry,proofs");
        CHECK(groups[1].size() == 5);
        CHECK(groups[0].root_causes ==
              std::set<std::string>{"sign handling while isolating the variable"});
    }

    auto synthesized = cmd_synthesize(ctx, grouped.groups_path, out.str());
    CHECK(synthesized.enhancements == 2);
    CHECK(synthesized.skips == 0);
    auto enhancements = read_enhancements(synthesized.enhancements_path);
    REQUIRE(enhancements.size() == 2);
    CHECK(enhancements[0].enhanced_prompt_addition ==
          "[plant-alg] Always isolate the variable before substituting values.");
    CHECK(enhancements[1].enhanced_prompt_addition ==
          "[plant-geo] Start from the triangle angle-sum property.");
}

TEST_CASE("diagnosing an empty failure file reports no failures") {
    test::TempDir out("mars-empty");
    test::write_file(out.sub("failed.jsonl"), "\n\n");
    std::ostringstream log;
    auto ctx = make_context(log);
    CHECK_THROWS_AS(cmd_diagnose(ctx, out.sub("failed.jsonl"), "zero_shot", out.str()),
                    NoFailures);
}

TEST_CASE("mock backend without a script is rejected up front") {
    test::TempDir out("mars-noscript");
    std::ostringstream log;
    PipelineContext ctx;
    ctx.log = &log;
    ctx.initialize();
    CHECK_THROWS_AS(
        cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), out.str()),
        ValidationError);
}

TEST_CASE("enhance renders per-category prompt files in all three formats") {
    test::TempDir stage("mars-stage");
    test::TempDir out("mars-enhance");
    std::ostringstream log;
    auto ctx = make_context(log);
    auto baseline =
        cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), stage.str());

    auto summary =
        cmd_enhance(ctx, baseline.failed_path, "zero_shot", base_prompt_path(), out.str());
    CHECK(summary.cycles_run == 1);
    REQUIRE(summary.prompt_paths.size() == 6);

    const std::string base = "You are a careful math tutor. Answer the question.";
    for (const char* name : {"algebra_concise.txt", "algebra_reasoning.txt",
                             "algebra_specific.txt", "geometry_concise.txt",
                             "geometry_reasoning.txt", "geometry_specific.txt"}) {
        const std::string text = test::read_file(out.sub(std::string("prompts/") + name));
        CHECK(text.substr(0, base.size() + 2) == base + "\n\n");
        CHECK(text.back() == '\n');
    }

    const std::string concise = test::read_file(out.sub("prompts/algebra_concise.txt"));
    CHECK(concise.find("## GUIDANCE FOR ALGEBRA\n") != std::string::npos);
    CHECK(concise.find("### Critical Warnings by Question Type:") != std::string::npos);
    // Guidance is shared: both clusters appear, biggest first.
    const auto alg_pos = concise.find("[plant-warn-alg]");
    const auto geo_pos = concise.find("[plant-warn-geo]");
    REQUIRE(alg_pos != std::string::npos);
    REQUIRE(geo_pos != std::string::npos);
    CHECK(alg_pos < geo_pos);
    CHECK(concise.find("**calculation (algebra/equations)** (6 failures):") !=
          std::string::npos);

    const std::string reasoning = test::read_file(out.sub("prompts/geometry_reasoning.txt"));
    CHECK(reasoning.find("### Key Considerations by Problem Type:") != std::string::npos);
    CHECK(reasoning.find("* calculation (algebra/equations): [plant-alg]") !=
          std::string::npos);

    const std::string specific = test::read_file(out.sub("prompts/algebra_specific.txt"));
    CHECK(specific.find("**conceptual - geometry & proofs**") != std::string::npos);
    CHECK(specific.find("Approach: Isolate, solve, then verify by substitution.") !=
          std::string::npos);

    SUBCASE("a variant subset renders only the requested kinds") {
        test::TempDir narrow("mars-narrow");
        auto one = cmd_enhance(ctx, baseline.failed_path, "zero_shot", base_prompt_path(),
                               narrow.str(), {VariantKind::reasoning});
        REQUIRE(one.prompt_paths.size() == 2);
        CHECK(test::read_file(narrow.sub("prompts/algebra_reasoning.txt"))
                  .find("### Key Considerations") != std::string::npos);
        CHECK_FALSE(std::ifstream(narrow.sub("prompts/algebra_concise.txt")).good());
    }
}

TEST_CASE("hybrid selection picks the winning variant per category") {
    test::TempDir stage("mars-stage");
    test::TempDir out("mars-hybrid");
    std::ostringstream log;
    auto ctx = make_context(log);
    auto baseline =
        cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), stage.str());
    cmd_enhance(ctx, baseline.failed_path, "zero_shot", base_prompt_path(), stage.str());

    auto summary = cmd_hybrid(ctx, dataset_path(), stage.sub("prompts"), base_prompt_path(),
                              "zero_shot", out.str());

    // The scripted model only answers algebra correctly under the reasoning
    // format and geometry under the concise one.
    CHECK(summary.policy.by_category.at("algebra") == VariantKind::reasoning);
    CHECK(summary.policy.by_category.at("geometry") == VariantKind::concise);
    CHECK(summary.hybrid_score == doctest::Approx(1.0));
    CHECK(summary.variant_scores.at(VariantKind::concise) == doctest::Approx(0.5));
    CHECK(summary.variant_scores.at(VariantKind::reasoning) == doctest::Approx(0.5));
    CHECK(summary.variant_scores.at(VariantKind::specific) == doctest::Approx(0.0));

    // The baseline arm matches the per-item script on whichever items the
    // deterministic split put in the test fold.
    auto split = split_dataset(load_dataset(dataset_path()), ctx.split_spec());
    REQUIRE(split.test.size() == 2);
    double correct = 0;
    for (const auto& item : split.test) correct += fixture_baseline_correct(item) ? 1 : 0;
    CHECK(summary.baseline_score == doctest::Approx(correct / split.test.size()));

    HybridPolicy reloaded = policy_from_text(test::read_file(summary.policy_path));
    CHECK(reloaded.by_category == summary.policy.by_category);

    const std::string report = test::read_file(summary.report_path);
    CHECK(report.find("baseline") != std::string::npos);
    CHECK(report.find("hybrid") != std::string::npos);
    CHECK(report.find("Selected variants (validation split):") != std::string::npos);
    CHECK(report.find("  algebra: 'reasoning' (acc: 100.0%)") != std::string::npos);
    CHECK(report.find("  geometry: 'concise' (acc: 100.0%)") != std::string::npos);
    CHECK(log.str().find("Hybrid selection (validation split):") != std::string::npos);

    const std::string csv = test::read_file(out.sub("test_report.csv"));
    CHECK(csv.rfind("arm,score,delta_vs_baseline\n", 0) == 0);
    CHECK(csv.find("\nhybrid,") != std::string::npos);

    for (const char* name :
         {"test_baseline_results.jsonl", "test_concise_results.jsonl",
          "test_reasoning_results.jsonl", "test_specific_results.jsonl",
          "hybrid_results.jsonl"}) {
        auto rows = load_run_records(out.sub(name));
        CHECK(rows.size() == 2);
    }
    auto hybrid_rows = load_run_records(out.sub("hybrid_results.jsonl"));
    for (const auto& row : hybrid_rows) {
        REQUIRE(row.variant.has_value());
        CHECK(*row.variant == (row.category == "algebra" ? VariantKind::reasoning
                                                         : VariantKind::concise));
        CHECK(row.score == 1.0);
    }
}

TEST_CASE("report aggregates runs and regresses gain against baseline") {
    test::TempDir out("mars-report");
    std::ostringstream log;
    auto ctx = make_context(log);

    std::vector<RunRecord> base_rows, concise_rows;
    auto add = [](std::vector<RunRecord>& rows, const std::string& cat,
                  std::optional<VariantKind> variant, std::initializer_list<double> scores) {
        for (double s : scores) {
            RunRecord r;
            r.strategy = "zero_shot";
            r.variant = variant;
            r.question_id = cat + "-" + std::to_string(rows.size());
            r.category = cat;
            r.score = s;
            r.prompt_tokens = 10;
            r.completion_tokens = 5;
            r.cost_usd = 0.00001;
            rows.push_back(r);
        }
    };
    // c1: baseline 50% -> concise 75% (gain +50%); c2: baseline 80% -> 80% (0%).
    add(base_rows, "c1", std::nullopt, {0, 0, 1, 1});
    add(base_rows, "c2", std::nullopt, {1, 1, 1, 1, 0});
    add(concise_rows, "c1", VariantKind::concise, {1, 1, 1, 0});
    add(concise_rows, "c2", VariantKind::concise, {1, 1, 1, 1, 0});
    save_run_records(out.sub("base.jsonl"), base_rows);
    save_run_records(out.sub("concise.jsonl"), concise_rows);

    auto summary =
        cmd_report(ctx, {out.sub("base.jsonl"), out.sub("concise.jsonl")}, out.str());
    REQUIRE(summary.points.size() == 2);
    CHECK(summary.points[0].category == "c1");
    CHECK(summary.points[0].baseline_pct == doctest::Approx(50.0));
    CHECK(summary.points[0].gain_pct == doctest::Approx(50.0));
    CHECK(summary.points[1].category == "c2");
    CHECK(summary.points[1].gain_pct == doctest::Approx(0.0));
    // Lower baseline, bigger gain: a perfectly inverse relation on two points.
    CHECK(summary.spearman_rho == doctest::Approx(-1.0));
    CHECK(summary.fit_r_squared == doctest::Approx(1.0));

    const std::string text = test::read_file(summary.summary_path);
    CHECK(text.find("Spearman rho (baseline vs gain):") != std::string::npos);
    CHECK(text.find("zero_shot") != std::string::npos);
    CHECK(text.find("c1") != std::string::npos);  // per-category gains live here
    const std::string csv = test::read_file(summary.csv_path);
    CHECK(csv.rfind("strategy,variant,items,score,", 0) == 0);
    CHECK(csv.find("zero_shot,concise,") != std::string::npos);

    SUBCASE("a single gain point is not enough to regress") {
        test::TempDir solo("mars-solo");
        save_run_records(solo.sub("base.jsonl"),
                         {base_rows.begin(), base_rows.begin() + 4});
        save_run_records(solo.sub("concise.jsonl"),
                         {concise_rows.begin(), concise_rows.begin() + 4});
        CHECK_THROWS_AS(
            cmd_report(ctx, {solo.sub("base.jsonl"), solo.sub("concise.jsonl")}, solo.str()),
            InsufficientData);
    }
}

TEST_CASE("a shared cache makes reruns byte-identical") {
    test::TempDir cache("mars-cache");
    auto run_once = [&](const std::string& root) {
        std::ostringstream log;
        auto ctx = make_context(log, cache.str());
        auto baseline =
            cmd_run_baseline(ctx, dataset_path(), "zero_shot", base_prompt_path(), root);
        cmd_enhance(ctx, baseline.failed_path, "zero_shot", base_prompt_path(), root);
        cmd_hybrid(ctx, dataset_path(), root + "/prompts", base_prompt_path(), "zero_shot",
                   root);
        return ctx.ledger->grand_total().calls;
    };

    test::TempDir cold("mars-cold");
    test::TempDir warm("mars-warm");
    const long long cold_calls = run_once(cold.str());
    const long long warm_calls = run_once(warm.str());
    CHECK(cold_calls > 0);
    CHECK(warm_calls == 0);  // everything replayed from cache

    for (const char* rel :
         {"baseline_results.jsonl", "failed.jsonl", "analyses.jsonl", "groups.jsonl",
          "enhancements.jsonl", "prompts/algebra_concise.txt",
          "prompts/geometry_reasoning.txt", "policy.txt", "hybrid_results.jsonl",
          "test_report.txt"}) {
        CHECK_MESSAGE(test::read_file(cold.sub(rel)) == test::read_file(warm.sub(rel)), rel);
    }
}
