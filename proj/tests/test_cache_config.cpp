#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "mars/cache.hpp"
#include "mars/config.hpp"
#include "mars/dataset.hpp"
#include "mars/errors.hpp"
#include "test_support.hpp"

using namespace mars;

TEST_CASE("sha256 reference vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("cache keys respond to every request dimension") {
    ModelHandle handle;
    Messages messages{{"user", "hello"}};
    ChatParams params;
    const std::string base = ResponseCache::key_for(handle, messages, params);
    CHECK(base == ResponseCache::key_for(handle, messages, params));

    ModelHandle other_model = handle;
    other_model.model_name = "different";
    CHECK(ResponseCache::key_for(other_model, messages, params) != base);

    ModelHandle other_backend = handle;
    other_backend.backend = handle.backend == Backend::mock ? Backend::http : Backend::mock;
    CHECK(ResponseCache::key_for(other_backend, messages, params) != base);

    ChatParams hot = params;
    hot.temperature = 0.7;
    CHECK(ResponseCache::key_for(handle, messages, hot) != base);

    ChatParams longer = params;
    longer.max_tokens = params.max_tokens + 1;
    CHECK(ResponseCache::key_for(handle, messages, longer) != base);

    ChatParams salted = params;
    salted.cache_salt = "sc-1";
    CHECK(ResponseCache::key_for(handle, messages, salted) != base);

    Messages more = messages;
    more.push_back({"user", "again"});
    CHECK(ResponseCache::key_for(handle, more, params) != base);

    // Price/role changes must NOT shift the key: they don't alter the request.
    ModelHandle repriced = handle;
    repriced.price_per_1k_input *= 2;
    repriced.role = "synthesizer";
    CHECK(ResponseCache::key_for(repriced, messages, params) == base);
}

TEST_CASE("response cache stores and replays results") {
    test::TempDir tmp("mars-cache");
    ResponseCache cache(tmp.str());

    ChatResult result;
    result.text = "cached text";
    result.usage = {12, 34};
    result.cost_usd = 0.000123;

    CHECK_FALSE(cache.lookup("deadbeef").has_value());
    cache.store("deadbeef", result);
    auto hit = cache.lookup("deadbeef");
    REQUIRE(hit.has_value());
    CHECK(hit->text == "cached text");
    CHECK(hit->usage.prompt_tokens == 12);
    CHECK(hit->usage.completion_tokens == 34);
    CHECK(hit->from_cache);

    SUBCASE("corrupt entries read as misses") {
        test::write_file(tmp.sub("deadbeef.json"), "{not json");
        CHECK_FALSE(cache.lookup("deadbeef").has_value());
    }
}

TEST_CASE("cached client passes misses through and serves hits silently") {
    test::TempDir tmp("mars-cache");
    auto ledger = std::make_shared<CostLedger>();
    MockScript script;
    script.rules.push_back({{"q"}, {"reply one two"}, false});
    ModelHandle handle;
    auto inner = std::make_unique<MockClient>(handle, script, ledger);
    CachedClient client(std::move(inner), std::make_shared<ResponseCache>(tmp.str()));

    Messages messages{{"user", "q"}};
    auto first = client.chat(messages, {});
    CHECK_FALSE(first.from_cache);
    CHECK(ledger->grand_total().calls == 1);

    auto second = client.chat(messages, {});
    CHECK(second.from_cache);
    CHECK(second.text == first.text);
    // The hit recomputes cost from stored usage instead of re-billing.
    CHECK(second.cost_usd == first.cost_usd);
    CHECK(ledger->grand_total().calls == 1);

    // A salted retry is a distinct request: it reaches the inner client.
    ChatParams salted;
    salted.cache_salt = "retry-1";
    auto third = client.chat(messages, salted);
    CHECK_FALSE(third.from_cache);
    CHECK(ledger->grand_total().calls == 2);
}

TEST_CASE("default config binds the three roles") {
    Config config = load_config(std::nullopt);
    CHECK(config.analyzer.role == "analyzer");
    CHECK(config.synthesizer.role == "synthesizer");
    CHECK(config.evaluator.role == "evaluator");
    CHECK(config.evaluator.model_name == "gpt-3.5-turbo");
    CHECK(config.evaluator.price_per_1k_input == 0.0005);
    CHECK(config.evaluator.price_per_1k_output == 0.0015);
    CHECK(config.evaluator.timeout_seconds == 30);
    CHECK(config.strategy.sc_samples == 5);
    CHECK(config.strategy.sc_temperature == 0.7);
    CHECK(config.split.train_ratio == 0.8);
    CHECK(config.split.val_ratio == 0.1);
    CHECK(config.split.test_ratio == 0.1);
}

TEST_CASE("config file overrides defaults and rejects unknown keys") {
    test::TempDir tmp("mars-config");
    test::write_file(tmp.sub("good.json"), R"({
        "models": {
            "analyzer": {"backend": "http", "model": "gpt-4o-mini",
                          "endpoint": "http://example.test/v1", "api_key": "k",
                          "price_per_1k_input": 0.00015, "price_per_1k_output": 0.0006,
                          "timeout_seconds": 10, "max_retries": 1}
        },
        "strategy": {"temperature": 0.2, "sc_samples": 7, "score": "token_f1",
                      "demonstrations": [{"question": "q", "reasoning": "r", "answer": "a"}]},
        "split": {"train": 0.6, "val": 0.2, "test": 0.2, "seed": 11}
    })");
    Config config = load_config(tmp.sub("good.json"));
    CHECK(config.analyzer.backend == Backend::http);
    CHECK(config.analyzer.model_name == "gpt-4o-mini");
    CHECK(config.analyzer.timeout_seconds == 10);
    CHECK(config.evaluator.model_name == "gpt-3.5-turbo");  // untouched role
    CHECK(config.strategy.sc_samples == 7);
    CHECK(config.strategy.score_mode == ScoreMode::token_f1);
    REQUIRE(config.strategy.demonstrations.size() == 1);
    CHECK(config.strategy.demonstrations[0].answer == "a");
    CHECK(config.split.seed == 11);

    test::write_file(tmp.sub("typo.json"), R"({"modles": {}})");
    CHECK_THROWS_AS(load_config(tmp.sub("typo.json")), ValidationError);
    test::write_file(tmp.sub("nested_typo.json"),
                     R"({"models": {"analyzer": {"modle": "x"}}})");
    CHECK_THROWS_AS(load_config(tmp.sub("nested_typo.json")), ValidationError);
    test::write_file(tmp.sub("bad_sc.json"), R"({"strategy": {"sc_samples": 0}})");
    CHECK_THROWS_AS(load_config(tmp.sub("bad_sc.json")), ValidationError);
    test::write_file(tmp.sub("not_json.json"), "hello");
    CHECK_THROWS_AS(load_config(tmp.sub("not_json.json")), ValidationError);
    CHECK_THROWS_AS(load_config(tmp.sub("absent.json")), ValidationError);
}

TEST_CASE("environment variables override endpoint and key for every role") {
    setenv("MARS_API_BASE", "http://proxy.test/v1", 1);
    setenv("MARS_API_KEY", "sekret", 1);
    Config config = load_config(std::nullopt);
    unsetenv("MARS_API_BASE");
    unsetenv("MARS_API_KEY");

    for (const ModelHandle* h : {&config.analyzer, &config.synthesizer, &config.evaluator}) {
        CHECK(h->endpoint == "http://proxy.test/v1");
        CHECK(h->api_key == "sekret");
    }
}

TEST_CASE("dataset loading validates records") {
    test::TempDir tmp("mars-dataset");

    test::write_file(tmp.sub("good.jsonl"),
                     R"({"id": "a", "question": "q1", "answer": "1", "category": "c"})"
                     "\n\n"
                     R"({"id": "b", "question": "q2", "options": ["x", "y"], "answer": "y", "category": "c"})"
                     "\n");
    auto items = load_dataset(tmp.sub("good.jsonl"));
    REQUIRE(items.size() == 2);
    CHECK(items[1].options == std::vector<std::string>{"x", "y"});

    test::write_file(tmp.sub("dup.jsonl"),
                     R"({"id": "a", "question": "q", "answer": "1", "category": "c"})"
                     "\n"
                     R"({"id": "a", "question": "q", "answer": "1", "category": "c"})"
                     "\n");
    CHECK_THROWS_AS(load_dataset(tmp.sub("dup.jsonl")), ValidationError);

    test::write_file(tmp.sub("noanswer.jsonl"),
                     R"({"id": "a", "question": "q", "answer": "", "category": "c"})" "\n");
    CHECK_THROWS_AS(load_dataset(tmp.sub("noanswer.jsonl")), ValidationError);

    test::write_file(tmp.sub("broken.jsonl"), "{oops\n");
    try {
        load_dataset(tmp.sub("broken.jsonl"));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        // Errors carry file:line so a bad corpus row is findable.
        CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }

    test::write_file(tmp.sub("empty.jsonl"), "\n\n");
    CHECK_THROWS_AS(load_dataset(tmp.sub("empty.jsonl")), EmptyDataset);
    CHECK_THROWS_AS(load_dataset(tmp.sub("missing.jsonl")), ValidationError);

    SUBCASE("prediction expectations") {
        test::write_file(tmp.sub("nopred.jsonl"),
                         R"({"id": "a", "question": "q", "answer": "1", "category": "c"})" "\n");
        CHECK_THROWS_AS(load_dataset(tmp.sub("nopred.jsonl"), true), ValidationError);
        test::write_file(
            tmp.sub("pred.jsonl"),
            R"({"id": "a", "question": "q", "answer": "1", "category": "c", "predicted": "2", "reasoning": "guessed"})"
            "\n");
        auto failed = load_dataset(tmp.sub("pred.jsonl"), true);
        CHECK(failed[0].predicted == "2");
        CHECK(failed[0].reasoning == "guessed");
    }
}

TEST_CASE("dataset save/load round-trip with predictions") {
    test::TempDir tmp("mars-dataset");
    DatasetItem item;
    item.id = "r1";
    item.question = "q";
    item.options = {"o1", "o2"};
    item.answer = "o2";
    item.category = "cat";
    item.predicted = "o1";
    item.reasoning = "because";

    save_dataset(tmp.sub("out.jsonl"), {item}, true);
    auto back = load_dataset(tmp.sub("out.jsonl"), true);
    REQUIRE(back.size() == 1);
    CHECK(back[0].predicted == "o1");
    CHECK(back[0].reasoning == "because");

    save_dataset(tmp.sub("plain.jsonl"), {item}, false);
    auto plain = load_dataset(tmp.sub("plain.jsonl"));
    CHECK(plain[0].predicted.empty());

    FailureRecord record = to_failure_record(back[0]);
    CHECK(record.question_id == "r1");
    CHECK(record.gold_answer == "o2");
    CHECK(record.predicted_answer == "o1");
    CHECK(record.reasoning_trace == "because");
    CHECK(record.category == "cat");
}
