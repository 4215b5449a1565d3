// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Fully offline: every model
// call goes through the scripted mock backend or a callback fixture.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "halogen/agreement.hpp"
#include "halogen/aggregator.hpp"
#include "halogen/evaluator.hpp"
#include "halogen/optimizer.hpp"
#include "halogen/pipeline.hpp"
#include "test_support.hpp"

using namespace halogen;

namespace {

struct Criterion {
    int number;
    std::string title;
    std::function<void(std::vector<std::string>&)> run; // push failure details
};

void expect(std::vector<std::string>& failures, bool ok, const std::string& detail) {
    if (!ok) failures.push_back(detail);
}

MetaRecord synthetic_meta(const std::string& id, bool distinct_responses) {
    MetaRecord m = test_support::make_verified_record(id);
    if (!distinct_responses) m.hallucinated_responses[2] = m.hallucinated_responses[0];
    return m;
}

// ---------------------------------------------------------------------------
// 1. End-to-end fixture run
// ---------------------------------------------------------------------------

void criterion_end_to_end(std::vector<std::string>& failures) {
    test_support::TempDir tmp;
    const auto config_path = test_support::assets_dir() / "fixtures" / "e2e" / "config.json";

    const auto t0 = std::chrono::steady_clock::now();
    PipelineConfig cfg1 = PipelineConfig::load(config_path);
    cfg1.out_dir = tmp / "out1";
    PipelineContext ctx1(cfg1);
    run_pipeline(ctx1);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(failures, seconds < 10.0, "pipeline took " + std::to_string(seconds) + "s (budget 10s)");

    std::vector<MetaRecord> verified = load_meta_records(ctx1.verified_path());
    expect(failures, verified.size() >= 5,
           "expected >= 5 verified records, got " + std::to_string(verified.size()));

    Benchmark bench = load_benchmark(cfg1.out_dir);
    expect(failures, bench.stats().generative > 0 && bench.stats().single_choice > 0 &&
                         bench.stats().true_false > 0,
           "benchmark missing a format");
    expect(failures, bench.stats().true_false == 2 * bench.stats().generative,
           "tf count != 2x generative");

    PipelineConfig cfg2 = PipelineConfig::load(config_path);
    cfg2.out_dir = tmp / "out2";
    PipelineContext ctx2(cfg2);
    run_pipeline(ctx2);

    const std::vector<std::string> artifacts = {
        "optimization_trace.json", "meta_records.jsonl",       "verified.jsonl",
        "rejected.jsonl",          "feedback.jsonl",           "benchmark_generative.jsonl",
        "benchmark_choice.jsonl",  "benchmark_tf.jsonl",       "stats.json",
    };
    for (const std::string& name : artifacts) {
        const std::string a = jsonl::read_text(cfg1.out_dir / name);
        const std::string b = jsonl::read_text(cfg2.out_dir / name);
        expect(failures, a == b, "artifact differs across identical runs: " + name);
    }
}

// ---------------------------------------------------------------------------
// 2. Optimizer trajectory replay
// ---------------------------------------------------------------------------

void criterion_optimizer_trajectory(std::vector<std::string>& failures) {
    const std::vector<ValidationReport> by_version = {
        {0.9750, 0.8800, 0.7100, 0.6250, 80},
        {0.9710, 0.9565, 0.8551, 0.8116, 69},
        {0.9855, 0.9855, 0.8841, 0.8841, 69},
        {0.9538, 0.9231, 0.8785, 0.8615, 65},
    };
    OptimizerHooks hooks;
    hooks.score = [&](const StagePrompts& p) {
        return by_version.at(static_cast<std::size_t>(p.max_version()));
    };
    hooks.gather_feedback = [](const StagePrompts&) { return std::vector<RejectionFeedback>{}; };
    hooks.propose = [](const PromptTemplate& current, const std::vector<RejectionFeedback>&, int n) {
        return std::vector<PromptTemplate>(static_cast<std::size_t>(n), current);
    };

    PromptTemplate base;
    base.instruction = "指令";
    base.rules = {"规则"};
    StagePrompts init{base, base, base};
    init.qa_gen.stage = PromptStage::QaGen;
    init.halu_gen.stage = PromptStage::HaluGen;
    init.label_gen.stage = PromptStage::LabelGen;

    StagePrompts selected;
    OptimizationTrace trace = optimize(init, hooks, {.max_iters = 5, .n_candidates = 4}, &selected);

    expect(failures, trace.selected_version == 2,
           "selected version " + std::to_string(trace.selected_version) + ", expected 2");
    expect(failures, trace.stop_reason == StopReason::EarlyStop, "expected EarlyStop");
    const int rounds_run = static_cast<int>(trace.iterations.size()) - 1;
    expect(failures, rounds_run == 3, "expected 3 rounds run, got " + std::to_string(rounds_run));
    expect(failures, rounds_run < 5, "early stop must trigger before the max of 5");
    expect(failures,
           trace.iterations[0].report.corr_rate == 0.9750 &&
               trace.iterations[0].report.halu_rate == 0.8800 &&
               trace.iterations[0].report.label_rate == 0.7100 &&
               trace.iterations[0].report.overall_rate == 0.6250,
           "iteration-0 report does not match (97.50/88.00/71.00/62.50) exactly");
    expect(failures, selected.qa_gen.version == 2, "selected prompts are not the iteration-2 set");
}

// ---------------------------------------------------------------------------
// 3. Aggregation invariants on 1,000 synthetic metas
// ---------------------------------------------------------------------------

void criterion_aggregation_invariants(std::vector<std::string>& failures) {
    std::vector<MetaRecord> metas;
    std::size_t n_distinct = 0;
    rng::Engine eng = rng::make_engine(11);
    for (int i = 0; i < 1000; ++i) {
        const bool distinct = rng::bounded(eng, 10) < 7;
        n_distinct += distinct ? 1 : 0;
        metas.push_back(synthetic_meta("syn" + std::to_string(i), distinct));
    }

    Benchmark bench = aggregate(metas, 123);
    BenchmarkStats stats = bench.stats();
    expect(failures, stats.generative == 1000, "generative count != 1000");
    expect(failures, stats.true_false == 2000, "tf count != 2 x generative");
    expect(failures, stats.single_choice == n_distinct,
           "choice count " + std::to_string(stats.single_choice) + " != metas with distinct responses " +
               std::to_string(n_distinct));

    std::unordered_map<std::string, const MetaRecord*> by_id;
    for (const MetaRecord& m : metas) by_id[m.id] = &m;
    for (const BenchmarkItem& item : bench.single_choice) {
        const auto& payload = std::get<ChoicePayload>(item.payload);
        std::set<std::string> options(payload.options.begin(), payload.options.end());
        expect(failures, options.size() == 4, "choice item with non-distinct options: " + item.item_id);
        const MetaRecord* meta = by_id.at(item.meta_id);
        int gold = 0;
        for (std::size_t i = 0; i < payload.options.size(); ++i) {
            if (payload.options[i] == meta->correct_answer) {
                ++gold;
                if (static_cast<int>(i) != payload.answer_index) {
                    failures.push_back("answer_index does not point at the gold option: " + item.item_id);
                }
            }
        }
        expect(failures, gold == 1, "choice item without exactly one gold option: " + item.item_id);
    }

    // answer_index uniformity: chi-square over 10,000 seeds, 95% confidence, df=3
    MetaRecord probe = synthetic_meta("probe", true);
    std::array<int, 4> counts{};
    const int n = 10000;
    for (int seed = 0; seed < n; ++seed) {
        auto item = to_single_choice(probe, static_cast<std::uint64_t>(seed));
        counts[static_cast<std::size_t>(std::get<ChoicePayload>(item->payload).answer_index)] += 1;
    }
    const double expected = n / 4.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    expect(failures, chi2 < 7.814727903,
           "chi-square " + std::to_string(chi2) + " exceeds the 95% bound 7.8147");
}

// ---------------------------------------------------------------------------
// 4. Metrics accounting
// ---------------------------------------------------------------------------

void criterion_metrics_accounting(std::vector<std::string>& failures) {
    Benchmark bench;
    ResponseLog log;
    std::vector<JudgedGenerative> judged;

    // generative: 2517 / 10000 hallucinated (judged directly)
    for (int i = 0; i < 10000; ++i) {
        const std::string id = "g" + std::to_string(i) + ":gen";
        BenchmarkItem item;
        item.item_id = id;
        item.meta_id = "g" + std::to_string(i);
        item.topic = Topic::make(Topic::Kind::Culture);
        item.primary_label = HallucinationType::EntErr;
        item.payload = GenerativePayload{"问？", "标准答案"};
        bench.generative.push_back(std::move(item));
        ResponseEntry e;
        e.item_id = id;
        e.model = "synthetic";
        e.text = i < 2517 ? "别的内容" : "标准答案";
        log.push_back(e);
        judged.push_back({id, i < 2517 ? GenerativeJudge::Verdict::Conflict
                                       : GenerativeJudge::Verdict::NoConflict});
    }
    // single choice: 1040 / 10000 hallucinated
    for (int i = 0; i < 10000; ++i) {
        const std::string id = "c" + std::to_string(i) + ":choice";
        BenchmarkItem item;
        item.item_id = id;
        item.meta_id = "c" + std::to_string(i);
        item.topic = Topic::make(Topic::Kind::Culture);
        item.primary_label = HallucinationType::EntErr;
        ChoicePayload payload;
        payload.question_text = "选？";
        payload.options = {"甲", "乙", "丙", "丁"};
        payload.answer_index = 0;
        item.payload = payload;
        bench.single_choice.push_back(std::move(item));
        ResponseEntry e;
        e.item_id = id;
        e.model = "synthetic";
        e.text = i < 1040 ? "B" : "A";
        log.push_back(e);
    }
    // true/false: 10000 true + 10000 false items; 1000 FP + 1860 FN = 2860 errors
    for (int i = 0; i < 20000; ++i) {
        const bool truth = i < 10000;
        const std::string id = "t" + std::to_string(i) + ":tf";
        BenchmarkItem item;
        item.item_id = id;
        item.meta_id = "t" + std::to_string(i);
        item.topic = Topic::make(Topic::Kind::Culture);
        item.primary_label = HallucinationType::EntErr;
        TrueFalsePayload payload;
        payload.statement_question = "判断对错：陈述。";
        payload.truth = truth;
        payload.source = truth ? TfSource::FromCorrect : TfSource::FromHallucinated;
        if (!truth) payload.source_index = 0;
        item.payload = payload;
        bench.true_false.push_back(std::move(item));
        ResponseEntry e;
        e.item_id = id;
        e.model = "synthetic";
        const bool wrong = truth ? i < 1000 : i < 10000 + 1860;
        e.text = (truth != wrong) ? "正确" : "错误"; // says true unless flipping makes it wrong
        log.push_back(e);
    }

    EvalReport report = compute_metrics(bench, log, judged);
    expect(failures, report.generative.hallucinated == 2517, "generative hallucinated != 2517");
    expect(failures, report.single_choice.hallucinated == 1040, "choice hallucinated != 1040");
    expect(failures, report.true_false.hallucinated == 2860, "tf hallucinated != 2860");
    expect(failures, report.generative.scored == 10000 && report.single_choice.scored == 10000 &&
                         report.true_false.scored == 20000,
           "denominators are not exactly 10000/10000/20000");

    // per-format rates are exactly 25.17% / 10.40% / 14.30%; the unweighted
    // mean is 16.6233...%, i.e. 16.62% at two decimals (not 16.53%).
    const double overall_pct = *report.overall_rate * 100.0;
    expect(failures, std::abs(overall_pct - 16.62) <= 0.01,
           "overall " + std::to_string(overall_pct) + "% not within 16.62% +- 0.01");
    expect(failures, std::abs(overall_pct - 16.53) > 0.05,
           "overall unexpectedly matches the 16.53% figure the mean contract cannot produce");

    expect(failures, report.fn_count == 1860 && report.fp_count == 1000,
           "fn/fp decomposition != 1860/1000");
    expect(failures, report.fn_count + report.fp_count == report.true_false.hallucinated,
           "fn_count + fp_count != total tf errors");
}

// ---------------------------------------------------------------------------
// 5. Krippendorff's alpha against the brute-force oracle
// ---------------------------------------------------------------------------

std::optional<double> alpha_oracle(const AnnotationMatrix& matrix) {
    std::vector<std::vector<std::string>> units;
    std::vector<std::string> pool;
    for (const auto& [unit, row] : matrix.values) {
        if (row.size() < 2) continue;
        std::vector<std::string> values;
        for (const auto& [rater, label] : row) values.push_back(label);
        for (const std::string& v : values) pool.push_back(v);
        units.push_back(std::move(values));
    }
    const std::size_t n = pool.size();
    if (n < 2) return std::nullopt;
    double observed = 0.0;
    for (const auto& values : units) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            for (std::size_t j = 0; j < values.size(); ++j) {
                if (i != j && values[i] != values[j]) {
                    observed += 1.0 / (static_cast<double>(values.size()) - 1.0);
                }
            }
        }
    }
    const double d_o = observed / static_cast<double>(n);
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && pool[i] != pool[j]) expected += 1.0;
        }
    }
    const double d_e = expected / (static_cast<double>(n) * static_cast<double>(n - 1));
    if (d_e == 0.0) return d_o == 0.0 ? std::optional<double>(1.0) : std::nullopt;
    return 1.0 - d_o / d_e;
}

void criterion_krippendorff(std::vector<std::string>& failures) {
    AnnotationMatrix worked;
    worked.add("u1", "r1", "A");
    worked.add("u1", "r2", "A");
    worked.add("u2", "r1", "A");
    worked.add("u2", "r2", "B");
    expect(failures, krippendorff_alpha(worked) == 0.0, "worked two-unit case is not exactly 0");

    AnnotationMatrix perfect;
    for (int u = 0; u < 5; ++u) {
        for (int r = 0; r < 3; ++r) {
            perfect.add("u" + std::to_string(u), "r" + std::to_string(r),
                        u % 2 == 0 ? "pass" : "fail");
        }
    }
    expect(failures, krippendorff_alpha(perfect) == 1.0, "perfect agreement is not exactly 1.0");

    rng::Engine eng = rng::make_engine(8899);
    int checked = 0;
    while (checked < 100) {
        AnnotationMatrix m;
        const std::size_t n_units = 1 + rng::bounded(eng, 6);
        const std::size_t n_raters = 2 + rng::bounded(eng, 3);
        const std::size_t n_cats = 1 + rng::bounded(eng, 3);
        for (std::size_t u = 0; u < n_units; ++u) {
            for (std::size_t r = 0; r < n_raters; ++r) {
                if (rng::bounded(eng, 4) == 0) continue;
                m.add("u" + std::to_string(u), "r" + std::to_string(r),
                      "c" + std::to_string(rng::bounded(eng, n_cats)));
            }
        }
        auto oracle = alpha_oracle(m);
        if (!oracle.has_value()) {
            try {
                krippendorff_alpha(m);
                failures.push_back("implementation accepted a matrix the oracle calls undefined");
            } catch (const DomainError&) {
            }
            continue;
        }
        const double got = krippendorff_alpha(m);
        if (std::abs(got - *oracle) >= 1e-9) {
            failures.push_back("alpha deviates from oracle by " + std::to_string(std::abs(got - *oracle)));
        }
        ++checked;
    }
}

// ---------------------------------------------------------------------------
// 6. Verifier strictness and the pipeline boundary
// ---------------------------------------------------------------------------

void criterion_verifier_strictness(std::vector<std::string>& failures) {
    Rulebook rulebook = load_rulebook(test_support::assets_dir() / "rulebook.json");
    const Outcome outcomes[] = {Outcome::Pass, Outcome::Fail, Outcome::Uncertain};
    auto text_for = [](Outcome o) -> std::string {
        switch (o) {
            case Outcome::Pass: return "通过：ok";
            case Outcome::Fail: return "不通过：bad";
            case Outcome::Uncertain: return "（模糊回答）";
        }
        return "";
    };
    for (Outcome corr : outcomes) {
        for (Outcome halu : outcomes) {
            for (Outcome label : outcomes) {
                auto backend = std::make_shared<CallbackBackend>(
                    [&, corr, halu, label](const CompletionRequest& r) -> std::string {
                        if (r.tag == "verify.corr") return text_for(corr);
                        if (r.tag == "verify.halu") return text_for(halu);
                        return text_for(label);
                    });
                LlmGateway gateway({.mode = GatewayMode::Live}, backend);
                Verifier verifier(gateway, rulebook, {.model = "v", .decoding = {}, .workers = 1});
                auto result = verifier.verify_record(test_support::make_record("s", 1), true);
                const bool all_pass =
                    corr == Outcome::Pass && halu == Outcome::Pass && label == Outcome::Pass;
                if ((result.record.status == RecordStatus::Verified) != all_pass) {
                    failures.push_back("verdict triple (" + std::string(outcome_name(corr)) + "," +
                                       std::string(outcome_name(halu)) + "," +
                                       std::string(outcome_name(label)) + ") mis-decided");
                }
            }
        }
    }

    // pipeline boundary: non-verified records never reach a benchmark
    std::vector<MetaRecord> mixed;
    std::set<std::string> verified_ids;
    rng::Engine eng = rng::make_engine(4);
    for (int i = 0; i < 200; ++i) {
        MetaRecord m = test_support::make_record("b" + std::to_string(i));
        switch (rng::bounded(eng, 3)) {
            case 0: m.status = RecordStatus::Verified; verified_ids.insert(m.id); break;
            case 1: m.status = RecordStatus::Rejected; m.feedback = "bad"; break;
            default: break; // Unverified
        }
        mixed.push_back(std::move(m));
    }
    std::vector<MetaRecord> only_verified;
    for (const MetaRecord& m : mixed) {
        if (m.status == RecordStatus::Verified) only_verified.push_back(m);
    }
    Benchmark bench = aggregate(only_verified, 99);
    auto check_items = [&](const std::vector<BenchmarkItem>& items) {
        for (const BenchmarkItem& item : items) {
            if (verified_ids.count(item.meta_id) == 0) {
                failures.push_back("non-verified record leaked into the benchmark: " + item.meta_id);
            }
        }
    };
    check_items(bench.generative);
    check_items(bench.single_choice);
    check_items(bench.true_false);

    bool threw = false;
    try {
        aggregate(mixed, 99); // contains Rejected/Unverified records
    } catch (const ValidationError&) {
        threw = true;
    }
    expect(failures, threw, "aggregate accepted non-verified records");
}

// ---------------------------------------------------------------------------
// 7. Taxonomy round-trip and the labeled example fixtures
// ---------------------------------------------------------------------------

void criterion_taxonomy_fixtures(std::vector<std::string>& failures) {
    for (HallucinationType t : kAllHallucinationTypes) {
        if (parse_hallucination_type(code(t)) != t || parse_hallucination_type(long_name(t)) != t) {
            failures.push_back("taxonomy round-trip failed for " + std::string(code(t)));
        }
    }

    // signature substring of each type's rule set, used by the scripted verifier
    // (each snippet occurs in exactly one type's rule set)
    const std::map<HallucinationType, std::string> rule_marks = {
        {HallucinationType::FactFab, "不存在的概念"},
        {HallucinationType::AttrErr, "误导性的或完全不符合该事物的实际特性"},
        {HallucinationType::EntErr, "针对具体实体进行提问"},
        {HallucinationType::RelErr, "不同实体之间的比较"},
        {HallucinationType::SpaErr, "时间、空间或特定时期的描述"},
        {HallucinationType::RefErr, "引用或链接"},
    };

    const auto fixture_path = test_support::assets_dir() / "fixtures" / "taxonomy_examples.jsonl";
    struct Example {
        HallucinationType type;
        MetaRecord record;
    };
    std::vector<Example> examples;
    jsonl::for_each_line(fixture_path, [&](const nlohmann::json& j, std::size_t) {
        Example ex;
        ex.type = parse_hallucination_type(j.at("type").get<std::string>());
        MetaRecord m;
        m.id = "fixture-" + std::string(code(ex.type));
        m.doc_id = "fixture";
        m.question = j.at("question").get<std::string>();
        m.correct_answer = j.at("correct_answer").get<std::string>();
        m.knowledge = j.at("knowledge").get<std::string>();
        m.hallucinated_responses = {j.at("hallucinated_response").get<std::string>()};
        m.labels = {ex.type};
        m.primary_label = ex.type;
        m.topic = Topic::make(Topic::Kind::Culture);
        ex.record = std::move(m);
        examples.push_back(std::move(ex));
    });
    expect(failures, examples.size() == 6, "expected the six labeled examples");

    // Scripted verifier: a label check passes iff the rendered rules belong to
    // the example's labeled type (identified by rule snippet + response text).
    auto mock = std::make_shared<MockBackend>();
    for (const Example& ex : examples) {
        MockRule rule;
        rule.tag = "verify.label";
        rule.user_contains = {ex.record.hallucinated_responses[0].substr(0, 24),
                              rule_marks.at(ex.type)};
        rule.response = "通过：符合类型定义。";
        mock->add_rule(rule);
    }
    mock->set_default_response("不通过：类型不符。");
    LlmGateway gateway({.mode = GatewayMode::Mock}, mock);
    Rulebook rulebook = load_rulebook(test_support::assets_dir() / "rulebook.json");
    Verifier verifier(gateway, rulebook, {.model = "v", .decoding = {}, .workers = 1});

    for (const Example& ex : examples) {
        Verdict v = verifier.check_label(ex.record, 0);
        if (v.outcome != Outcome::Pass) {
            failures.push_back("scripted verifier rejects the correct label for " +
                               std::string(code(ex.type)));
        }
        // relabel with a different type: the scripted verifier must fail it
        MetaRecord wrong = ex.record;
        const HallucinationType other = ex.type == HallucinationType::FactFab
                                            ? HallucinationType::SpaErr
                                            : HallucinationType::FactFab;
        wrong.labels = {other};
        wrong.primary_label = other;
        Verdict w = verifier.check_label(wrong, 0);
        if (w.outcome == Outcome::Pass) {
            failures.push_back("scripted verifier accepted a mislabeled " + std::string(code(ex.type)) +
                               " example");
        }
    }
}

// ---------------------------------------------------------------------------
// 8. Scoring extraction tables
// ---------------------------------------------------------------------------

void criterion_scoring_tables(std::vector<std::string>& failures) {
    BenchmarkItem choice;
    choice.item_id = "c:choice";
    choice.meta_id = "c";
    choice.topic = Topic::make(Topic::Kind::Culture);
    choice.primary_label = HallucinationType::EntErr;
    ChoicePayload cp;
    cp.question_text = "单项选择：问题？";
    cp.options = {"巴黎", "伦敦", "柏林", "马德里"};
    cp.answer_index = 1;
    choice.payload = cp;

    struct ChoiceCase {
        const char* response;
        ChoiceScore expected;
    };
    const ChoiceCase choice_cases[] = {
        {"B", ChoiceScore::Correct},
        {"b", ChoiceScore::Correct},
        {"(B)", ChoiceScore::Correct},
        {"B.", ChoiceScore::Correct},
        {"正确答案是 B。", ChoiceScore::Correct},
        {"答案：伦敦", ChoiceScore::Correct},
        {"答案是C", ChoiceScore::Hallucinated},
        {"选D", ChoiceScore::Hallucinated},
        {"A", ChoiceScore::Hallucinated},
        {"the answer is (c)", ChoiceScore::Hallucinated},
        {"我认为是巴黎。", ChoiceScore::Hallucinated},
        {"I don't know", ChoiceScore::Unparsable},
        {"ABCD都有可能", ChoiceScore::Unparsable},
        {"巴黎和伦敦都对", ChoiceScore::Unparsable},
        {"", ChoiceScore::Unparsable},
    };
    int n_cases = 0;
    for (const ChoiceCase& c : choice_cases) {
        ++n_cases;
        if (score_choice(choice, c.response) != c.expected) {
            failures.push_back(std::string("score_choice disagrees with the hand label for \"") +
                               c.response + "\"");
        }
    }

    auto tf = [](bool truth) {
        BenchmarkItem item;
        item.item_id = "t:tf";
        item.meta_id = "t";
        item.topic = Topic::make(Topic::Kind::Culture);
        item.primary_label = HallucinationType::SpaErr;
        TrueFalsePayload payload;
        payload.statement_question = "判断对错：陈述。";
        payload.truth = truth;
        payload.source = truth ? TfSource::FromCorrect : TfSource::FromHallucinated;
        if (!truth) payload.source_index = 0;
        item.payload = payload;
        return item;
    };
    struct TfCase {
        const char* response;
        bool truth;
        TfScore expected;
    };
    const TfCase tf_cases[] = {
        {"正确", false, TfScore::FalseNegative},
        {"正确。", true, TfScore::Correct},
        {"错误", true, TfScore::FalsePositive},
        {"错误。", false, TfScore::Correct},
        {"对", true, TfScore::Correct},
        {"错", false, TfScore::Correct},
        {"不正确", false, TfScore::Correct},
        {"不对，这是错的。", true, TfScore::FalsePositive},
        {"对于这个问题，答案是错误的。", true, TfScore::FalsePositive},
        {"true", false, TfScore::FalseNegative},
        {"False.", true, TfScore::FalsePositive},
        {"Yes, that is right.", false, TfScore::FalseNegative},
        {"No.", true, TfScore::FalsePositive},
        {"I know.", true, TfScore::Unparsable},
        {"无法判断", true, TfScore::Unparsable},
        {"", false, TfScore::Unparsable},
    };
    for (const TfCase& c : tf_cases) {
        ++n_cases;
        if (score_true_false(tf(c.truth), c.response) != c.expected) {
            failures.push_back(std::string("score_true_false disagrees with the hand label for \"") +
                               c.response + "\"");
        }
    }
    expect(failures, n_cases >= 20,
           "extraction table has only " + std::to_string(n_cases) + " cases (need >= 20)");
}

// ---------------------------------------------------------------------------
// 9. Offline scope statement
// ---------------------------------------------------------------------------

void criterion_offline_scope(std::vector<std::string>& failures) {
    // Full-scale leaderboard reproduction needs live frontier-model access and
    // the original source corpus; neither is available at desk scale. This
    // suite is the substituted property-based gate and must run fully offline.
    PipelineConfig cfg =
        PipelineConfig::load(test_support::assets_dir() / "fixtures" / "e2e" / "config.json");
    expect(failures, cfg.mode == GatewayMode::Mock, "bundled fixture config is not offline");
    std::cout << "    note: criteria 1-8 run entirely on mock/replay backends; live evaluation of\n"
                 "    frontier models and the original corpus is explicitly out of desk-scale scope.\n";
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "end-to-end fixture run: verified records, 3-format benchmark, byte-identical reruns, <10s",
         criterion_end_to_end},
        {2, "optimizer trajectory replay selects iteration 2 and stops early after iteration 3",
         criterion_optimizer_trajectory},
        {3, "aggregation invariants on 1,000 synthetic records + answer-index uniformity",
         criterion_aggregation_invariants},
        {4, "metrics accounting: 25.17/10.40/14.30 -> overall 16.62 +- 0.01, fn+fp == tf errors",
         criterion_metrics_accounting},
        {5, "krippendorff alpha: brute-force oracle within 1e-9, exact 1.0 and 0.0 anchors",
         criterion_krippendorff},
        {6, "verifier strictness: Verified iff all-Pass; benchmark boundary rejects non-verified",
         criterion_verifier_strictness},
        {7, "taxonomy round-trip and the six labeled example fixtures classify consistently",
         criterion_taxonomy_fixtures},
        {8, "choice and true/false extraction tables match hand labels (>= 20 cases)",
         criterion_scoring_tables},
        {9, "offline scope: suite substitutes property-based checks for live-model reproduction",
         criterion_offline_scope},
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        std::vector<std::string> failures;
        try {
            c.run(failures);
        } catch (const std::exception& e) {
            failures.push_back(std::string("exception: ") + e.what());
        }
        if (failures.empty()) {
            std::printf("[PASS] criterion %d: %s\n", c.number, c.title.c_str());
        } else {
            ++failed;
            std::printf("[FAIL] criterion %d: %s\n", c.number, c.title.c_str());
            for (const std::string& f : failures) std::printf("       - %s\n", f.c_str());
        }
    }
    if (failed == 0) {
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
    } else {
        std::printf("%d acceptance criteria FAILED\n", failed);
    }
    return failed == 0 ? 0 : 1;
}
