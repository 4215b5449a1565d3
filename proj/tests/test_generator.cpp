#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "halogen/generator.hpp"
#include "test_support.hpp"

using namespace halogen;

namespace {

PromptTemplate stage_template(PromptStage stage) {
    PromptTemplate t;
    t.stage = stage;
    t.instruction = "指令";
    t.rules = {"规则一"};
    return t;
}

KnowledgeDocument rembrandt_doc() {
    KnowledgeDocument d;
    d.id = "doc-rembrandt";
    d.topic = Topic::make(Topic::Kind::Celebrities);
    d.source = "fixture";
    d.text = "Rembrandt Halmensson van Rijn was born on July 15, 1606.";
    return d;
}

LlmGateway mock_gateway(std::shared_ptr<MockBackend> mock) {
    return LlmGateway({.mode = GatewayMode::Mock}, std::move(mock));
}

GeneratorOptions options(int k = 3) {
    GeneratorOptions o;
    o.model = "gen";
    o.k = k;
    return o;
}

} // namespace

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

TEST_CASE("fenced blocks are extracted and unterminated fences dropped") {
    const std::string text = "prose\n```\nA: 1\n```\nmore\n```\nB: 2\n```\n```\ndangling";
    auto blocks = wire::fenced_blocks(text);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0] == "A: 1\n");
    CHECK(blocks[1] == "B: 2\n");
}

TEST_CASE("tagged fields support multi-line values and full-width colons") {
    static const std::string_view tags[] = {"QUESTION", "ANSWER"};
    auto fields = wire::tagged_fields("QUESTION：第一行\n第二行\nANSWER: 答案\n", tags);
    REQUIRE(fields.size() == 2);
    CHECK(fields[0].first == "QUESTION");
    CHECK(fields[0].second == "第一行\n第二行");
    CHECK(fields[1].second == "答案");
}

// ---------------------------------------------------------------------------
// generate_qa
// ---------------------------------------------------------------------------

TEST_CASE("generate_qa parses the Rembrandt fixture") {
    auto mock = std::make_shared<MockBackend>();
    MockRule rule;
    rule.tag = "generate.qa";
    rule.response =
        "```\nQUESTION: What is Rembrandt Halmensson van Rijn's date of birth?\n"
        "ANSWER: July 15, 1606.\n"
        "KNOWLEDGE: Rembrandt Halmensson van Rijn was born on July 15, 1606.\n```\n";
    mock->add_rule(rule);
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());

    auto drafts = gen.generate_qa(rembrandt_doc(), stage_template(PromptStage::QaGen));
    REQUIRE(drafts.size() == 1);
    CHECK(drafts[0].question == "What is Rembrandt Halmensson van Rijn's date of birth?");
    CHECK(drafts[0].correct_answer == "July 15, 1606.");
    CHECK(drafts[0].doc_id == "doc-rembrandt");
}

TEST_CASE("generate_qa returns an empty list and logs on unparsable output") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response("no fenced blocks here");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());

    std::ostringstream log_sink;
    Logger::global().set_sink(&log_sink);
    auto drafts = gen.generate_qa(rembrandt_doc(), stage_template(PromptStage::QaGen));
    Logger::global().set_sink(&std::cerr);

    CHECK(drafts.empty());
    CHECK(log_sink.str().find("qa_parse_error") != std::string::npos);
}

TEST_CASE("generate_qa preserves model block order") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response(
        "```\nQUESTION: q1\nANSWER: a1\nKNOWLEDGE: k1\n```\n"
        "```\nQUESTION: q2\nANSWER: a2\nKNOWLEDGE: k2\n```\n");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());
    auto drafts = gen.generate_qa(rembrandt_doc(), stage_template(PromptStage::QaGen));
    REQUIRE(drafts.size() == 2);
    CHECK(drafts[0].question == "q1");
    CHECK(drafts[1].question == "q2");
}

TEST_CASE("generate_qa rejects a template for the wrong stage") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response("x");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());
    CHECK_THROWS_AS(gen.generate_qa(rembrandt_doc(), stage_template(PromptStage::HaluGen)),
                    ValidationError);
}

// ---------------------------------------------------------------------------
// generate_hallucinated
// ---------------------------------------------------------------------------

TEST_CASE("generate_hallucinated returns k responses including the fixture date") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response(
        "```\nRESPONSE: June 14, 1605.\nRESPONSE: August 2, 1607.\nRESPONSE: July 15, 1606, in Paris.\n```\n");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());

    QaDraft draft{"doc-rembrandt", "knowledge", "What is Rembrandt Halmensson van Rijn's date of birth?",
                  "July 15, 1606."};
    auto responses = gen.generate_hallucinated(draft, stage_template(PromptStage::HaluGen), 3);
    REQUIRE(responses.size() == 3);
    CHECK(responses[0] == "June 14, 1605.");
}

TEST_CASE("responses equal to the correct answer are filtered, short output raises") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response(
        "```\nRESPONSE: June 14, 1605.\nRESPONSE:   July 15,   1606.\nRESPONSE: June 1, 1600.\n```\n");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());

    QaDraft draft{"d", "k", "q", "July 15, 1606."};
    // the verbatim (whitespace-normalized) copy of the answer is dropped → only 2 usable
    CHECK_THROWS_AS(gen.generate_hallucinated(draft, stage_template(PromptStage::HaluGen), 3),
                    ShortOutputError);
    auto two = gen.generate_hallucinated(draft, stage_template(PromptStage::HaluGen), 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == "June 14, 1605.");
    CHECK(two[1] == "June 1, 1600.");
}

// ---------------------------------------------------------------------------
// generate_labels
// ---------------------------------------------------------------------------

TEST_CASE("generate_labels parses order-aligned labels") {
    auto mock = std::make_shared<MockBackend>();
    mock->set_default_response("```\nLABEL: SpaErr\nLABEL: AttrErr\nLABEL: RefErr\n```\n");
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());

    QaDraft draft{"d", "k", "q", "a"};
    std::vector<std::string> responses = {"r1", "r2", "r3"};
    auto labels = gen.generate_labels(draft, responses, stage_template(PromptStage::LabelGen));
    REQUIRE(labels.size() == 3);
    CHECK(labels[0] == HallucinationType::SpaErr);
    CHECK(labels[1] == HallucinationType::AttrErr);
    CHECK(labels[2] == HallucinationType::RefErr);
}

TEST_CASE("generate_labels rejects unknown codes and count mismatches") {
    auto mock = std::make_shared<MockBackend>();
    LlmGateway gateway = mock_gateway(mock);
    Generator gen(gateway, options());
    QaDraft draft{"d", "k", "q", "a"};
    std::vector<std::string> responses = {"r1", "r2"};

    mock->set_default_response("```\nLABEL: Hallucination\nLABEL: SpaErr\n```\n");
    CHECK_THROWS_AS(gen.generate_labels(draft, responses, stage_template(PromptStage::LabelGen)),
                    StageParseError);

    mock->set_default_response("```\nLABEL: SpaErr\n```\n");
    CHECK_THROWS_AS(gen.generate_labels(draft, responses, stage_template(PromptStage::LabelGen)),
                    StageParseError);
}

// ---------------------------------------------------------------------------
// Primary label election
// ---------------------------------------------------------------------------

TEST_CASE("primary label: strict majority, singleton, declaration-order ties") {
    using T = HallucinationType;
    std::vector<T> majority = {T::SpaErr, T::SpaErr, T::EntErr};
    CHECK(primary_label_of(majority) == T::SpaErr);

    std::vector<T> tie = {T::EntErr, T::SpaErr, T::RefErr};
    CHECK(primary_label_of(tie) == T::EntErr);

    std::vector<T> single = {T::AttrErr};
    CHECK(primary_label_of(single) == T::AttrErr);
}

TEST_CASE("primary label election matches the counting oracle on all triples") {
    // Oracle property: the winner has maximal count, and no type with the same
    // count precedes it in declaration order.
    for (HallucinationType a : kAllHallucinationTypes) {
        for (HallucinationType b : kAllHallucinationTypes) {
            for (HallucinationType c : kAllHallucinationTypes) {
                std::vector<HallucinationType> labels = {a, b, c};
                HallucinationType winner = primary_label_of(labels);
                auto count = [&](HallucinationType t) {
                    return std::count(labels.begin(), labels.end(), t);
                };
                for (HallucinationType t : kAllHallucinationTypes) {
                    CHECK(count(winner) >= count(t));
                    if (count(t) == count(winner) && count(t) > 0) {
                        CHECK(declaration_index(winner) <= declaration_index(t));
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// build_meta and batch generation
// ---------------------------------------------------------------------------

TEST_CASE("build_meta assembles an unverified record with stable ids") {
    QaDraft draft{"doc-1", "knowledge", "question?", "answer"};
    std::vector<std::string> responses = {"w1", "w2", "w3"};
    std::vector<HallucinationType> labels = {HallucinationType::EntErr, HallucinationType::SpaErr,
                                             HallucinationType::EntErr};
    MetaRecord m = build_meta(draft, responses, labels, Topic::make(Topic::Kind::Culture));
    CHECK(m.status == RecordStatus::Unverified);
    CHECK(m.primary_label == HallucinationType::EntErr);
    CHECK(m.id.starts_with("doc-1-"));

    MetaRecord again = build_meta(draft, responses, labels, Topic::make(Topic::Kind::Culture));
    CHECK(again.id == m.id);

    std::vector<HallucinationType> short_labels = {HallucinationType::EntErr};
    CHECK_THROWS_AS(build_meta(draft, responses, short_labels, Topic::make(Topic::Kind::Culture)),
                    ValidationError);
}

TEST_CASE("meta record json round-trips") {
    MetaRecord m = test_support::make_verified_record("r1");
    CHECK(meta_from_json(to_json(m)) == m);
}

TEST_CASE("meta records with a response equal to the answer are invalid") {
    MetaRecord m = test_support::make_record("r1");
    m.hallucinated_responses[1] = "  1952年。 ";
    CHECK_THROWS_AS(validate(m), ValidationError);
}

TEST_CASE("run_generation caps questions per doc and orders output by document") {
    auto mock = std::make_shared<MockBackend>();
    std::string qa;
    for (int i = 0; i < 4; ++i) {
        qa += "```\nQUESTION: q" + std::to_string(i) + "\nANSWER: a" + std::to_string(i) +
              "\nKNOWLEDGE: k\n```\n";
    }
    MockRule qa_rule;
    qa_rule.tag = "generate.qa";
    qa_rule.response = qa;
    mock->add_rule(qa_rule);
    MockRule halu_rule;
    halu_rule.tag = "generate.halu";
    halu_rule.response = "```\nRESPONSE: w1\nRESPONSE: w2\nRESPONSE: w3\n```\n";
    mock->add_rule(halu_rule);
    MockRule label_rule;
    label_rule.tag = "generate.label";
    label_rule.response = "```\nLABEL: EntErr\nLABEL: EntErr\nLABEL: SpaErr\n```\n";
    mock->add_rule(label_rule);

    LlmGateway gateway = mock_gateway(mock);
    StagePrompts prompts{stage_template(PromptStage::QaGen), stage_template(PromptStage::HaluGen),
                         stage_template(PromptStage::LabelGen)};

    KnowledgeDocument d1 = rembrandt_doc();
    KnowledgeDocument d2 = rembrandt_doc();
    d2.id = "doc-2";
    d2.text = "another body";
    std::vector<KnowledgeDocument> docs = {d1, d2};

    GeneratorOptions opts = options();
    opts.max_questions_per_doc = 2;
    opts.workers = 4;
    std::vector<MetaRecord> records = run_generation(docs, prompts, gateway, opts);
    REQUIRE(records.size() == 4); // 2 docs x capped 2 questions
    CHECK(records[0].doc_id == "doc-rembrandt");
    CHECK(records[1].doc_id == "doc-rembrandt");
    CHECK(records[2].doc_id == "doc-2");
    CHECK(records[3].doc_id == "doc-2");
    for (const MetaRecord& m : records) CHECK(m.primary_label == HallucinationType::EntErr);
}
