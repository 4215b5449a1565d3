// halogen — hallucination QA benchmark pipeline CLI.
//
// Subcommands mirror the pipeline stages one to one:
//   ingest, optimize, generate, verify, aggregate, evaluate, report,
//   annotate-sample, agreement, run
//
// Exit codes: 0 ok, 1 usage error, 2 stage failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "halogen/agreement.hpp"
#include "halogen/pipeline.hpp"

namespace {

using namespace halogen;

struct CommonArgs {
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> cache_dir;
    std::optional<std::string> out_dir;
    std::optional<std::string> corpus;
    std::string log_level = "info";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config file (JSON)")->required();
    cmd->add_option("--mode", args.mode, "gateway mode: live|record|replay|mock");
    cmd->add_option("--seed", args.seed, "run seed override");
    cmd->add_option("--cache-dir", args.cache_dir, "record/replay cache directory override");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_option("--corpus", args.corpus, "corpus file override");
    cmd->add_option("--log-level", args.log_level, "debug|info|warn|error");
}

PipelineConfig load_config(const CommonArgs& args) {
    PipelineConfig cfg = PipelineConfig::load(args.config_path);
    if (args.mode) cfg.mode = parse_gateway_mode(*args.mode);
    if (args.seed) cfg.seed = *args.seed;
    if (args.cache_dir) cfg.cache_dir = *args.cache_dir;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    if (args.corpus) cfg.corpus = *args.corpus;
    if (cfg.mode == GatewayMode::Mock && !std::filesystem::exists(cfg.mock_script)) {
        throw ConfigError("mock mode requires a mock_script file");
    }

    LogLevel level = LogLevel::Info;
    if (args.log_level == "debug") level = LogLevel::Debug;
    else if (args.log_level == "info") level = LogLevel::Info;
    else if (args.log_level == "warn") level = LogLevel::Warn;
    else if (args.log_level == "error") level = LogLevel::Error;
    else throw ConfigError("unknown log level \"" + args.log_level + "\"");
    Logger::global().set_level(level);
    return cfg;
}

DecodingSettings parse_decoding_flag(const std::string& text) {
    DecodingSettings d;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t comma = text.find(',', start);
        const std::string part =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("bad --decoding entry \"" + part + "\"");
        const std::string key = strings::trim(part.substr(0, eq));
        const double value = std::stod(part.substr(eq + 1));
        if (key == "temperature") d.temperature = value;
        else if (key == "top_p") d.top_p = value;
        else throw ConfigError("unknown decoding key \"" + key + "\"");
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    validate(d);
    return d;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hallucination QA benchmark pipeline"};
    app.require_subcommand(1);

    CommonArgs common;

    // ingest ----------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "validate the corpus and write the canonical copy");
    add_common(ingest, common);

    // optimize --------------------------------------------------------------
    auto* optimize_cmd = app.add_subcommand("optimize", "multi-round prompt optimization");
    add_common(optimize_cmd, common);
    std::optional<int> opt_train, opt_val, opt_max_iters, opt_candidates;
    optimize_cmd->add_option("--train", opt_train, "training document count");
    optimize_cmd->add_option("--val", opt_val, "validation document count");
    optimize_cmd->add_option("--max-iters", opt_max_iters, "maximum optimization iterations");
    optimize_cmd->add_option("--candidates", opt_candidates, "candidate prompts per round");

    // generate ----------------------------------------------------------------
    auto* generate = app.add_subcommand("generate", "run the three generation stages over the corpus");
    add_common(generate, common);
    std::optional<std::string> gen_prompts;
    std::optional<int> gen_max_q, gen_k;
    generate->add_option("--prompts", gen_prompts, "prompt directory override");
    generate->add_option("--max-questions-per-doc", gen_max_q, "cap questions per document");
    generate->add_option("-k,--k", gen_k, "hallucinated responses per question");

    // verify ------------------------------------------------------------------
    auto* verify = app.add_subcommand("verify", "apply the three checks to generated records");
    add_common(verify, common);
    std::optional<std::string> verify_in, verify_rules;
    bool collect_feedback = true;
    verify->add_option("--in", verify_in, "meta records path override");
    verify->add_option("--rules", verify_rules, "rulebook path override");
    verify->add_flag("--collect-feedback,!--no-collect-feedback", collect_feedback,
                     "collect full error feedback (default on; off enables early exit)");

    // aggregate ---------------------------------------------------------------
    auto* aggregate_cmd = app.add_subcommand("aggregate", "build the three benchmark formats");
    add_common(aggregate_cmd, common);
    std::optional<std::string> agg_in;
    aggregate_cmd->add_option("--in", agg_in, "verified records path override");

    // evaluate ----------------------------------------------------------------
    auto* evaluate = app.add_subcommand("evaluate", "run a candidate model and score its responses");
    add_common(evaluate, common);
    std::optional<std::string> eval_model, eval_judge, eval_decoding, eval_bench;
    evaluate->add_option("--benchmark", eval_bench, "benchmark directory override");
    evaluate->add_option("--model-backend", eval_model, "candidate model name override");
    evaluate->add_option("--judge-backend", eval_judge, "judge: exact_match|llm");
    evaluate->add_option("--decoding", eval_decoding, "e.g. temperature=1,top_p=0.7");

    // report ------------------------------------------------------------------
    auto* report = app.add_subcommand("report", "print the rendered evaluation report");
    add_common(report, common);

    // annotate-sample ---------------------------------------------------------
    auto* annotate = app.add_subcommand("annotate-sample", "sample records for human annotation");
    add_common(annotate, common);
    std::string ann_in, ann_out;
    std::size_t ann_n = 300;
    annotate->add_option("--in", ann_in, "records file (jsonl)")->required();
    annotate->add_option("--out", ann_out, "output subset file")->required();
    annotate->add_option("--n", ann_n, "sample size");

    // agreement ---------------------------------------------------------------
    auto* agreement_cmd = app.add_subcommand("agreement", "inter-annotator agreement (Krippendorff's alpha)");
    std::string ann_csv, metric = "nominal";
    agreement_cmd->add_option("--annotations", ann_csv, "annotations.csv (unit_id,rater_id,label)")
        ->required();
    agreement_cmd->add_option("--metric", metric, "distance metric (nominal only)");

    // run ---------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run optimize -> generate -> verify -> aggregate");
    add_common(run, common);
    std::optional<std::string> resume_from;
    run->add_option("--resume-from", resume_from, "optimize|generate|verify|aggregate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (agreement_cmd->parsed()) {
            if (metric != "nominal") throw ConfigError("only the nominal metric is supported");
            AnnotationMatrix matrix = load_annotations_csv(ann_csv);
            const double alpha = krippendorff_alpha(matrix);
            std::cout << "alpha=" << alpha << "\n";
            return 0;
        }

        PipelineConfig cfg = load_config(common);

        if (annotate->parsed()) {
            std::vector<MetaRecord> records = load_meta_records(ann_in);
            std::vector<MetaRecord> subset = sample_for_annotation(records, ann_n, cfg.seed);
            write_meta_records(ann_out, subset);
            std::cout << "sampled " << subset.size() << " of " << records.size() << " records\n";
            return 0;
        }

        if (optimize_cmd->parsed()) {
            if (opt_train) cfg.optimization.train_docs = *opt_train;
            if (opt_val) cfg.optimization.val_docs = *opt_val;
            if (opt_max_iters) cfg.optimization.max_iters = *opt_max_iters;
            if (opt_candidates) cfg.optimization.candidates = *opt_candidates;
        }
        if (generate->parsed()) {
            if (gen_prompts) cfg.prompt_dir = *gen_prompts;
            if (gen_max_q) cfg.generation.max_questions_per_doc = *gen_max_q;
            if (gen_k) cfg.generation.k = *gen_k;
        }
        if (verify->parsed() && verify_rules) cfg.rulebook_path = *verify_rules;
        if (evaluate->parsed()) {
            if (eval_bench) cfg.out_dir = *eval_bench; // benchmark files live in out_dir
            if (eval_model) cfg.candidate_backend.model = *eval_model;
            if (eval_decoding) cfg.candidate_backend.decoding = parse_decoding_flag(*eval_decoding);
            if (eval_judge) {
                if (*eval_judge == "exact_match") cfg.evaluation.judge = JudgeKind::ExactMatch;
                else if (*eval_judge == "llm") cfg.evaluation.judge = JudgeKind::Llm;
                else throw ConfigError("unknown judge \"" + *eval_judge + "\"");
            }
        }

        PipelineContext ctx(cfg);

        if (ingest->parsed()) {
            const std::size_t n = run_ingest(ctx);
            std::cout << "ingested " << n << " documents\n";
        } else if (optimize_cmd->parsed()) {
            OptimizationTrace trace = run_optimize(ctx);
            std::cout << "selected prompt version " << trace.selected_version << " ("
                      << stop_reason_name(trace.stop_reason) << ")\n";
        } else if (generate->parsed()) {
            auto records = run_generate(ctx);
            std::cout << "generated " << records.size() << " meta records\n";
        } else if (verify->parsed()) {
            if (verify_in != std::nullopt) {
                std::filesystem::copy_file(*verify_in, ctx.meta_path(),
                                           std::filesystem::copy_options::overwrite_existing);
            }
            VerificationBatch batch = run_verify(ctx, collect_feedback);
            std::cout << "verified " << batch.verified.size() << ", rejected " << batch.rejected.size()
                      << "\n";
        } else if (aggregate_cmd->parsed()) {
            if (agg_in) {
                std::filesystem::copy_file(*agg_in, ctx.verified_path(),
                                           std::filesystem::copy_options::overwrite_existing);
            }
            BenchmarkStats stats = run_aggregate(ctx);
            std::cout << "benchmark: generative=" << stats.generative
                      << " choice=" << stats.single_choice << " tf=" << stats.true_false
                      << " total=" << stats.total() << "\n";
        } else if (evaluate->parsed()) {
            EvalReport eval_report = run_evaluate(ctx);
            std::cout << render_report_markdown(eval_report);
        } else if (report->parsed()) {
            std::cout << run_report(ctx);
        } else if (run->parsed()) {
            std::optional<PipelineStage> stage;
            if (resume_from) stage = parse_pipeline_stage(*resume_from);
            run_pipeline(ctx, stage);
            std::cout << "pipeline complete; artifacts under " << cfg.out_dir.string() << "\n";
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
