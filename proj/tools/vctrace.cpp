// vctrace: batch command-line front end for the reasoning-trace toolkit.

#include "vctrace/de_labeler.hpp"
#include "vctrace/error.hpp"
#include "vctrace/filter.hpp"
#include "vctrace/io.hpp"
#include "vctrace/knowledge_store.hpp"
#include "vctrace/lexicon.hpp"
#include "vctrace/metrics.hpp"
#include "vctrace/parallel.hpp"
#include "vctrace/parser.hpp"
#include "vctrace/pipeline.hpp"
#include "vctrace/qa_harness.hpp"
#include "vctrace/text.hpp"
#include "vctrace/verifiers.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#ifndef VCTRACE_DEFAULT_TEMPLATES
#define VCTRACE_DEFAULT_TEMPLATES "data/templates"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vctrace;

namespace {

struct Common {
    std::size_t jobs = 1;
    std::string schema;
    std::string out_dir;

    const SchemaRegistry& registry() {
        if (schema.empty()) {
            return SchemaRegistry::builtin();
        }
        if (!loaded) {
            loaded = SchemaRegistry::load(schema);
        }
        return *loaded;
    }

private:
    std::optional<SchemaRegistry> loaded;
};

void add_schema_option(CLI::App* sub, Common& c) {
    sub->add_option("--schema", c.schema, "Action schema TSV (default: built-in schema)")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_SCHEMA");
}

void add_out_dir_option(CLI::App* sub, Common& c) {
    sub->add_option("--out-dir", c.out_dir, "Directory for output files")->required()->envname("VCTRACE_OUT_DIR");
}

// Echoes the effective configuration next to the outputs.
void echo_config(const CLI::App& app, const CLI::App& sub, const fs::path& out_dir) {
    std::string text = "# effective configuration\n";
    for (const auto* opt : app.get_options()) {
        if (opt->get_configurable() && !opt->get_lnames().empty() && opt->get_lnames().front() != "help" &&
            opt->get_lnames().front() != "config") {
            auto values = opt->reduced_results();
            text += opt->get_lnames().front() + "=" + (values.empty() ? opt->get_default_str() : join(values, ",")) +
                    "\n";
        }
    }
    text += "\n[" + sub.get_name() + "]\n" + sub.config_to_str(true, false);
    write_file_atomic(out_dir / "effective_config.toml", text);
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
    write_file_atomic(path, to_jsonl(records));
}

std::string fmt4(const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("null"); }

// ---------------------------------------------------------------- verifiers

struct VerifierOptions {
    std::string lexicon;
    std::string de_table;
    double alpha = 0.05;
    std::string loc_table;
    std::string pheno_table;
    std::string dti_table;
    std::string dti_endpoint;
    int dti_timeout = 30;
};

void add_verifier_options(CLI::App* sub, VerifierOptions& v, bool lexicon_required) {
    auto* lex = sub->add_option("--lexicon", v.lexicon, "Entity lexicon TSV")
                    ->check(CLI::ExistingFile)
                    ->envname("VCTRACE_LEXICON");
    if (lexicon_required) {
        lex->required();
    }
    sub->add_option("--de-table", v.de_table, "DE ground-truth TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_DE_TABLE");
    sub->add_option("--alpha", v.alpha, "Significance level for DE labels")
        ->check(CLI::Range(0.0, 1.0))
        ->envname("VCTRACE_ALPHA");
    sub->add_option("--loc-table", v.loc_table, "Protein localization TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_LOC_TABLE");
    sub->add_option("--pheno-table", v.pheno_table, "Entity-phenotype association TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_PHENO_TABLE");
    auto* table = sub->add_option("--dti-table", v.dti_table, "Precomputed DTI scores TSV")
                      ->check(CLI::ExistingFile)
                      ->envname("VCTRACE_DTI_TABLE");
    sub->add_option("--dti-endpoint", v.dti_endpoint, "HTTP DTI scoring endpoint")
        ->envname("VCTRACE_DTI_ENDPOINT")
        ->excludes(table);
    sub->add_option("--dti-timeout", v.dti_timeout, "DTI endpoint timeout in seconds")
        ->check(CLI::PositiveNumber)
        ->envname("VCTRACE_DTI_TIMEOUT");
}

struct LoadedVerifiers {
    std::optional<Lexicon> lexicon;
    std::optional<DEGroundTruth> de;
    std::optional<LocalizationTable> loc;
    std::optional<PhenotypeDb> pheno;
    std::unique_ptr<DTIScorer> dti;

    VerifierContext context(const SchemaRegistry& registry) const {
        VerifierContext ctx;
        ctx.registry = &registry;
        ctx.lexicon = lexicon ? &*lexicon : nullptr;
        ctx.de = de ? &*de : nullptr;
        ctx.loc = loc ? &*loc : nullptr;
        ctx.pheno = pheno ? &*pheno : nullptr;
        ctx.dti = dti.get();
        return ctx;
    }
};

LoadedVerifiers load_verifiers(const VerifierOptions& v) {
    LoadedVerifiers out;
    if (!v.lexicon.empty()) {
        out.lexicon = Lexicon::load(v.lexicon);
    }
    if (!v.de_table.empty()) {
        out.de = DEGroundTruth::load(v.de_table, v.alpha);
    }
    if (!v.loc_table.empty()) {
        out.loc = LocalizationTable::load(v.loc_table);
    }
    if (!v.pheno_table.empty()) {
        out.pheno = PhenotypeDb::load(v.pheno_table);
    }
    if (!v.dti_table.empty()) {
        out.dti = std::make_unique<TableDTIScorer>(TableDTIScorer::load(v.dti_table));
    } else if (!v.dti_endpoint.empty()) {
        out.dti = std::make_unique<HttpDTIScorer>(v.dti_endpoint, std::chrono::seconds(v.dti_timeout));
    }
    return out;
}

std::vector<ReasoningTrace> load_traces(const std::string& path, const SchemaRegistry& registry) {
    return parse_trace_corpus(read_file(path), path, registry);
}

std::vector<CorpusRecord> load_raw(const std::string& path, const SchemaRegistry& registry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return parse_corpus(in, registry);
}

// ---------------------------------------------------------------- validate

struct ValidateOptions {
    std::string input;
};

int run_validate(const ValidateOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    const auto& registry = c.registry();
    auto records = load_raw(o.input, registry);
    std::vector<json> canonical, reports;
    ValidityCounts counts;
    for (const auto& rec : records) {
        json r = {{"line", rec.line}, {"trace_id", rec.trace_id}};
        bool valid = false;
        if (!rec.outcome) {
            r["record_error"] = rec.record_error;
            r["valid"] = false;
        } else if (!rec.outcome->ok()) {
            StructuralReport sr;
            sr.syntactic_ok = false;
            r.update(sr.to_json());
            auto errors = json::array();
            for (const auto& e : rec.outcome->syntax_errors) {
                errors.push_back({{"line", e.line}, {"message", e.message}});
            }
            r["syntax_errors"] = errors;
        } else {
            auto sr = validate_graph(*rec.outcome->trace, registry);
            r.update(sr.to_json());
            valid = sr.valid;
            if (valid) {
                canonical.push_back(to_json(*rec.outcome->trace));
            }
        }
        counts.add(valid);
        reports.push_back(std::move(r));
    }
    fs::path out(c.out_dir);
    write_jsonl(out / "canonical.jsonl", canonical);
    write_jsonl(out / "reports.jsonl", reports);
    auto f = counts.fraction();
    write_file_atomic(out / "validity.json",
                      json{{"n_records", f.denominator}, {"n_valid", f.numerator}, {"validity", optional_number(f.value())}}
                              .dump(2) +
                          "\n");
    echo_config(app, sub, out);
    std::cout << "validity: " << fmt4(f.value()) << " (" << f.numerator << "/" << f.denominator << ")\n";
    return 0;
}

// ---------------------------------------------------------------- verify

struct VerifyOptions {
    std::string corpus;
    VerifierOptions verifiers;
};

int run_verify(const VerifyOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    const auto& registry = c.registry();
    auto traces = load_traces(o.corpus, registry);
    auto loaded = load_verifiers(o.verifiers);
    auto ctx = loaded.context(registry);
    std::vector<VerdictMap> results(traces.size());
    parallel_for(traces.size(), c.jobs, [&](std::size_t i) { results[i] = verify_trace(traces[i], ctx); });
    std::vector<json> records;
    std::map<std::string, std::size_t> tally;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (const auto& node : traces[i].nodes) {
            auto it = results[i].find(node.id);
            if (it == results[i].end()) {
                continue;
            }
            for (const auto& v : it->second) {
                records.push_back(to_json(v, traces[i].trace_id));
                ++tally[std::string(to_string(v.verifier)) + "." + std::string(to_string(v.status))];
            }
        }
    }
    fs::path out(c.out_dir);
    write_jsonl(out / "verdicts.jsonl", records);
    echo_config(app, sub, out);
    std::cout << "traces: " << traces.size() << "  verdicts: " << records.size() << "\n";
    for (const auto& [key, n] : tally) {
        std::cout << "  " << key << ": " << n << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- filter

struct FilterOptions {
    std::string corpus;
    std::string verdicts;
    double tau = 0.5;
    bool no_de_prune = false;
};

int run_filter(const FilterOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    const auto& registry = c.registry();
    auto traces = load_traces(o.corpus, registry);
    auto verdicts = parse_verdicts(read_file(o.verdicts), o.verdicts);
    FilterConfig cfg{o.tau, !o.no_de_prune};
    auto result = filter_corpus(traces, verdicts, cfg, registry);
    std::vector<json> kept;
    for (const auto& t : result.kept) {
        kept.push_back(to_json(t));
    }
    fs::path out(c.out_dir);
    write_jsonl(out / "kept.jsonl", kept);
    write_jsonl(out / "rejects.jsonl", result.rejects());
    write_file_atomic(out / "stats.json", result.stats.to_json().dump(2) + "\n");
    echo_config(app, sub, out);
    const auto& s = result.stats;
    std::cout << "traces: " << s.n_traces << "  kept: " << s.n_kept << "  refined: " << s.n_refined
              << "  discarded: " << s.n_discarded << "  errors: " << s.n_errors << "\n"
              << "dti_discard_fraction: " << fmt4(s.dti_discard_fraction()) << "\n"
              << "de_refined_fraction: " << fmt4(s.de_refined_fraction()) << "\n"
              << "coverage: " << fmt4(s.coverage()) << "\n";
    return 0;
}

// ---------------------------------------------------------------- metrics

struct MetricsOptions {
    std::string raw;
    std::string corpus;
    std::string verdicts;
    std::string lexicon;
};

int run_metrics(const MetricsOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    const auto& registry = c.registry();
    if (o.raw.empty() && o.corpus.empty()) {
        throw ConfigError("metrics: give --raw or --corpus");
    }
    MetricsReport m;
    std::vector<ReasoningTrace> traces;
    if (!o.raw.empty()) {
        auto records = load_raw(o.raw, registry);
        m.validity = validity(records, registry);
        if (o.corpus.empty()) {
            for (auto& r : records) {
                if (r.outcome && r.outcome->ok() && validate_graph(*r.outcome->trace, registry).valid) {
                    traces.push_back(std::move(*r.outcome->trace));
                }
            }
        }
    }
    if (!o.corpus.empty()) {
        traces = load_traces(o.corpus, registry);
        if (o.raw.empty()) {
            ValidityCounts counts;
            for (const auto& t : traces) {
                counts.add(validate_graph(t, registry).valid);
            }
            m.validity = counts.fraction();
        }
    }
    if (!o.lexicon.empty()) {
        m.verifiability = verifiability(traces, Lexicon::load(o.lexicon), registry);
    }
    if (!o.verdicts.empty()) {
        auto all = parse_verdicts(read_file(o.verdicts), o.verdicts);
        std::map<std::string, VerdictMap> in_scope;
        std::vector<Verdict> flat;
        for (const auto& t : traces) {
            auto it = all.find(t.trace_id);
            if (it == all.end()) {
                continue;
            }
            in_scope.insert(*it);
            for (const auto& [node, vs] : it->second) {
                flat.insert(flat.end(), vs.begin(), vs.end());
            }
        }
        m.dti = dti_score(flat);
        m.de = de_score(traces, in_scope);
    }
    m.n_traces = traces.size();
    fs::path out(c.out_dir);
    write_file_atomic(out / "metrics.json", m.to_json().dump(2) + "\n");
    echo_config(app, sub, out);
    std::cout << m.to_table();
    return 0;
}

// ---------------------------------------------------------------- label

struct LabelOptions {
    std::string counts;
    std::string meta;
    bool pseudobulk = false;
    double alpha = 0.05;
    std::size_t top_n = 25;
    std::size_t n_nonreg = 100;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    std::size_t n_test = 0;
    std::string traces;
};

int run_label(const LabelOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    auto counts = read_counts_tsv(o.counts);
    counts.check();
    auto meta = read_sample_meta(o.meta);
    std::vector<std::string> warnings;
    if (o.pseudobulk) {
        auto pb = pseudobulk(counts, meta);
        counts = std::move(pb.matrix);
        meta = std::move(pb.samples);
        warnings = std::move(pb.warnings);
    }
    std::vector<PairAnalysis> analyses;
    std::vector<QAExample> examples;
    json pairs = json::array();
    LabelingOptions lopts{o.top_n, o.n_nonreg};
    for (const auto& [pert, ctx] : analysis_pairs(meta)) {
        PairAnalysis pa;
        try {
            pa = analyze_pair(counts, meta, pert, ctx, o.alpha, c.jobs);
        } catch (const DomainError& e) {
            warnings.push_back(e.what());
            continue;
        }
        auto set = build_examples(pa, o.seed, lopts);
        std::size_t up = 0, down = 0, ns = 0, failed = 0;
        for (const auto& r : pa.results) {
            if (r.status != FitStatus::Ok) {
                ++failed;
            } else if (r.label == DELabel::Up) {
                ++up;
            } else if (r.label == DELabel::Down) {
                ++down;
            } else {
                ++ns;
            }
        }
        pairs.push_back({{"perturbation_id", pert},
                         {"context_id", ctx},
                         {"n_up", up},
                         {"n_down", down},
                         {"n_ns", ns},
                         {"n_not_fitted", failed},
                         {"selected_up", set.n_up},
                         {"selected_down", set.n_down},
                         {"selected_ns", set.n_ns},
                         {"shortfall_up", set.shortfall_up},
                         {"shortfall_down", set.shortfall_down},
                         {"shortfall_ns", set.shortfall_ns}});
        examples.insert(examples.end(), set.examples.begin(), set.examples.end());
        analyses.push_back(std::move(pa));
    }
    fs::path out(c.out_dir);
    write_file_atomic(out / "de_results.tsv", de_results_tsv(analyses));
    auto to_records = [](const std::vector<QAExample>& xs) {
        std::vector<json> r;
        for (const auto& x : xs) {
            r.push_back(to_json(x));
        }
        return r;
    };
    write_jsonl(out / "examples.jsonl", to_records(examples));
    json summary = {{"pairs", pairs}, {"n_examples", examples.size()}, {"warnings", warnings}};
    if (!examples.empty()) {
        SplitSpec spec;
        if (o.n_test > 0) {
            spec.n_test = o.n_test;
        } else {
            spec.test_fraction = o.test_fraction;
        }
        auto split = split_by_perturbation(examples, spec, o.seed);
        write_jsonl(out / "train.jsonl", to_records(split.train));
        write_jsonl(out / "test.jsonl", to_records(split.test));
        summary["split"] = {{"train_perturbations", split.train_perturbations},
                            {"test_perturbations", split.test_perturbations},
                            {"n_train", split.train.size()},
                            {"n_test", split.test.size()},
                            {"n_dropped", split.n_dropped}};
        if (!o.traces.empty()) {
            auto traces = load_traces(o.traces, c.registry());
            auto leak = leakage_overlap(split.test, traces);
            summary["leakage"] = {{"de_overlap", leak.de_overlap},
                                  {"de_total", leak.de_total},
                                  {"de_fraction", optional_number(leak.de_fraction())},
                                  {"doc_overlap", leak.doc_overlap},
                                  {"doc_total", leak.doc_total},
                                  {"doc_fraction", optional_number(leak.doc_fraction())}};
        }
    } else {
        write_jsonl(out / "train.jsonl", {});
        write_jsonl(out / "test.jsonl", {});
    }
    write_file_atomic(out / "label_summary.json", summary.dump(2) + "\n");
    echo_config(app, sub, out);
    std::cout << "pairs: " << analyses.size() << "  examples: " << examples.size() << "\n";
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- qa-eval

struct QaOptions {
    std::string train;
    std::string test;
    std::string fingerprints;
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::vector<std::string> methods = {"random", "mean", "knn"};
};

int run_qa_eval(const QaOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    auto train = parse_examples(read_file(o.train), o.train);
    auto test = parse_examples(read_file(o.test), o.test);
    std::optional<FingerprintSet> fps;
    json report = {{"k", o.k}, {"seed", o.seed}, {"methods", json::array()}};
    fs::path out(c.out_dir);
    std::vector<std::string> warnings;
    std::string tables;
    for (const auto& method : o.methods) {
        std::vector<Prediction> preds;
        if (method == "random") {
            preds = predict_random(test, o.seed);
        } else if (method == "mean") {
            preds = predict_mean(test, train);
        } else if (method == "knn") {
            if (o.fingerprints.empty()) {
                throw ConfigError("qa-eval: the knn baseline needs --fingerprints");
            }
            if (!fps) {
                fps = FingerprintSet::load(o.fingerprints);
            }
            preds = predict_knn(test, train, *fps, o.k, c.jobs, &warnings);
        } else {
            throw ConfigError("qa-eval: unknown method " + method);
        }
        std::vector<json> records;
        for (const auto& p : preds) {
            records.push_back(to_json(p));
        }
        write_jsonl(out / ("predictions_" + method + ".jsonl"), records);
        auto ev = evaluate(preds, method);
        report["methods"].push_back(ev.to_json());
        tables += ev.to_table() + "\n";
    }
    report["warnings"] = warnings;
    write_file_atomic(out / "report.json", report.dump(2) + "\n");
    echo_config(app, sub, out);
    std::cout << tables;
    return 0;
}

// ---------------------------------------------------------------- pipeline

struct PipelineCliOptions {
    std::string inputs;
    std::string provider = "stub";
    std::string replay_dir;
    std::string endpoint;
    int timeout = 120;
    std::size_t provider_concurrency = 1;
    std::string record_dir;
    std::string templates = VCTRACE_DEFAULT_TEMPLATES;
    std::string kg_nodes;
    std::string kg_edges;
    std::vector<std::string> docs;
    std::size_t max_neighbors = 100;
    std::size_t k_docs = 5;
    double kg_min_similarity = 0.5;
    double tau = 0.5;
    bool no_de_prune = false;
    bool one_step = false;
    bool include_sections = false;
    VerifierOptions verifiers;
};

int run_pipeline_cmd(const PipelineCliOptions& o, Common& c, const CLI::App& app, const CLI::App& sub) {
    const auto& registry = c.registry();
    auto templates = TemplateSet::load(o.templates);
    std::unique_ptr<GenerationProvider> provider;
    if (o.provider == "stub") {
        provider = std::make_unique<StubProvider>(templates.stub_report, templates.stub_construct);
    } else if (o.provider == "replay") {
        if (o.replay_dir.empty()) {
            throw ConfigError("pipeline: replay mode needs --replay-dir");
        }
        provider = std::make_unique<ReplayProvider>(o.replay_dir);
    } else {
        if (o.endpoint.empty()) {
            throw ConfigError("pipeline: live mode needs --endpoint");
        }
        provider = std::make_unique<HttpProvider>(o.endpoint, std::chrono::seconds(o.timeout), o.provider_concurrency);
    }
    std::unique_ptr<RecordingProvider> recorder;
    const GenerationProvider* active = provider.get();
    if (!o.record_dir.empty()) {
        recorder = std::make_unique<RecordingProvider>(*provider, o.record_dir);
        active = recorder.get();
    }
    auto loaded = load_verifiers(o.verifiers);
    std::optional<KnowledgeGraph> kg;
    if (!o.kg_nodes.empty() || !o.kg_edges.empty()) {
        if (o.kg_nodes.empty() || o.kg_edges.empty()) {
            throw ConfigError("pipeline: --kg-nodes and --kg-edges go together");
        }
        kg = KnowledgeGraph::load(o.kg_nodes, o.kg_edges);
    }
    std::optional<DocumentStore> docs;
    if (!o.docs.empty()) {
        std::vector<fs::path> paths(o.docs.begin(), o.docs.end());
        docs = DocumentStore::load(paths);
    }
    JaccardSimilarity sim;
    PipelineResources res;
    res.lexicon = loaded.lexicon ? &*loaded.lexicon : nullptr;
    res.kg = kg ? &*kg : nullptr;
    res.docs = docs ? &*docs : nullptr;
    res.similarity = &sim;
    res.provider = active;
    res.templates = &templates;
    res.registry = &registry;
    res.retrieval = {o.max_neighbors, o.k_docs, o.kg_min_similarity};

    PipelineOptions popts;
    popts.one_step = o.one_step;
    popts.include_sections = o.include_sections;
    popts.filter = {o.tau, !o.no_de_prune};
    popts.jobs = c.jobs;

    auto inputs = parse_inputs(read_file(o.inputs), o.inputs);
    auto result = run_pipeline(inputs, res, loaded.context(registry), popts);

    fs::path out(c.out_dir);
    write_jsonl(out / "reports.jsonl", result.report_records());
    write_jsonl(out / "raw.jsonl", result.raw_records());
    write_jsonl(out / "verdicts.jsonl", result.verdict_records());
    write_jsonl(out / "kept.jsonl", result.kept_records());
    write_jsonl(out / "rejects.jsonl", result.reject_records());
    write_file_atomic(out / "summary.json", result.summary.dump(2) + "\n");
    echo_config(app, sub, out);
    for (const auto& s : result.summary.at("stages")) {
        std::cout << s.at("stage").get<std::string>() << ": " << s.at("count").get<std::size_t>() << "\n";
    }
    const auto& validity_json = result.summary.at("metrics").at("validity").at("value");
    std::cout << "validity: "
              << (validity_json.is_null() ? std::string("null") : format_fixed(validity_json.get<double>(), 4)) << "\n";
    return 0;
}

void print_error(std::string_view kind, std::string_view message, int code) {
    json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reasoning-trace toolkit: validate, verify, filter and score mechanistic explanations, and build "
                 "and evaluate expression QA benchmarks."};
    app.name("vctrace");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML configuration file; a [subcommand] section configures that subcommand");
    Common common;
    app.add_option("--jobs", common.jobs, "Worker thread cap")->check(CLI::PositiveNumber)->envname("VCTRACE_JOBS");

    ValidateOptions vo;
    auto* validate = app.add_subcommand("validate", "Parse and structurally validate a raw trace corpus");
    validate->add_option("--input", vo.input, "Raw corpus JSONL (trace_id, perturbation, context, raw_text)")
        ->required()
        ->check(CLI::ExistingFile);
    add_schema_option(validate, common);
    add_out_dir_option(validate, common);

    VerifyOptions ver;
    auto* verify = app.add_subcommand("verify", "Run the action verifiers over a canonical corpus");
    verify->add_option("--corpus", ver.corpus, "Canonical corpus JSONL")->required()->check(CLI::ExistingFile);
    add_verifier_options(verify, ver.verifiers, true);
    add_schema_option(verify, common);
    add_out_dir_option(verify, common);

    FilterOptions fo;
    auto* filter = app.add_subcommand("filter", "Discard low-confidence traces and prune contradicted genes");
    filter->add_option("--corpus", fo.corpus, "Canonical corpus JSONL")->required()->check(CLI::ExistingFile);
    filter->add_option("--verdicts", fo.verdicts, "Verdict JSONL")->required()->check(CLI::ExistingFile);
    filter->add_option("--tau", fo.tau, "DTI threshold")->check(CLI::Range(0.0, 1.0))->envname("VCTRACE_TAU");
    filter->add_flag("--no-de-prune", fo.no_de_prune, "Keep contradicted genes")->envname("VCTRACE_NO_DE_PRUNE");
    add_schema_option(filter, common);
    add_out_dir_option(filter, common);

    MetricsOptions mo;
    auto* metrics = app.add_subcommand("metrics", "Compute validity, verifiability, DTI and DE scores");
    metrics->add_option("--raw", mo.raw, "Raw corpus JSONL (validity denominator)")->check(CLI::ExistingFile);
    metrics->add_option("--corpus", mo.corpus, "Canonical corpus JSONL")->check(CLI::ExistingFile);
    metrics->add_option("--verdicts", mo.verdicts, "Verdict JSONL")->check(CLI::ExistingFile);
    metrics->add_option("--lexicon", mo.lexicon, "Entity lexicon TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_LEXICON");
    add_schema_option(metrics, common);
    add_out_dir_option(metrics, common);

    LabelOptions lo;
    auto* label = app.add_subcommand("label", "Differential expression labels, QA examples and splits");
    label->add_option("--counts", lo.counts, "Counts TSV (gene column, then one column per sample)")
        ->required()
        ->check(CLI::ExistingFile);
    label->add_option("--meta", lo.meta, "Sample metadata TSV")->required()->check(CLI::ExistingFile);
    label->add_flag("--pseudobulk", lo.pseudobulk, "Treat columns as cells and sum them into pseudobulk samples");
    label->add_option("--alpha", lo.alpha, "FDR level")->check(CLI::Range(0.0, 1.0))->envname("VCTRACE_ALPHA");
    label->add_option("--top-n", lo.top_n, "Regulated genes per direction")->envname("VCTRACE_TOP_N");
    label->add_option("--n-nonreg", lo.n_nonreg, "Sampled non-regulated genes")->envname("VCTRACE_N_NONREG");
    label->add_option("--seed", lo.seed, "Random seed")->envname("VCTRACE_SEED");
    auto* tf = label->add_option("--test-fraction", lo.test_fraction, "Fraction of perturbations held out")
                   ->check(CLI::Range(0.0, 1.0))
                   ->envname("VCTRACE_TEST_FRACTION");
    label->add_option("--n-test", lo.n_test, "Number of test examples (overrides --test-fraction)")
        ->envname("VCTRACE_N_TEST")
        ->excludes(tf);
    label->add_option("--traces", lo.traces, "Canonical corpus for the leakage check")->check(CLI::ExistingFile);
    add_schema_option(label, common);
    add_out_dir_option(label, common);

    QaOptions qo;
    auto* qa = app.add_subcommand("qa-eval", "Run the statistical baselines and report F1");
    qa->add_option("--train", qo.train, "Training examples JSONL")->required()->check(CLI::ExistingFile);
    qa->add_option("--test", qo.test, "Test examples JSONL")->required()->check(CLI::ExistingFile);
    qa->add_option("--fingerprints", qo.fingerprints, "Compound fingerprints TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_FINGERPRINTS");
    qa->add_option("--k", qo.k, "Neighbors for the kNN baseline")->check(CLI::PositiveNumber)->envname("VCTRACE_K");
    qa->add_option("--seed", qo.seed, "Random seed")->envname("VCTRACE_SEED");
    qa->add_option("--methods", qo.methods, "Baselines to run")
        ->delimiter(',')
        ->check(CLI::IsMember({"random", "mean", "knn"}));
    add_out_dir_option(qa, common);

    PipelineCliOptions po;
    auto* pipe = app.add_subcommand("pipeline", "Generate, validate, verify and filter traces for perturbations");
    pipe->add_option("--inputs", po.inputs, "Inputs JSONL (id, perturbation, context)")
        ->required()
        ->check(CLI::ExistingFile);
    pipe->add_option("--provider", po.provider, "Generation provider")
        ->check(CLI::IsMember({"stub", "replay", "live"}))
        ->envname("VCTRACE_PROVIDER");
    pipe->add_option("--replay-dir", po.replay_dir, "Replay cache directory")->envname("VCTRACE_REPLAY_DIR");
    pipe->add_option("--endpoint", po.endpoint, "Live provider endpoint (http://host:port/path)")
        ->envname("VCTRACE_ENDPOINT");
    pipe->add_option("--timeout", po.timeout, "Live provider timeout in seconds")->check(CLI::PositiveNumber);
    pipe->add_option("--provider-concurrency", po.provider_concurrency, "Concurrent live provider calls")
        ->check(CLI::PositiveNumber);
    pipe->add_option("--record-dir", po.record_dir, "Store every provider response in this replay cache");
    pipe->add_option("--templates", po.templates, "Prompt template directory")
        ->check(CLI::ExistingDirectory)
        ->envname("VCTRACE_TEMPLATES");
    pipe->add_option("--kg-nodes", po.kg_nodes, "Knowledge graph nodes TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_KG_NODES");
    pipe->add_option("--kg-edges", po.kg_edges, "Knowledge graph edges TSV")
        ->check(CLI::ExistingFile)
        ->envname("VCTRACE_KG_EDGES");
    pipe->add_option("--docs", po.docs, "Document store JSONL files")->check(CLI::ExistingFile);
    pipe->add_option("--max-neighbors", po.max_neighbors, "Knowledge graph neighbors per entity");
    pipe->add_option("--k-docs", po.k_docs, "Documents retrieved per source");
    pipe->add_option("--kg-min-similarity", po.kg_min_similarity, "Floor for similarity-only graph matches")
        ->check(CLI::Range(0.0, 1.0));
    pipe->add_option("--tau", po.tau, "DTI threshold")->check(CLI::Range(0.0, 1.0))->envname("VCTRACE_TAU");
    pipe->add_flag("--no-de-prune", po.no_de_prune, "Keep contradicted genes");
    pipe->add_flag("--one-step", po.one_step, "Skip the report and feed retrieval text to the constructor");
    pipe->add_flag("--include-sections", po.include_sections, "Show retrieval sections to the constructor");
    add_verifier_options(pipe, po.verifiers, false);
    add_schema_option(pipe, common);
    add_out_dir_option(pipe, common);

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        print_error("usage", e.what(), 2);
        return 2;
    }

    try {
        if (!common.out_dir.empty()) {
            fs::create_directories(common.out_dir);
        }
        if (*validate) {
            return run_validate(vo, common, app, *validate);
        }
        if (*verify) {
            return run_verify(ver, common, app, *verify);
        }
        if (*filter) {
            return run_filter(fo, common, app, *filter);
        }
        if (*metrics) {
            return run_metrics(mo, common, app, *metrics);
        }
        if (*label) {
            return run_label(lo, common, app, *label);
        }
        if (*qa) {
            return run_qa_eval(qo, common, app, *qa);
        }
        if (*pipe) {
            return run_pipeline_cmd(po, common, app, *pipe);
        }
    } catch (const InvariantError& e) {
        print_error(e.kind(), e.what(), 1);
        return 1;
    } catch (const Error& e) {
        print_error(e.kind(), e.what(), 2);
        return 2;
    } catch (const std::exception& e) {
        print_error("io", e.what(), 2);
        return 2;
    }
    return 2;
}
