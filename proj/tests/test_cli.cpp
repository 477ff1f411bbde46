#include "doctest.h"

#include "generators.hpp"
#include "simulate.hpp"
#include "support.hpp"

#include "vctrace/de_labeler.hpp"
#include "vctrace/io.hpp"

#include <nlohmann/json.hpp>

#include <set>

using namespace vctrace;
using vt::run_cli;
using vt::shell_quote;

namespace {

nlohmann::json error_json(const vt::CliResult& r) {
    auto line = r.err.substr(0, r.err.find('\n'));
    return nlohmann::json::parse(line, nullptr, false);
}

std::string out_arg(const vt::TempDir& d, const std::string& sub = "out") { return "--out-dir " + shell_quote((d / sub).string()); }

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& p) {
    std::vector<nlohmann::json> out;
    for_each_line(vt::slurp(p), [&](std::size_t, std::string_view line) { out.push_back(nlohmann::json::parse(line)); });
    return out;
}

// Simulated counts + metadata for 6 perturbations in one context, written as TSVs.
void write_label_inputs(const vt::TempDir& d) {
    std::mt19937_64 rng(2718);
    vt::SimSpec spec;
    spec.n_genes = 220;
    spec.n_treated = spec.n_control = 3;
    spec.alpha = 0.05;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int p = 0; p < 6; ++p) {
        pairs.emplace_back("P" + std::to_string(p), "C1");
    }
    auto data = vt::simulate_dataset(rng, spec, pairs, [](std::size_t p, std::size_t g) {
        if (g < 30 + 2 * p) {
            return 2.5;
        }
        if (g >= 100 && g < 110 + p) {
            return -2.5;
        }
        return 0.0;
    });
    std::string counts = "gene";
    for (const auto& s : data.counts.samples) {
        counts += "\t" + s;
    }
    counts += "\n";
    for (std::size_t g = 0; g < data.counts.genes.size(); ++g) {
        counts += data.counts.genes[g];
        for (auto v : data.counts.row(g)) {
            counts += "\t" + std::to_string(v);
        }
        counts += "\n";
    }
    vt::spit(d / "counts.tsv", counts);
    std::string meta = "sample_id\tperturbation_id\tcontext_id\tcondition\treplicate\n";
    for (const auto& m : data.meta) {
        meta += m.sample_id + "\t" + m.perturbation_id + "\t" + m.context_id + "\t" +
                std::string(to_string(m.condition)) + "\t" + std::to_string(m.replicate) + "\n";
    }
    vt::spit(d / "meta.tsv", meta);
}

const std::string kPipelineArgs =
    "pipeline --inputs pipeline_inputs.jsonl --lexicon lexicon.tsv --kg-nodes kg_nodes.tsv --kg-edges kg_edges.tsv "
    "--docs docs.jsonl --dti-table dti.tsv --de-table de.tsv --loc-table loc.tsv --pheno-table pheno.tsv ";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    auto help = run_cli("--help");
    CHECK(help.code == 0);
    for (auto sub : {"validate", "verify", "filter", "metrics", "label", "qa-eval", "pipeline"}) {
        CHECK(help.out.find(sub) != std::string::npos);
    }
    CHECK(run_cli("validate --help").code == 0);

    auto none = run_cli("");
    CHECK(none.code == 2);
    auto unknown = run_cli("validate --input validity_corpus.jsonl --out-dir /tmp/x --bogus");
    CHECK(unknown.code == 2);
    CHECK(error_json(unknown).at("error") == "usage");
    CHECK(error_json(unknown).at("exit_code") == 2);
    CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("validate: fixture corpus") {
    vt::TempDir d;
    auto r = run_cli("validate --input validity_corpus.jsonl " + out_arg(d));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("validity: 0.7500 (15/20)") != std::string::npos);
    auto v = nlohmann::json::parse(vt::slurp(d / "out/validity.json"));
    CHECK(v.at("validity") == 0.75);
    CHECK(v.at("n_valid") == 15);
    CHECK(read_jsonl(d / "out/canonical.jsonl").size() == 15);
    CHECK(read_jsonl(d / "out/reports.jsonl").size() == 20);
    CHECK(std::filesystem::exists(d / "out/effective_config.toml"));
}

TEST_CASE("validate: empty and missing input") {
    vt::TempDir d;
    vt::spit(d / "empty.jsonl", "");
    auto r = run_cli("validate --input " + shell_quote((d / "empty.jsonl").string()) + " " + out_arg(d));
    CHECK(r.code == 0);
    CHECK(r.out.find("null") != std::string::npos);
    CHECK(nlohmann::json::parse(vt::slurp(d / "out/validity.json")).at("validity").is_null());

    auto missing = run_cli("validate --input /nonexistent/corpus.jsonl " + out_arg(d));
    CHECK(missing.code == 2);
    CHECK(error_json(missing).is_object());
}

TEST_CASE("validate -> verify -> metrics chain") {
    vt::TempDir d;
    REQUIRE(run_cli("validate --input metrics_raw.jsonl " + out_arg(d, "v")).code == 0);
    auto ver = run_cli("verify --corpus " + shell_quote((d / "v/canonical.jsonl").string()) +
                       " --lexicon lexicon.tsv --de-table de.tsv --dti-table dti.tsv --loc-table loc.tsv "
                       "--pheno-table pheno.tsv " +
                       out_arg(d, "w"));
    REQUIRE(ver.code == 0);
    CHECK(ver.out.find("dti.supported: 2") != std::string::npos);
    CHECK(ver.out.find("de.contradicted: 1") != std::string::npos);
    auto m = run_cli("metrics --raw metrics_raw.jsonl --lexicon lexicon.tsv --verdicts " +
                     shell_quote((d / "w/verdicts.jsonl").string()) + " " + out_arg(d, "m"));
    REQUIRE(m.code == 0);
    auto j = nlohmann::json::parse(vt::slurp(d / "m/metrics.json"));
    CHECK(j.at("validity").at("value").get<double>() == doctest::Approx(0.8));
    CHECK(j.at("verifiability_micro").at("value").get<double>() == doctest::Approx(0.92));
    CHECK(j.at("dti_score").at("value").get<double>() == doctest::Approx(0.7));
    CHECK(j.at("de_score").at("value").get<double>() == doctest::Approx(0.5));
    auto header = m.out.substr(0, m.out.find('\n'));
    CHECK(header.find("Validity") < header.find("Verifiability"));
    CHECK(header.find("DTI") < header.find("DE"));
}

TEST_CASE("verify: bad table header and no verifiable actions") {
    vt::TempDir d;
    vt::spit(d / "bad.tsv", "drug\ttarget\nx\ty\n");
    auto r = run_cli("verify --corpus filter_corpus.jsonl --lexicon lexicon.tsv --dti-table " +
                     shell_quote((d / "bad.tsv").string()) + " " + out_arg(d));
    CHECK(r.code == 2);

    vt::spit(d / "plain.jsonl",
             R"({"trace_id": "t", "perturbation": "p", "context": "c", "explain": "x", "nodes": [{"id": "n1", "primitive": "set_context", "args": {"cell_model": "K562"}}], "edges": []})"
             "\n");
    auto ok = run_cli("verify --corpus " + shell_quote((d / "plain.jsonl").string()) + " --lexicon lexicon.tsv " +
                      out_arg(d, "o2"));
    CHECK(ok.code == 0);
    CHECK(vt::slurp(d / "o2/verdicts.jsonl").empty());
}

TEST_CASE("filter: fixture and extreme thresholds") {
    vt::TempDir d;
    auto r = run_cli("filter --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d));
    REQUIRE(r.code == 0);
    auto stats = nlohmann::json::parse(vt::slurp(d / "out/stats.json"));
    CHECK(stats.at("dti_discard_fraction").get<double>() == doctest::Approx(0.3));
    CHECK(read_jsonl(d / "out/rejects.jsonl").size() == 3);

    REQUIRE(run_cli("filter --tau 0 --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d, "z"))
                .code == 0);
    CHECK(nlohmann::json::parse(vt::slurp(d / "z/stats.json")).at("n_discarded_dti") == 0);

    REQUIRE(run_cli("filter --tau 1 --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d, "one"))
                .code == 0);
    // Every trace with a scored binds_to below 1.0 goes.
    auto verdicts = read_jsonl(vt::fixture("filter_verdicts.jsonl"));
    std::set<std::string> scored;
    for (const auto& v : verdicts) {
        if (v.at("verifier") == "dti" && !v.at("score").is_null() && v.at("score").get<double>() < 1.0) {
            scored.insert(v.at("trace_id").get<std::string>());
        }
    }
    CHECK(nlohmann::json::parse(vt::slurp(d / "one/stats.json")).at("n_discarded_dti") == scored.size());

    CHECK(run_cli("filter --tau 1.5 --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d, "bad"))
              .code == 2);
}

TEST_CASE("config file and environment") {
    vt::TempDir d;
    vt::spit(d / "cfg.toml", "[filter]\ntau = 0.0\n");
    auto r = run_cli("--config " + shell_quote((d / "cfg.toml").string()) +
                     " filter --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d));
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(vt::slurp(d / "out/stats.json")).at("n_discarded_dti") == 0);
    CHECK(vt::slurp(d / "out/effective_config.toml").find("tau") != std::string::npos);

    auto flag_wins = run_cli("--config " + shell_quote((d / "cfg.toml").string()) +
                             " filter --tau 0.5 --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " +
                             out_arg(d, "o2"));
    REQUIRE(flag_wins.code == 0);
    CHECK(nlohmann::json::parse(vt::slurp(d / "o2/stats.json")).at("n_discarded_dti") == 3);

    auto jobs = run_cli("--jobs 2 filter --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " +
                        out_arg(d, "o3"));
    CHECK(jobs.code == 0);
    CHECK(run_cli("--jobs 0 filter --corpus filter_corpus.jsonl --verdicts filter_verdicts.jsonl " + out_arg(d, "o4"))
              .code == 2);
}

TEST_CASE("label: simulated dataset") {
    vt::TempDir d;
    write_label_inputs(d);
    auto args = "label --counts " + shell_quote((d / "counts.tsv").string()) + " --meta " +
                shell_quote((d / "meta.tsv").string()) + " --seed 7 --n-nonreg 100 ";
    auto r = run_cli(args + out_arg(d, "a"));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto examples = read_jsonl(d / "a/examples.jsonl");
    auto de = DEGroundTruth::load(d / "a/de_results.tsv");
    CHECK(de.size() == 6 * 220);
    // Per pair: min(25, |up|) + min(25, |down|) + min(100, |ns|) de examples.
    std::map<std::string, std::size_t> de_count;
    for (const auto& e : examples) {
        if (e.at("task") == "de") {
            ++de_count[e.at("perturbation_id").get<std::string>()];
        }
    }
    auto rows = parse_tsv(vt::slurp(d / "a/de_results.tsv"), "de");
    std::map<std::string, std::array<std::size_t, 3>> tally;
    auto col = [&](const char* name) { return rows.column(name); };
    for (const auto& row : rows.rows) {
        auto& t = tally[row[col("perturbation_id")]];
        const auto& label = row[col("label")];
        const auto& status = row[col("status")];
        if (label == "up") {
            ++t[0];
        } else if (label == "down") {
            ++t[1];
        } else if (status == "ok") {
            ++t[2];
        }
    }
    REQUIRE(tally.size() == 6);
    for (const auto& [pert, t] : tally) {
        CHECK(de_count[pert] == std::min<std::size_t>(25, t[0]) + std::min<std::size_t>(25, t[1]) +
                                    std::min<std::size_t>(100, t[2]));
    }
    std::set<std::string> train_p, test_p;
    for (const auto& e : read_jsonl(d / "a/train.jsonl")) {
        train_p.insert(e.at("perturbation_id").get<std::string>());
    }
    for (const auto& e : read_jsonl(d / "a/test.jsonl")) {
        test_p.insert(e.at("perturbation_id").get<std::string>());
    }
    CHECK_FALSE(test_p.empty());
    for (const auto& p : test_p) {
        CHECK(train_p.count(p) == 0);
    }

    auto again = run_cli(args + out_arg(d, "b"));
    REQUIRE(again.code == 0);
    for (auto f : {"de_results.tsv", "examples.jsonl", "train.jsonl", "test.jsonl"}) {
        CHECK_MESSAGE(vt::slurp(d / "a" / f) == vt::slurp(d / "b" / f), f);
    }

    auto conflict = run_cli(args + "--test-fraction 0.2 --n-test 10 " + out_arg(d, "c"));
    CHECK(conflict.code == 2);
}

TEST_CASE("qa-eval") {
    vt::TempDir d;
    auto r = run_cli("qa-eval --train qa_train.jsonl --test qa_test.jsonl --fingerprints fingerprints.tsv --k 1 " +
                     out_arg(d));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto report = nlohmann::json::parse(vt::slurp(d / "out/report.json"));
    CHECK(report.is_object());
    for (auto m : {"random", "mean", "knn"}) {
        CHECK(std::filesystem::exists(d / "out" / (std::string("predictions_") + m + ".jsonl")));
    }
    CHECK(vt::slurp(d / "out/effective_config.toml").find("k=1") != std::string::npos);

    // The echoed configuration reproduces the run.
    auto echo = run_cli("--config " + shell_quote((d / "out/effective_config.toml").string()) + " qa-eval " +
                        out_arg(d, "again"));
    REQUIRE_MESSAGE(echo.code == 0, echo.err);
    CHECK(vt::slurp(d / "again/report.json") == vt::slurp(d / "out/report.json"));

    vt::spit(d / "fps.tsv", "compound_id\tn_bits\thex\nCHEM:a\t16\tf0f0\n");
    auto missing = run_cli("qa-eval --train qa_train.jsonl --test qa_test.jsonl --fingerprints " +
                           shell_quote((d / "fps.tsv").string()) + " " + out_arg(d, "m"));
    CHECK(missing.code == 2);
    CHECK(missing.err.find("CHEM:") != std::string::npos);
}

TEST_CASE("pipeline: replay twice is byte-identical") {
    vt::TempDir d;
    auto a = run_cli(kPipelineArgs + "--provider replay --replay-dir replay " + out_arg(d, "a"));
    REQUIRE_MESSAGE(a.code == 0, a.err);
    auto b = run_cli(kPipelineArgs + "--provider replay --replay-dir replay --jobs 3 " + out_arg(d, "b"));
    REQUIRE(b.code == 0);
    for (auto f : {"reports.jsonl", "raw.jsonl", "verdicts.jsonl", "kept.jsonl", "rejects.jsonl", "summary.json"}) {
        CHECK_MESSAGE(vt::slurp(d / "a" / f) == vt::slurp(d / "b" / f), f);
    }
    auto summary = nlohmann::json::parse(vt::slurp(d / "a/summary.json"));
    CHECK(summary.at("metrics").at("validity").at("value") == 1.0);
    auto rejects = read_jsonl(d / "a/rejects.jsonl");
    REQUIRE(rejects.size() == 1);
    CHECK(rejects[0].at("reason") == "dti_below_threshold");
}

TEST_CASE("pipeline: provider configuration errors") {
    vt::TempDir d;
    auto live = run_cli(kPipelineArgs + "--provider live " + out_arg(d));
    CHECK(live.code == 2);
    CHECK(error_json(live).at("error") == "config");
    auto replay = run_cli(kPipelineArgs + "--provider replay " + out_arg(d));
    CHECK(replay.code == 2);
    auto bad = run_cli(kPipelineArgs + "--provider psychic " + out_arg(d));
    CHECK(bad.code == 2);
}

TEST_CASE("pipeline: stub and one-step modes") {
    vt::TempDir d;
    auto stub = run_cli(kPipelineArgs + "--provider stub " + out_arg(d, "s"));
    REQUIRE_MESSAGE(stub.code == 0, stub.err);
    CHECK(nlohmann::json::parse(vt::slurp(d / "s/summary.json")).at("mode") == "two_stage");
    auto one = run_cli(kPipelineArgs + "--provider stub --one-step " + out_arg(d, "o"));
    REQUIRE(one.code == 0);
    auto summary = nlohmann::json::parse(vt::slurp(d / "o/summary.json"));
    CHECK(summary.at("mode") == "one_step");
    CHECK(summary.at("metrics").at("validity").at("value") == 1.0);
}

}
