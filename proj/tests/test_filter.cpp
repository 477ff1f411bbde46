#include "doctest.h"

#include "generators.hpp"
#include "support.hpp"

#include "vctrace/error.hpp"
#include "vctrace/filter.hpp"
#include "vctrace/parser.hpp"

#include <algorithm>

using namespace vctrace;

namespace {

ReasoningTrace trace_of(const std::string& id, const std::string& dag) {
    auto o = parse_trace("<explain>x</explain><dag>\n" + dag + "\n</dag>", id, "p", "c");
    REQUIRE(o.ok());
    return *o.trace;
}

Verdict dti(const std::string& node, std::optional<double> score) {
    return {node, std::nullopt, score, score ? VerdictStatus::Supported : VerdictStatus::Unknown, VerifierKind::Dti};
}

Verdict de(const std::string& node, const std::string& gene, VerdictStatus s) {
    std::optional<double> score;
    if (s != VerdictStatus::Unknown) {
        score = s == VerdictStatus::Supported ? 1.0 : 0.0;
    }
    return {node, gene, score, s, VerifierKind::De};
}

// Random verdicts for every verifiable node of `t`.
VerdictMap random_verdicts(vt::Rng& rng, const ReasoningTrace& t) {
    VerdictMap m;
    for (const auto& n : t.nodes) {
        if (n.primitive == "binds_to") {
            std::optional<double> s;
            if (vt::coin(rng, 0.8)) {
                s = static_cast<double>(vt::pick(rng, 101)) / 100.0;
            }
            m[n.id].push_back(dti(n.id, s));
        } else if (n.primitive == "regulates_expression") {
            for (const auto& g : n.args.at("genes").items) {
                auto s = static_cast<VerdictStatus>(vt::pick(rng, 3));
                m[n.id].push_back(de(n.id, g, s));
            }
        }
    }
    return m;
}

// Random valid traces rich in binds_to and regulates_expression nodes.
ReasoningTrace verifiable_trace(vt::Rng& rng, int id) {
    std::string dag;
    auto n = 1 + vt::pick(rng, 6);
    for (std::size_t i = 0; i < n; ++i) {
        auto nid = "n" + std::to_string(i);
        switch (vt::pick(rng, 3)) {
        case 0:
            dag += nid + ": binds_to(actor=\"d\", target=\"T" + std::to_string(i) + "\")\n";
            break;
        case 1: {
            std::string genes;
            for (std::size_t g = 0; g < 1 + vt::pick(rng, 4); ++g) {
                genes += (g ? ", " : "") + std::string("G") + std::to_string(g);
            }
            dag += nid + ": regulates_expression(actor=\"d\", genes=[" + genes + "], direction=up)\n";
            break;
        }
        default:
            dag += nid + ": participates_in(entity=\"d\", process=\"p" + std::to_string(i) + "\")\n";
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (vt::coin(rng, 0.35)) {
                dag += "n" + std::to_string(i) + " -> n" + std::to_string(j) + "\n";
            }
        }
    }
    return trace_of("r" + std::to_string(id), dag);
}

}  // namespace

TEST_SUITE("filter") {

TEST_CASE("sub-threshold DTI discards") {
    auto t = trace_of("a", "n1: binds_to(actor=\"x\", target=\"y\")");
    VerdictMap v{{"n1", {dti("n1", 0.3)}}};
    auto [o, kept] = filter_trace(t, v, {0.5, true});
    CHECK(o.decision == FilterDecision::Discarded);
    CHECK(o.reason == "dti_below_threshold");
    CHECK(o.low_dti_nodes == std::vector<std::string>{"n1"});
    CHECK_FALSE(kept.has_value());
}

TEST_CASE("threshold is strict and unknown DTI never discards") {
    auto t = trace_of("a", "n1: binds_to(actor=\"x\", target=\"y\")");
    CHECK(filter_trace(t, {{"n1", {dti("n1", 0.5)}}}, {0.5, true}).first.decision == FilterDecision::Kept);
    CHECK(filter_trace(t, {{"n1", {dti("n1", std::nullopt)}}}, {1.0, true}).first.decision == FilterDecision::Kept);
    CHECK(filter_trace(t, {{"n1", {dti("n1", 0.0)}}}, {0.0, true}).first.decision == FilterDecision::Kept);
    CHECK(filter_trace(t, {{"n1", {dti("n1", 0.99)}}}, {1.0, true}).first.decision == FilterDecision::Discarded);
}

TEST_CASE("contradicted genes are pruned") {
    auto t = trace_of("a", "n1: regulates_expression(actor=\"x\", genes=[A, B], direction=up)");
    VerdictMap v{{"n1", {de("n1", "A", VerdictStatus::Supported), de("n1", "B", VerdictStatus::Contradicted)}}};
    auto [o, kept] = filter_trace(t, v, {});
    CHECK(o.decision == FilterDecision::Refined);
    CHECK(o.reason == "de_genes_pruned");
    REQUIRE(kept);
    CHECK(kept->nodes[0].args.at("genes") == ArgValue::list({"A"}));
    CHECK(o.pruned == std::vector<std::pair<std::string, std::string>>{{"n1", "B"}});

    auto [o2, kept2] = filter_trace(t, v, {0.5, false});
    CHECK(o2.decision == FilterDecision::Kept);
    CHECK(*kept2 == t);
}

TEST_CASE("clean traces pass unchanged") {
    auto t = trace_of("a",
                      "n1: binds_to(actor=\"x\", target=\"y\")\n"
                      "n2: regulates_expression(actor=\"y\", genes=[A, B], direction=up)\n"
                      "n1 -> n2");
    VerdictMap v{{"n1", {dti("n1", 0.9)}},
                 {"n2", {de("n2", "A", VerdictStatus::Supported), de("n2", "B", VerdictStatus::Unknown)}}};
    auto [o, kept] = filter_trace(t, v, {});
    CHECK(o.decision == FilterDecision::Kept);
    CHECK(o.reason == "no_contradiction");
    CHECK(*kept == t);
}

TEST_CASE("emptied nodes are removed without reconnecting edges") {
    auto t = trace_of("a",
                      "a: set_context(cell_model=\"K\")\n"
                      "b: regulates_expression(actor=\"x\", genes=[A], direction=down)\n"
                      "c: participates_in(entity=\"x\", process=\"y\")\n"
                      "a -> b\nb -> c");
    VerdictMap v{{"b", {de("b", "A", VerdictStatus::Contradicted)}}};
    auto [o, kept] = filter_trace(t, v, {});
    CHECK(o.decision == FilterDecision::Refined);
    CHECK(o.removed_nodes == std::vector<std::string>{"b"});
    REQUIRE(kept);
    CHECK(kept->nodes.size() == 2);
    CHECK(kept->edges.empty());

    auto lone = trace_of("z", "b: regulates_expression(actor=\"x\", genes=[A], direction=down)");
    auto [o2, kept2] = filter_trace(lone, {{"b", {de("b", "A", VerdictStatus::Contradicted)}}}, {});
    CHECK(o2.decision == FilterDecision::Discarded);
    CHECK(o2.reason == "all_nodes_pruned");
    CHECK_FALSE(kept2);
}

TEST_CASE("invalid input and bad tau") {
    auto t = trace_of("a", "n1: binds_to(actor=\"x\")");
    CHECK_THROWS_AS(filter_trace(t, {}, {}), ValidationError);
    auto ok = trace_of("a", "n1: binds_to(actor=\"x\", target=\"y\")");
    CHECK_THROWS_AS(filter_trace(ok, {}, {1.5, true}), DomainError);
}

TEST_CASE("corpus statistics") {
    std::vector<ReasoningTrace> traces;
    std::map<std::string, VerdictMap> verdicts;
    for (int i = 0; i < 10; ++i) {
        auto id = "t" + std::to_string(i);
        traces.push_back(trace_of(id, "n1: binds_to(actor=\"x\", target=\"y\")"));
        verdicts[id]["n1"].push_back(dti("n1", i < 3 ? 0.2 : 0.8));
    }
    auto r = filter_corpus(traces, verdicts, {});
    CHECK(r.stats.n_discarded == 3);
    CHECK(*r.stats.dti_discard_fraction() == doctest::Approx(0.3));
    CHECK_FALSE(r.stats.de_refined_fraction().has_value());
    CHECK(r.kept.size() == 7);
    CHECK(r.rejects().size() == 3);
    CHECK(r.stats.to_json().at("de_refined_fraction").is_null());

    auto empty = filter_corpus({}, {}, {});
    CHECK(empty.stats.n_traces == 0);
    CHECK_FALSE(empty.stats.dti_discard_fraction().has_value());
    CHECK_FALSE(empty.stats.coverage().has_value());
}

TEST_CASE("fixture corpus") {
    const auto& reg = SchemaRegistry::builtin();
    auto traces = parse_trace_corpus(vt::slurp(vt::fixture("filter_corpus.jsonl")), "c", reg);
    auto verdicts = parse_verdicts(vt::slurp(vt::fixture("filter_verdicts.jsonl")), "v");
    auto r = filter_corpus(traces, verdicts, {});
    CHECK(traces.size() == 10);
    CHECK(*r.stats.dti_discard_fraction() == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r.stats.n_refined == 2);
    CHECK(r.kept.size() == 7);
}

TEST_CASE("property: raising tau only removes traces") {
    vt::Rng rng(31);
    for (int round = 0; round < 50; ++round) {
        std::vector<ReasoningTrace> traces;
        std::map<std::string, VerdictMap> verdicts;
        for (int i = 0; i < 20; ++i) {
            traces.push_back(verifiable_trace(rng, i));
            verdicts[traces.back().trace_id] = random_verdicts(rng, traces.back());
        }
        double lo = static_cast<double>(vt::pick(rng, 101)) / 100.0;
        double hi = std::min(1.0, lo + static_cast<double>(vt::pick(rng, 101)) / 100.0);
        auto a = filter_corpus(traces, verdicts, {lo, true});
        auto b = filter_corpus(traces, verdicts, {hi, true});
        std::set<std::string> kept_lo, kept_hi;
        for (const auto& t : a.kept) {
            kept_lo.insert(t.trace_id);
        }
        for (const auto& t : b.kept) {
            kept_hi.insert(t.trace_id);
        }
        CHECK(std::includes(kept_lo.begin(), kept_lo.end(), kept_hi.begin(), kept_hi.end()));
    }
}

TEST_CASE("property: filtering is conservative") {
    vt::Rng rng(37);
    for (int i = 0; i < 400; ++i) {
        auto t = verifiable_trace(rng, i);
        auto v = random_verdicts(rng, t);
        auto [o, kept] = filter_trace(t, v, {0.4, true});
        if (!kept) {
            continue;
        }
        CHECK(validate_graph(*kept, SchemaRegistry::builtin()).valid);
        // Every surviving node is an original node minus contradicted genes.
        std::set<std::string> removed(o.removed_nodes.begin(), o.removed_nodes.end());
        std::size_t k = 0;
        for (const auto& orig : t.nodes) {
            if (removed.count(orig.id)) {
                continue;
            }
            const auto& now = kept->nodes.at(k++);
            CHECK(now.id == orig.id);
            CHECK(now.primitive == orig.primitive);
            for (const auto& [name, val] : orig.args) {
                if (name != "genes") {
                    CHECK(now.args.at(name) == val);
                    continue;
                }
                std::vector<std::string> expect;
                for (const auto& g : val.items) {
                    bool contradicted = false;
                    for (const auto& vd : v[orig.id]) {
                        contradicted |= vd.subject == g && vd.status == VerdictStatus::Contradicted;
                    }
                    if (!contradicted) {
                        expect.push_back(g);
                    }
                }
                CHECK(now.args.at(name).items == expect);
            }
        }
        CHECK(k == kept->nodes.size());
        for (const auto& e : kept->edges) {
            CHECK(std::binary_search(t.edges.begin(), t.edges.end(), e));
        }
        // Determinism.
        auto again = filter_trace(t, v, {0.4, true});
        CHECK(*again.second == *kept);
    }
}

}
