#include "vctrace/filter.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"

#include <algorithm>
#include <set>

namespace vctrace {

std::string_view to_string(FilterDecision d) {
    switch (d) {
    case FilterDecision::Kept:
        return "kept";
    case FilterDecision::Refined:
        return "refined";
    case FilterDecision::Discarded:
        return "discarded";
    }
    return "kept";
}

nlohmann::json FilterOutcome::details() const {
    nlohmann::json j = nlohmann::json::object();
    if (!low_dti_nodes.empty()) {
        j["low_dti_nodes"] = low_dti_nodes;
    }
    if (!pruned.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& [node, gene] : pruned) {
            arr.push_back({{"node_id", node}, {"gene", gene}});
        }
        j["pruned"] = std::move(arr);
    }
    if (!removed_nodes.empty()) {
        j["removed_nodes"] = removed_nodes;
    }
    return j;
}

std::pair<FilterOutcome, std::optional<ReasoningTrace>> filter_trace(const ReasoningTrace& trace,
                                                                     const VerdictMap& verdicts,
                                                                     const FilterConfig& config,
                                                                     const SchemaRegistry& registry) {
    if (!(config.tau >= 0.0 && config.tau <= 1.0)) {
        throw DomainError("tau must lie in [0, 1]");
    }
    auto report = validate_graph(trace, registry);
    if (!report.valid) {
        throw ValidationError("cannot filter invalid trace '" + trace.trace_id + "'");
    }

    FilterOutcome outcome;
    for (const auto& node : trace.nodes) {
        auto it = verdicts.find(node.id);
        if (it == verdicts.end()) {
            continue;
        }
        for (const auto& v : it->second) {
            if (v.verifier == VerifierKind::Dti && v.score && *v.score < config.tau) {
                outcome.low_dti_nodes.push_back(node.id);
                break;
            }
        }
    }
    if (!outcome.low_dti_nodes.empty()) {
        outcome.decision = FilterDecision::Discarded;
        outcome.reason = reasons::kDtiBelowThreshold;
        return {std::move(outcome), std::nullopt};
    }

    ReasoningTrace out = trace;
    if (config.de_prune) {
        std::set<std::string> removed;
        for (auto& node : out.nodes) {
            if (node.primitive != "regulates_expression") {
                continue;
            }
            auto it = verdicts.find(node.id);
            auto genes_it = node.args.find("genes");
            if (it == verdicts.end() || genes_it == node.args.end() ||
                genes_it->second.type != ArgValue::Type::List) {
                continue;
            }
            std::set<std::string> contradicted;
            for (const auto& v : it->second) {
                if (v.verifier == VerifierKind::De && v.status == VerdictStatus::Contradicted && v.subject) {
                    contradicted.insert(*v.subject);
                }
            }
            if (contradicted.empty()) {
                continue;
            }
            auto& items = genes_it->second.items;
            std::vector<std::string> remaining;
            for (const auto& g : items) {
                if (contradicted.count(g)) {
                    outcome.pruned.emplace_back(node.id, g);
                } else {
                    remaining.push_back(g);
                }
            }
            items = std::move(remaining);
            if (items.empty()) {
                removed.insert(node.id);
            }
        }
        if (!removed.empty()) {
            std::erase_if(out.nodes, [&](const ActionNode& n) { return removed.count(n.id) > 0; });
            std::erase_if(out.edges, [&](const Edge& e) { return removed.count(e.src) || removed.count(e.dst); });
            for (const auto& n : trace.nodes) {
                if (removed.count(n.id)) {
                    outcome.removed_nodes.push_back(n.id);
                }
            }
        }
    }

    if (out.nodes.empty()) {
        outcome.decision = FilterDecision::Discarded;
        outcome.reason = reasons::kAllNodesPruned;
        outcome.pruned.clear();
        outcome.removed_nodes.clear();
        return {std::move(outcome), std::nullopt};
    }
    if (!outcome.pruned.empty() || !outcome.removed_nodes.empty()) {
        outcome.decision = FilterDecision::Refined;
        outcome.reason = reasons::kDeGenesPruned;
    } else {
        outcome.decision = FilterDecision::Kept;
        outcome.reason = reasons::kNoContradiction;
    }
    if (!validate_graph(out, registry).valid) {
        throw InvariantError("filtering produced an invalid trace for '" + trace.trace_id + "'");
    }
    return {std::move(outcome), std::move(out)};
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) {
        return std::nullopt;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> FilterStats::dti_discard_fraction() const { return ratio(n_discarded_dti, n_traces); }
std::optional<double> FilterStats::de_refined_fraction() const { return ratio(n_de_nodes_refined, n_de_nodes); }
std::optional<double> FilterStats::de_refined_trace_fraction() const {
    return ratio(n_traces_de_refined, n_traces_with_de);
}
std::optional<double> FilterStats::coverage() const { return ratio(n_traces_covered, n_traces); }

nlohmann::json FilterStats::to_json() const {
    nlohmann::json j;
    j["tau"] = tau;
    j["n_traces"] = n_traces;
    j["n_kept"] = n_kept;
    j["n_refined"] = n_refined;
    j["n_discarded"] = n_discarded;
    j["n_errors"] = n_errors;
    j["n_discarded_dti"] = n_discarded_dti;
    j["dti_discard_fraction"] = optional_number(dti_discard_fraction());
    j["n_de_nodes"] = n_de_nodes;
    j["n_de_nodes_refined"] = n_de_nodes_refined;
    j["de_refined_fraction"] = optional_number(de_refined_fraction());
    j["n_traces_with_de"] = n_traces_with_de;
    j["n_traces_de_refined"] = n_traces_de_refined;
    j["de_refined_trace_fraction"] = optional_number(de_refined_trace_fraction());
    j["n_traces_covered"] = n_traces_covered;
    j["coverage"] = optional_number(coverage());
    j["reason_counts"] = reason_counts;
    return j;
}

std::vector<nlohmann::json> CorpusFilterResult::rejects() const {
    std::vector<nlohmann::json> out;
    for (const auto& r : records) {
        if (!r.error.empty()) {
            out.push_back({{"trace_id", r.trace_id},
                           {"decision", "error"},
                           {"reason", "filter_error"},
                           {"details", {{"message", r.error}}}});
        } else if (r.outcome && r.outcome->decision == FilterDecision::Discarded) {
            out.push_back({{"trace_id", r.trace_id},
                           {"decision", to_string(r.outcome->decision)},
                           {"reason", r.outcome->reason},
                           {"details", r.outcome->details()}});
        }
    }
    return out;
}

CorpusFilterResult filter_corpus(const std::vector<ReasoningTrace>& traces,
                                 const std::map<std::string, VerdictMap>& verdicts, const FilterConfig& config,
                                 const SchemaRegistry& registry) {
    CorpusFilterResult result;
    auto& stats = result.stats;
    stats.tau = config.tau;
    const VerdictMap empty;
    for (const auto& trace : traces) {
        ++stats.n_traces;
        const bool covered = std::any_of(trace.nodes.begin(), trace.nodes.end(), [](const ActionNode& n) {
            return n.primitive == "binds_to" || n.primitive == "regulates_expression";
        });
        if (covered) {
            ++stats.n_traces_covered;
        }
        FilterRecord rec;
        rec.trace_id = trace.trace_id;
        auto vit = verdicts.find(trace.trace_id);
        const auto& vm = vit == verdicts.end() ? empty : vit->second;
        try {
            auto [outcome, kept] = filter_trace(trace, vm, config, registry);
            ++stats.reason_counts[outcome.reason];
            switch (outcome.decision) {
            case FilterDecision::Kept:
                ++stats.n_kept;
                break;
            case FilterDecision::Refined:
                ++stats.n_refined;
                break;
            case FilterDecision::Discarded:
                ++stats.n_discarded;
                break;
            }
            if (outcome.reason == reasons::kDtiBelowThreshold) {
                ++stats.n_discarded_dti;
            } else {
                std::set<std::string> refined_nodes;
                for (const auto& [node, gene] : outcome.pruned) {
                    refined_nodes.insert(node);
                }
                // all_nodes_pruned clears the prune list; every DE node with a
                // contradiction was refined in that case.
                bool any_de = false;
                for (const auto& n : trace.nodes) {
                    if (n.primitive != "regulates_expression") {
                        continue;
                    }
                    auto it = vm.find(n.id);
                    if (it == vm.end() ||
                        std::none_of(it->second.begin(), it->second.end(),
                                     [](const Verdict& v) { return v.verifier == VerifierKind::De; })) {
                        continue;
                    }
                    any_de = true;
                    ++stats.n_de_nodes;
                    const bool has_contradiction =
                        std::any_of(it->second.begin(), it->second.end(), [](const Verdict& v) {
                            return v.verifier == VerifierKind::De && v.status == VerdictStatus::Contradicted;
                        });
                    if (refined_nodes.count(n.id) ||
                        (outcome.reason == reasons::kAllNodesPruned && has_contradiction && config.de_prune)) {
                        ++stats.n_de_nodes_refined;
                    }
                }
                if (any_de) {
                    ++stats.n_traces_with_de;
                    if (outcome.decision == FilterDecision::Refined || outcome.reason == reasons::kAllNodesPruned) {
                        ++stats.n_traces_de_refined;
                    }
                }
            }
            rec.outcome = std::move(outcome);
            if (kept) {
                result.kept.push_back(std::move(*kept));
            }
        } catch (const InvariantError&) {
            throw;
        } catch (const Error& e) {
            ++stats.n_errors;
            rec.error = e.what();
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

}  // namespace vctrace
