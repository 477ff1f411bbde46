#pragma once

#include "vctrace/schema.hpp"
#include "vctrace/trace.hpp"
#include "vctrace/verifiers.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vctrace {

struct FilterConfig {
    double tau = 0.5;  // DTI threshold; scores strictly below discard the trace
    bool de_prune = true;
};

enum class FilterDecision { Kept, Refined, Discarded };

std::string_view to_string(FilterDecision d);

namespace reasons {
inline constexpr const char* kDtiBelowThreshold = "dti_below_threshold";
inline constexpr const char* kAllNodesPruned = "all_nodes_pruned";
inline constexpr const char* kDeGenesPruned = "de_genes_pruned";
inline constexpr const char* kNoContradiction = "no_contradiction";
}  // namespace reasons

struct FilterOutcome {
    FilterDecision decision = FilterDecision::Kept;
    std::string reason;
    std::vector<std::pair<std::string, std::string>> pruned;  // (node id, gene)
    std::vector<std::string> removed_nodes;
    std::vector<std::string> low_dti_nodes;  // offending binds_to nodes when discarded

    nlohmann::json details() const;
};

/// Discards the trace when any DTI verdict scores below tau (unknown DTI
/// never discards); otherwise prunes genes with contradicted DE verdicts,
/// dropping regulates_expression nodes that lose every gene together with
/// their incident edges. Throws ValidationError if the input is invalid and
/// InvariantError if the output would be.
std::pair<FilterOutcome, std::optional<ReasoningTrace>> filter_trace(
    const ReasoningTrace& trace, const VerdictMap& verdicts, const FilterConfig& config,
    const SchemaRegistry& registry = SchemaRegistry::builtin());

struct FilterStats {
    double tau = 0.5;
    std::size_t n_traces = 0;
    std::size_t n_kept = 0;
    std::size_t n_refined = 0;
    std::size_t n_discarded = 0;
    std::size_t n_errors = 0;
    std::size_t n_discarded_dti = 0;
    std::size_t n_de_nodes = 0;          // regulates_expression nodes with a DE verdict, in surviving traces
    std::size_t n_de_nodes_refined = 0;  // ... of which at least one gene was pruned
    std::size_t n_traces_with_de = 0;
    std::size_t n_traces_de_refined = 0;
    std::size_t n_traces_covered = 0;  // containing binds_to or regulates_expression
    std::map<std::string, std::size_t> reason_counts;

    std::optional<double> dti_discard_fraction() const;
    std::optional<double> de_refined_fraction() const;
    std::optional<double> de_refined_trace_fraction() const;
    std::optional<double> coverage() const;

    nlohmann::json to_json() const;
};

struct FilterRecord {
    std::string trace_id;
    std::optional<FilterOutcome> outcome;
    std::string error;  // set when the trace could not be filtered
};

struct CorpusFilterResult {
    std::vector<ReasoningTrace> kept;  // kept and refined traces, input order
    std::vector<FilterRecord> records;
    FilterStats stats;

    /// Rejects JSONL records (trace_id, decision, reason, details) for discarded traces and errors.
    std::vector<nlohmann::json> rejects() const;
};

/// Verdicts are looked up by trace id; traces without any get an empty map.
CorpusFilterResult filter_corpus(const std::vector<ReasoningTrace>& traces,
                                 const std::map<std::string, VerdictMap>& verdicts, const FilterConfig& config,
                                 const SchemaRegistry& registry = SchemaRegistry::builtin());

}  // namespace vctrace
