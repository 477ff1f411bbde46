#pragma once

#include "vctrace/lexicon.hpp"
#include "vctrace/parser.hpp"
#include "vctrace/schema.hpp"
#include "vctrace/trace.hpp"
#include "vctrace/verifiers.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vctrace {

/// A fraction with its denominator. `value` is absent when the denominator
/// is zero: an undefined metric is never reported as 0.
struct Fraction {
    std::size_t numerator = 0;
    std::size_t denominator = 0;

    std::optional<double> value() const;
};

/// Counts are additive, so partial results over corpus shards can be merged.
struct ValidityCounts {
    std::size_t n_records = 0;
    std::size_t n_valid = 0;

    void add(bool valid);
    void merge(const ValidityCounts& other);
    Fraction fraction() const { return {n_valid, n_records}; }
};

struct Verifiability {
    Fraction micro;
    std::optional<double> macro;
    std::size_t n_traces_in_macro = 0;
};

struct DtiScore {
    std::optional<double> mean;
    std::size_t n_scored = 0;
    std::size_t n_unknown = 0;
};

struct MetricsReport {
    Fraction validity;
    Verifiability verifiability;
    DtiScore dti;
    Fraction de;
    std::size_t n_traces = 0;  // valid traces evaluated

    nlohmann::json to_json() const;
    /// Text table with columns Validity, Verifiability, DTI, DE.
    std::string to_table() const;
};

/// Fraction of records that parse and validate. Records with a
/// record-level error count as invalid.
Fraction validity(const std::vector<CorpusRecord>& corpus,
                  const SchemaRegistry& registry = SchemaRegistry::builtin());

/// Entity-kind arguments (each list member counts once) resolvable in the lexicon.
Verifiability verifiability(const std::vector<ReasoningTrace>& traces, const Lexicon& lexicon,
                            const SchemaRegistry& registry = SchemaRegistry::builtin());

/// Mean score over DTI verdicts that carry a score.
DtiScore dti_score(const std::vector<Verdict>& verdicts);

/// Traces with at least one supported DE verdict, over traces containing a
/// regulates_expression node.
Fraction de_score(const std::vector<ReasoningTrace>& traces, const std::map<std::string, VerdictMap>& verdicts);

}  // namespace vctrace
