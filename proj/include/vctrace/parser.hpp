#pragma once

#include "vctrace/schema.hpp"
#include "vctrace/trace.hpp"

#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

struct SyntaxError {
    std::size_t line = 0;  // 1-based
    std::string message;

    bool operator==(const SyntaxError&) const = default;
};

/// `trace` is present exactly when `syntax_errors` is empty.
struct ParseOutcome {
    std::optional<ReasoningTrace> trace;
    std::vector<SyntaxError> syntax_errors;

    bool ok() const { return trace.has_value(); }
};

/// Parses an `<explain>...</explain>` block followed by a `<dag>...</dag>`
/// block. Inside the dag each non-blank, non-`#` line is either
///
///     id: primitive(key=value, ...)
///     id -> id
///
/// Values are double-quoted strings (`\"` and `\\` escapes), decimal numbers,
/// bare tokens, or bracketed lists. Text outside the two blocks is ignored.
/// All syntax errors are collected; parsing never stops at the first one.
/// Edges of the returned trace are sorted by (src, dst) and argument values
/// are canonicalized against `registry`.
ParseOutcome parse_trace(std::string_view text, std::string trace_id, std::string perturbation,
                         std::string context,
                         const SchemaRegistry& registry = SchemaRegistry::builtin());

/// Canonical text form: explain verbatim, nodes in order with arguments in
/// schema order, edges sorted. Throws ValidationError for invalid traces.
std::string render_trace(const ReasoningTrace& trace,
                         const SchemaRegistry& registry = SchemaRegistry::builtin());

/// Quoted string literal in trace syntax.
std::string quote_value(std::string_view s);

/// One input line of a raw corpus (JSONL with trace_id, perturbation,
/// context, raw_text). Exactly one of `outcome` / `record_error` is set.
struct CorpusRecord {
    std::size_t line = 0;
    std::string trace_id;
    std::optional<ParseOutcome> outcome;
    std::string record_error;
};

/// Streams one record per non-blank input line, in order. Malformed JSON
/// yields a record-level error and the stream continues. Throws IoError if
/// the stream fails.
void parse_corpus(std::istream& in, const SchemaRegistry& registry,
                  const std::function<void(CorpusRecord)>& sink);
std::vector<CorpusRecord> parse_corpus(std::istream& in,
                                       const SchemaRegistry& registry = SchemaRegistry::builtin());

}  // namespace vctrace
