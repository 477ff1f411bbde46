#pragma once

#include "vctrace/schema.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vctrace {

/// One argument value as written in a trace. Numbers keep their decimal text.
struct ArgValue {
    enum class Type { String, Number, Token, List };

    Type type = Type::String;
    std::string text;                // String, Number, Token
    std::vector<std::string> items;  // List

    static ArgValue string(std::string s) { return {Type::String, std::move(s), {}}; }
    static ArgValue number(std::string s) { return {Type::Number, std::move(s), {}}; }
    static ArgValue token(std::string s) { return {Type::Token, std::move(s), {}}; }
    static ArgValue list(std::vector<std::string> v) { return {Type::List, {}, std::move(v)}; }

    bool operator==(const ArgValue&) const = default;
};

struct ActionNode {
    std::string id;
    std::string primitive;
    std::map<std::string, ArgValue> args;

    const ArgValue* arg(std::string_view name) const;

    bool operator==(const ActionNode&) const = default;
};

struct Edge {
    std::string src;
    std::string dst;

    auto operator<=>(const Edge&) const = default;
};

struct ReasoningTrace {
    std::string trace_id;
    std::string perturbation;
    std::string context;
    std::string explain;
    std::vector<ActionNode> nodes;
    std::vector<Edge> edges;

    const ActionNode* node(std::string_view id) const;

    bool operator==(const ReasoningTrace&) const = default;
};

struct SchemaViolation {
    std::string node_id;
    std::string message;

    bool operator==(const SchemaViolation&) const = default;
};

struct StructuralReport {
    bool syntactic_ok = true;
    std::vector<SchemaViolation> schema_violations;
    std::vector<std::string> graph_violations;
    bool valid = false;

    nlohmann::json to_json() const;
};

/// Coerces argument values to the representation their schema kind implies:
/// enum tokens lowercased, bare words for entity/text args become strings,
/// quoted decimals for number args become numbers. Unknown primitives and
/// arguments are left untouched for the validator to report.
void canonicalize_args(ActionNode& node, const SchemaRegistry& registry);

/// Schema violations of a single node; empty when the node conforms.
std::vector<std::string> validate_node(const ActionNode& node, const SchemaRegistry& registry);

StructuralReport validate_graph(const ReasoningTrace& trace, const SchemaRegistry& registry);

/// One directed cycle as a closed walk (first id repeated at the end), or
/// empty when the graph over the trace's node ids is acyclic.
std::vector<std::string> find_cycle(const ReasoningTrace& trace);

/// Stable Kahn ordering: among ready nodes the earliest in `trace.nodes`
/// goes first. Throws CycleError naming a cycle, ValidationError on
/// duplicate ids or dangling edges.
std::vector<std::string> topological_order(const ReasoningTrace& trace);

/// Ids of every node with a directed path to `node_id`.
std::set<std::string> ancestors(const ReasoningTrace& trace, std::string_view node_id);

nlohmann::json to_json(const ReasoningTrace& trace);
/// Throws FormatError on missing fields or wrong JSON types.
ReasoningTrace trace_from_json(const nlohmann::json& j, const SchemaRegistry& registry);

/// Canonical corpus JSONL, one trace per line. Throws FormatError naming the
/// line for malformed records or duplicate trace ids.
std::vector<ReasoningTrace> parse_trace_corpus(std::string_view text, const std::string& source,
                                               const SchemaRegistry& registry);

}  // namespace vctrace
