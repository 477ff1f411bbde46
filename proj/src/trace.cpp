#include "vctrace/trace.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace vctrace {

const ArgValue* ActionNode::arg(std::string_view name) const {
    auto it = args.find(std::string(name));
    return it == args.end() ? nullptr : &it->second;
}

const ActionNode* ReasoningTrace::node(std::string_view id) const {
    for (const auto& n : nodes) {
        if (n.id == id) {
            return &n;
        }
    }
    return nullptr;
}

nlohmann::json StructuralReport::to_json() const {
    nlohmann::json j;
    j["syntactic_ok"] = syntactic_ok;
    j["schema_violations"] = nlohmann::json::array();
    for (const auto& v : schema_violations) {
        j["schema_violations"].push_back({{"node_id", v.node_id}, {"message", v.message}});
    }
    j["graph_violations"] = graph_violations;
    j["valid"] = valid;
    return j;
}

void canonicalize_args(ActionNode& node, const SchemaRegistry& registry) {
    const auto* schema = registry.find(node.primitive);
    if (!schema) {
        return;
    }
    for (auto& [name, value] : node.args) {
        const auto* spec = schema->find(name);
        if (!spec) {
            continue;
        }
        switch (spec->kind) {
        case ArgKind::Enum:
            if (value.type == ArgValue::Type::Token || value.type == ArgValue::Type::String) {
                value = ArgValue::token(fold(value.text));
            }
            break;
        case ArgKind::Entity:
        case ArgKind::Text:
            if (value.type == ArgValue::Type::Token || value.type == ArgValue::Type::Number) {
                value.type = ArgValue::Type::String;
            }
            break;
        case ArgKind::Number:
            if (value.type == ArgValue::Type::String && is_decimal_number(value.text)) {
                value.type = ArgValue::Type::Number;
            }
            break;
        case ArgKind::EntityList:
            break;
        }
    }
}

std::vector<std::string> validate_node(const ActionNode& node, const SchemaRegistry& registry) {
    std::vector<std::string> out;
    if (!is_identifier(node.id)) {
        out.push_back("invalid node id: '" + node.id + "'");
    }
    const auto* schema = registry.find(node.primitive);
    if (!schema) {
        out.push_back("unknown primitive: " + node.primitive);
        return out;
    }
    for (const auto& spec : schema->args) {
        if (spec.required && !node.args.count(spec.name)) {
            out.push_back("missing required arg: " + spec.name);
        }
    }
    auto has_newline = [](const std::string& s) { return s.find('\n') != std::string::npos; };
    for (const auto& [name, value] : node.args) {
        const auto* spec = schema->find(name);
        if (!spec) {
            out.push_back("unknown arg: " + name);
            continue;
        }
        const bool is_list = value.type == ArgValue::Type::List;
        if (spec->kind == ArgKind::EntityList) {
            if (!is_list) {
                out.push_back("expected list for " + name);
            } else if (value.items.empty()) {
                out.push_back("empty list for " + name);
            } else {
                for (const auto& item : value.items) {
                    if (trim(item).empty()) {
                        out.push_back("empty list member in " + name);
                    } else if (has_newline(item)) {
                        out.push_back("newline in value of " + name);
                    }
                }
            }
            continue;
        }
        if (is_list) {
            out.push_back("expected single value for " + name);
            continue;
        }
        if (has_newline(value.text)) {
            out.push_back("newline in value of " + name);
            continue;
        }
        switch (spec->kind) {
        case ArgKind::Enum:
            if (!spec->allows(value.text)) {
                out.push_back("invalid enum value for " + name + ": " + value.text + " (expected " +
                              join(spec->enum_values, "|") + ")");
            }
            break;
        case ArgKind::Number:
            if (!is_decimal_number(value.text)) {
                out.push_back("invalid number for " + name + ": " + value.text);
            }
            break;
        case ArgKind::Entity:
            if (trim(value.text).empty()) {
                out.push_back("empty value for " + name);
            }
            break;
        case ArgKind::Text:
        case ArgKind::EntityList:
            break;
        }
    }
    return out;
}

namespace {

// Adjacency over unique node ids, ignoring edges with unknown endpoints.
struct Graph {
    std::vector<std::string> ids;
    std::map<std::string, std::size_t, std::less<>> index;
    std::vector<std::vector<std::size_t>> out;

    explicit Graph(const ReasoningTrace& trace) {
        for (const auto& n : trace.nodes) {
            if (index.emplace(n.id, ids.size()).second) {
                ids.push_back(n.id);
            }
        }
        out.resize(ids.size());
        for (const auto& e : trace.edges) {
            auto a = index.find(e.src);
            auto b = index.find(e.dst);
            if (a != index.end() && b != index.end()) {
                out[a->second].push_back(b->second);
            }
        }
    }
};

}  // namespace

std::vector<std::string> find_cycle(const ReasoningTrace& trace) {
    Graph g(trace);
    const auto n = g.ids.size();
    std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
    std::vector<std::size_t> stack_nodes;
    std::vector<std::size_t> stack_pos;

    for (std::size_t root = 0; root < n; ++root) {
        if (color[root] != 0) {
            continue;
        }
        stack_nodes = {root};
        stack_pos = {0};
        color[root] = 1;
        while (!stack_nodes.empty()) {
            auto u = stack_nodes.back();
            auto& pos = stack_pos.back();
            if (pos < g.out[u].size()) {
                auto v = g.out[u][pos++];
                if (color[v] == 1) {
                    std::vector<std::string> cycle;
                    auto it = std::find(stack_nodes.begin(), stack_nodes.end(), v);
                    for (; it != stack_nodes.end(); ++it) {
                        cycle.push_back(g.ids[*it]);
                    }
                    cycle.push_back(g.ids[v]);
                    return cycle;
                }
                if (color[v] == 0) {
                    color[v] = 1;
                    stack_nodes.push_back(v);
                    stack_pos.push_back(0);
                }
            } else {
                color[u] = 2;
                stack_nodes.pop_back();
                stack_pos.pop_back();
            }
        }
    }
    return {};
}

StructuralReport validate_graph(const ReasoningTrace& trace, const SchemaRegistry& registry) {
    StructuralReport report;
    if (trace.nodes.empty()) {
        report.graph_violations.push_back("empty trace: no action nodes");
    }
    std::set<std::string> seen;
    std::set<std::string> reported_dups;
    for (const auto& n : trace.nodes) {
        if (!seen.insert(n.id).second && reported_dups.insert(n.id).second) {
            report.graph_violations.push_back("duplicate node id: " + n.id);
        }
        for (auto& msg : validate_node(n, registry)) {
            report.schema_violations.push_back({n.id, std::move(msg)});
        }
    }
    for (const auto& e : trace.edges) {
        for (const auto* end : {&e.src, &e.dst}) {
            if (!seen.count(*end)) {
                report.graph_violations.push_back("dangling edge: " + e.src + " -> " + e.dst +
                                                  " (unknown node " + *end + ")");
                break;
            }
        }
    }
    auto cycle = find_cycle(trace);
    if (!cycle.empty()) {
        report.graph_violations.push_back("cycle: " + join(cycle, " -> "));
    }
    report.valid = report.syntactic_ok && report.schema_violations.empty() && report.graph_violations.empty();
    return report;
}

std::vector<std::string> topological_order(const ReasoningTrace& trace) {
    std::set<std::string> seen;
    for (const auto& n : trace.nodes) {
        if (!seen.insert(n.id).second) {
            throw ValidationError("duplicate node id: " + n.id);
        }
    }
    for (const auto& e : trace.edges) {
        if (!seen.count(e.src) || !seen.count(e.dst)) {
            throw ValidationError("dangling edge: " + e.src + " -> " + e.dst);
        }
    }
    Graph g(trace);
    std::vector<std::size_t> indegree(g.ids.size(), 0);
    for (const auto& targets : g.out) {
        for (auto v : targets) {
            ++indegree[v];
        }
    }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < g.ids.size(); ++i) {
        if (indegree[i] == 0) {
            ready.insert(i);
        }
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto u = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(g.ids[u]);
        for (auto v : g.out[u]) {
            if (--indegree[v] == 0) {
                ready.insert(v);
            }
        }
    }
    if (order.size() != g.ids.size()) {
        throw CycleError("cycle: " + join(find_cycle(trace), " -> "));
    }
    return order;
}

std::set<std::string> ancestors(const ReasoningTrace& trace, std::string_view node_id) {
    std::map<std::string, std::vector<std::string>, std::less<>> parents;
    for (const auto& e : trace.edges) {
        parents[e.dst].push_back(e.src);
    }
    std::set<std::string> out;
    std::vector<std::string> frontier{std::string(node_id)};
    while (!frontier.empty()) {
        auto cur = std::move(frontier.back());
        frontier.pop_back();
        auto it = parents.find(cur);
        if (it == parents.end()) {
            continue;
        }
        for (const auto& p : it->second) {
            if (out.insert(p).second) {
                frontier.push_back(p);
            }
        }
    }
    out.erase(std::string(node_id));
    return out;
}

nlohmann::json to_json(const ReasoningTrace& trace) {
    nlohmann::json j;
    j["trace_id"] = trace.trace_id;
    j["perturbation"] = trace.perturbation;
    j["context"] = trace.context;
    j["explain"] = trace.explain;
    auto nodes = nlohmann::json::array();
    for (const auto& n : trace.nodes) {
        nlohmann::json args = nlohmann::json::object();
        for (const auto& [name, v] : n.args) {
            if (v.type == ArgValue::Type::List) {
                args[name] = v.items;
            } else {
                args[name] = v.text;
            }
        }
        nodes.push_back({{"id", n.id}, {"primitive", n.primitive}, {"args", std::move(args)}});
    }
    j["nodes"] = std::move(nodes);
    auto edges = nlohmann::json::array();
    for (const auto& e : trace.edges) {
        edges.push_back({e.src, e.dst});
    }
    j["edges"] = std::move(edges);
    return j;
}

namespace {

std::string json_string(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw FormatError(std::string("trace record: field '") + key + "' must be a string");
    }
    return j.at(key).get<std::string>();
}

std::string scalar_text(const nlohmann::json& v, const std::string& arg) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number() || v.is_boolean()) {
        return v.dump();
    }
    throw FormatError("trace record: argument '" + arg + "' has unsupported JSON type");
}

}  // namespace

ReasoningTrace trace_from_json(const nlohmann::json& j, const SchemaRegistry& registry) {
    if (!j.is_object()) {
        throw FormatError("trace record must be a JSON object");
    }
    ReasoningTrace t;
    t.trace_id = json_string(j, "trace_id");
    t.perturbation = json_string(j, "perturbation");
    t.context = json_string(j, "context");
    t.explain = json_string(j, "explain");
    if (!j.contains("nodes") || !j.at("nodes").is_array()) {
        throw FormatError("trace record: field 'nodes' must be an array");
    }
    for (const auto& jn : j.at("nodes")) {
        if (!jn.is_object()) {
            throw FormatError("trace record: node must be an object");
        }
        ActionNode node;
        node.id = json_string(jn, "id");
        node.primitive = json_string(jn, "primitive");
        if (jn.contains("args")) {
            if (!jn.at("args").is_object()) {
                throw FormatError("trace record: node args must be an object");
            }
            for (const auto& [name, v] : jn.at("args").items()) {
                if (v.is_array()) {
                    std::vector<std::string> items;
                    for (const auto& item : v) {
                        items.push_back(scalar_text(item, name));
                    }
                    node.args[name] = ArgValue::list(std::move(items));
                } else if (v.is_number()) {
                    node.args[name] = ArgValue::number(v.dump());
                } else {
                    node.args[name] = ArgValue::string(scalar_text(v, name));
                }
            }
        }
        canonicalize_args(node, registry);
        t.nodes.push_back(std::move(node));
    }
    if (j.contains("edges")) {
        if (!j.at("edges").is_array()) {
            throw FormatError("trace record: field 'edges' must be an array");
        }
        for (const auto& je : j.at("edges")) {
            if (!je.is_array() || je.size() != 2 || !je[0].is_string() || !je[1].is_string()) {
                throw FormatError("trace record: edge must be a [src, dst] pair of strings");
            }
            t.edges.push_back({je[0].get<std::string>(), je[1].get<std::string>()});
        }
        std::sort(t.edges.begin(), t.edges.end());
    }
    return t;
}

std::vector<ReasoningTrace> parse_trace_corpus(std::string_view text, const std::string& source,
                                               const SchemaRegistry& registry) {
    std::vector<ReasoningTrace> out;
    std::set<std::string> ids;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto where = source + ":" + std::to_string(line_no);
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw FormatError(where + ": invalid JSON");
        }
        try {
            out.push_back(trace_from_json(j, registry));
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
        if (!ids.insert(out.back().trace_id).second) {
            throw FormatError(where + ": duplicate trace_id " + out.back().trace_id);
        }
    });
    return out;
}

}  // namespace vctrace
