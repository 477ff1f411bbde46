#include "vctrace/parser.hpp"

#include "vctrace/error.hpp"
#include "vctrace/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>

namespace vctrace {

namespace {

enum class Tag { ExplainOpen, ExplainClose, DagOpen, DagClose };

constexpr std::array<std::pair<Tag, std::string_view>, 4> kTags = {{
    {Tag::ExplainOpen, "<explain>"},
    {Tag::ExplainClose, "</explain>"},
    {Tag::DagOpen, "<dag>"},
    {Tag::DagClose, "</dag>"},
}};

struct TagHit {
    Tag tag;
    std::size_t pos;
    std::size_t line;
};

std::size_t line_at(std::string_view text, std::size_t pos) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

std::string_view tag_text(Tag t) {
    for (const auto& [tag, s] : kTags) {
        if (tag == t) {
            return s;
        }
    }
    return {};
}

bool is_bare_char(char c) {
    return is_word_char(c) || c == '_' || c == '.' || c == '+' || c == '-' || c == '/' || c == ':' || c == '%';
}

class LineParser {
public:
    LineParser(std::string_view line, std::size_t line_no, std::vector<SyntaxError>& errors)
        : s_(line), line_no_(line_no), errors_(errors) {}

    // Returns false after recording an error.
    bool parse_node(ActionNode& node) {
        auto colon = s_.find(':');
        auto paren = s_.find('(');
        if (colon == std::string_view::npos || (paren != std::string_view::npos && paren < colon)) {
            return fail("malformed node declaration: expected 'id: primitive(...)'");
        }
        auto id = trim(s_.substr(0, colon));
        if (!is_identifier(id)) {
            return fail("malformed node id '" + std::string(id) + "'");
        }
        node.id = std::string(id);
        if (paren == std::string_view::npos) {
            return fail("malformed node declaration: missing '(' after primitive");
        }
        auto prim = trim(s_.substr(colon + 1, paren - colon - 1));
        if (!is_identifier(prim)) {
            return fail("malformed primitive name '" + std::string(prim) + "'");
        }
        node.primitive = std::string(prim);
        pos_ = paren + 1;
        return parse_args(node);
    }

private:
    bool fail(std::string msg) {
        errors_.push_back({line_no_, std::move(msg)});
        return false;
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) {
            ++pos_;
        }
    }

    bool at_end() const { return pos_ >= s_.size(); }

    bool parse_args(ActionNode& node) {
        skip_ws();
        if (!at_end() && s_[pos_] == ')') {
            ++pos_;
            return finish();
        }
        while (true) {
            skip_ws();
            auto key_start = pos_;
            while (!at_end() && (is_word_char(s_[pos_]) || s_[pos_] == '_')) {
                ++pos_;
            }
            auto key = s_.substr(key_start, pos_ - key_start);
            if (!is_identifier(key)) {
                if (at_end()) {
                    return fail("unbalanced parentheses: missing ')'");
                }
                return fail("malformed argument name at column " + std::to_string(key_start + 1));
            }
            skip_ws();
            if (at_end() || s_[pos_] != '=') {
                return fail("expected '=' after argument '" + std::string(key) + "'");
            }
            ++pos_;
            skip_ws();
            ArgValue value;
            if (!parse_value(std::string(key), value)) {
                return false;
            }
            if (!node.args.emplace(std::string(key), std::move(value)).second) {
                return fail("duplicate argument: " + std::string(key));
            }
            skip_ws();
            if (at_end()) {
                return fail("unbalanced parentheses: missing ')'");
            }
            if (s_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (s_[pos_] == ')') {
                ++pos_;
                return finish();
            }
            return fail("expected ',' or ')' at column " + std::to_string(pos_ + 1));
        }
    }

    bool finish() {
        skip_ws();
        if (!at_end()) {
            return fail("unexpected text after ')'");
        }
        return true;
    }

    bool parse_quoted(std::string& out) {
        ++pos_;  // opening quote
        while (!at_end()) {
            char c = s_[pos_++];
            if (c == '"') {
                return true;
            }
            if (c == '\\' && !at_end() && (s_[pos_] == '"' || s_[pos_] == '\\')) {
                out += s_[pos_++];
                continue;
            }
            out += c;
        }
        return fail("unterminated string");
    }

    bool parse_bare(const std::string& key, std::string& out, std::string_view stops) {
        auto start = pos_;
        while (!at_end() && stops.find(s_[pos_]) == std::string_view::npos) {
            ++pos_;
        }
        auto raw = trim(s_.substr(start, pos_ - start));
        if (raw.empty()) {
            return fail("missing value for '" + key + "'");
        }
        if (raw.find_first_of(" \t") != std::string_view::npos) {
            return fail("unquoted string with spaces for '" + key + "': " + std::string(raw));
        }
        if (raw.find_first_of("\"[]()") != std::string_view::npos ||
            !std::all_of(raw.begin(), raw.end(), is_bare_char)) {
            return fail("invalid bare value for '" + key + "': " + std::string(raw));
        }
        out = std::string(raw);
        return true;
    }

    bool parse_value(const std::string& key, ArgValue& value) {
        if (at_end()) {
            return fail("missing value for '" + key + "'");
        }
        if (s_[pos_] == '"') {
            std::string text;
            if (!parse_quoted(text)) {
                return false;
            }
            value = ArgValue::string(std::move(text));
            return true;
        }
        if (s_[pos_] == '[') {
            ++pos_;
            std::vector<std::string> items;
            skip_ws();
            if (!at_end() && s_[pos_] == ']') {
                ++pos_;
                value = ArgValue::list(std::move(items));
                return true;
            }
            while (true) {
                skip_ws();
                if (at_end()) {
                    return fail("unbalanced brackets in '" + key + "'");
                }
                std::string item;
                if (s_[pos_] == '"') {
                    if (!parse_quoted(item)) {
                        return false;
                    }
                } else if (!parse_bare(key, item, ",]")) {
                    return false;
                }
                items.push_back(std::move(item));
                skip_ws();
                if (at_end()) {
                    return fail("unbalanced brackets in '" + key + "'");
                }
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (s_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                return fail("expected ',' or ']' in list '" + key + "'");
            }
            value = ArgValue::list(std::move(items));
            return true;
        }
        if (s_[pos_] == ']') {
            return fail("unbalanced brackets in '" + key + "'");
        }
        std::string text;
        if (!parse_bare(key, text, ",)")) {
            return false;
        }
        value = is_decimal_number(text) ? ArgValue::number(std::move(text)) : ArgValue::token(std::move(text));
        return true;
    }

    std::string_view s_;
    std::size_t line_no_;
    std::vector<SyntaxError>& errors_;
    std::size_t pos_ = 0;
};

bool parse_edge(std::string_view line, std::size_t line_no, std::vector<SyntaxError>& errors, Edge& edge) {
    auto arrow = line.find("->");
    auto src = trim(line.substr(0, arrow));
    auto dst = trim(line.substr(arrow + 2));
    if (src.empty()) {
        errors.push_back({line_no, "malformed edge: missing source"});
        return false;
    }
    if (dst.empty()) {
        errors.push_back({line_no, "malformed edge: missing target"});
        return false;
    }
    if (!is_identifier(src) || !is_identifier(dst)) {
        errors.push_back({line_no, "malformed edge: expected 'id -> id'"});
        return false;
    }
    edge = {std::string(src), std::string(dst)};
    return true;
}

void parse_dag_body(std::string_view body, std::size_t first_line, std::vector<SyntaxError>& errors,
                    std::vector<ActionNode>& nodes, std::vector<Edge>& edges) {
    std::size_t line_no = first_line;
    std::size_t start = 0;
    while (start <= body.size()) {
        auto end = body.find('\n', start);
        auto raw = body.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        auto line = trim(raw);
        if (!line.empty() && line.front() != '#') {
            // A node line carries '(' before any arrow; anything else with an
            // arrow is an edge.
            auto arrow = line.find("->");
            auto paren = line.find('(');
            if (arrow != std::string_view::npos && (paren == std::string_view::npos || arrow < paren)) {
                Edge e;
                if (parse_edge(line, line_no, errors, e)) {
                    edges.push_back(std::move(e));
                }
            } else {
                ActionNode node;
                LineParser p(line, line_no, errors);
                if (p.parse_node(node)) {
                    nodes.push_back(std::move(node));
                }
            }
        }
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
        ++line_no;
    }
}

}  // namespace

ParseOutcome parse_trace(std::string_view text, std::string trace_id, std::string perturbation,
                         std::string context, const SchemaRegistry& registry) {
    ParseOutcome outcome;
    auto& errors = outcome.syntax_errors;

    std::vector<TagHit> hits;
    for (const auto& [tag, s] : kTags) {
        for (auto pos = text.find(s); pos != std::string_view::npos; pos = text.find(s, pos + 1)) {
            hits.push_back({tag, pos, 0});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const TagHit& a, const TagHit& b) { return a.pos < b.pos; });
    for (auto& h : hits) {
        h.line = line_at(text, h.pos);
    }
    auto all_of_tag = [&](Tag t) {
        std::vector<const TagHit*> out;
        for (const auto& h : hits) {
            if (h.tag == t) {
                out.push_back(&h);
            }
        }
        return out;
    };
    auto eo = all_of_tag(Tag::ExplainOpen);
    auto ec = all_of_tag(Tag::ExplainClose);
    auto dopen = all_of_tag(Tag::DagOpen);
    auto dc = all_of_tag(Tag::DagClose);

    auto check_block = [&](const std::vector<const TagHit*>& opens, const std::vector<const TagHit*>& closes,
                           std::string_view name) {
        std::string n(name);
        if (opens.empty()) {
            errors.push_back({closes.empty() ? 1 : closes.front()->line, "missing <" + n + "> block"});
            return;
        }
        if (opens.size() > 1) {
            errors.push_back({opens[1]->line, "duplicate <" + n + "> block"});
        }
        if (closes.empty()) {
            errors.push_back({opens.front()->line, "unterminated <" + n + "> block"});
        } else if (closes.size() > opens.size()) {
            errors.push_back({closes.back()->line, "unmatched </" + n + ">"});
        } else if (closes.front()->pos < opens.front()->pos) {
            errors.push_back({closes.front()->line, "</" + n + "> before <" + n + ">"});
        }
    };
    check_block(eo, ec, "explain");
    check_block(dopen, dc, "dag");

    const bool counts_ok = eo.size() == 1 && ec.size() == 1 && dopen.size() == 1 && dc.size() == 1;
    if (counts_ok && errors.empty()) {
        std::vector<Tag> order;
        for (const auto& h : hits) {
            order.push_back(h.tag);
        }
        const std::vector<Tag> expected = {Tag::ExplainOpen, Tag::ExplainClose, Tag::DagOpen, Tag::DagClose};
        if (order != expected) {
            if (dopen.front()->pos < eo.front()->pos) {
                errors.push_back({dopen.front()->line, "<dag> block must follow the <explain> block"});
            } else {
                errors.push_back({dopen.front()->line, "<dag> block nested inside the <explain> block"});
            }
        }
    }

    // The dag body is still scanned for line-level errors whenever it can be
    // delimited, so one pass reports everything.
    std::vector<ActionNode> nodes;
    std::vector<Edge> edges;
    if (dopen.size() == 1 && dc.size() == 1 && dopen.front()->pos < dc.front()->pos) {
        auto body_start = dopen.front()->pos + tag_text(Tag::DagOpen).size();
        auto body = text.substr(body_start, dc.front()->pos - body_start);
        parse_dag_body(body, dopen.front()->line, errors, nodes, edges);
    }

    if (!errors.empty()) {
        std::stable_sort(errors.begin(), errors.end(),
                         [](const SyntaxError& a, const SyntaxError& b) { return a.line < b.line; });
        return outcome;
    }

    ReasoningTrace trace;
    trace.trace_id = std::move(trace_id);
    trace.perturbation = std::move(perturbation);
    trace.context = std::move(context);
    auto explain_start = eo.front()->pos + tag_text(Tag::ExplainOpen).size();
    trace.explain = std::string(text.substr(explain_start, ec.front()->pos - explain_start));
    for (auto& n : nodes) {
        canonicalize_args(n, registry);
    }
    trace.nodes = std::move(nodes);
    std::sort(edges.begin(), edges.end());
    trace.edges = std::move(edges);
    outcome.trace = std::move(trace);
    return outcome;
}

std::string quote_value(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string render_value(const ArgValue& v) {
    switch (v.type) {
    case ArgValue::Type::String:
        return quote_value(v.text);
    case ArgValue::Type::Number:
    case ArgValue::Type::Token:
        return v.text;
    case ArgValue::Type::List: {
        std::vector<std::string> parts;
        for (const auto& item : v.items) {
            parts.push_back(quote_value(item));
        }
        return "[" + join(parts, ", ") + "]";
    }
    }
    return {};
}

bool contains_tag(std::string_view s) {
    return std::any_of(kTags.begin(), kTags.end(),
                       [&](const auto& t) { return s.find(t.second) != std::string_view::npos; });
}

}  // namespace

std::string render_trace(const ReasoningTrace& trace, const SchemaRegistry& registry) {
    auto report = validate_graph(trace, registry);
    if (!report.valid) {
        std::string why = !report.graph_violations.empty()
                              ? report.graph_violations.front()
                              : report.schema_violations.front().node_id + ": " + report.schema_violations.front().message;
        throw ValidationError("cannot render invalid trace '" + trace.trace_id + "': " + why);
    }
    if (contains_tag(trace.explain)) {
        throw ValidationError("cannot render trace '" + trace.trace_id + "': explain text contains a block tag");
    }
    std::string out = "<explain>" + trace.explain + "</explain>\n<dag>\n";
    for (const auto& n : trace.nodes) {
        const auto& schema = registry.schema_for(n.primitive);
        std::vector<std::string> parts;
        for (const auto& spec : schema.args) {
            if (const auto* v = n.arg(spec.name)) {
                if (v->type == ArgValue::Type::List
                        ? std::any_of(v->items.begin(), v->items.end(), [](const auto& i) { return contains_tag(i); })
                        : contains_tag(v->text)) {
                    throw ValidationError("cannot render trace '" + trace.trace_id + "': argument '" + spec.name +
                                          "' contains a block tag");
                }
                parts.push_back(spec.name + "=" + render_value(*v));
            }
        }
        out += n.id + ": " + n.primitive + "(" + join(parts, ", ") + ")\n";
    }
    auto edges = trace.edges;
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) {
        out += e.src + " -> " + e.dst + "\n";
    }
    out += "</dag>\n";
    return out;
}

void parse_corpus(std::istream& in, const SchemaRegistry& registry, const std::function<void(CorpusRecord)>& sink) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        CorpusRecord rec;
        rec.line = line_no;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            rec.record_error = "invalid JSON";
            sink(std::move(rec));
            continue;
        }
        auto field = [&](const char* key) -> std::optional<std::string> {
            if (j.contains(key) && j.at(key).is_string()) {
                return j.at(key).get<std::string>();
            }
            return std::nullopt;
        };
        auto id = field("trace_id");
        auto pert = field("perturbation");
        auto ctx = field("context");
        auto raw = field("raw_text");
        if (id) {
            rec.trace_id = *id;
        }
        if (!id || !pert || !ctx || !raw) {
            rec.record_error = "record must have string fields trace_id, perturbation, context, raw_text";
            sink(std::move(rec));
            continue;
        }
        rec.outcome = parse_trace(*raw, *id, *pert, *ctx, registry);
        sink(std::move(rec));
    }
    if (in.bad()) {
        throw IoError("read failed while parsing corpus");
    }
}

std::vector<CorpusRecord> parse_corpus(std::istream& in, const SchemaRegistry& registry) {
    std::vector<CorpusRecord> out;
    parse_corpus(in, registry, [&](CorpusRecord r) { out.push_back(std::move(r)); });
    return out;
}

}  // namespace vctrace
