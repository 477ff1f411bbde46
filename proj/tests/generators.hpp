#pragma once

#include "vctrace/schema.hpp"
#include "vctrace/trace.hpp"
#include "vctrace/verifiers.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vt {

using Rng = std::mt19937_64;
using vctrace::ArgSpec;
using vctrace::ArgValue;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Printable text that the trace grammar has to escape or tolerate inside quotes.
inline std::string random_value_text(Rng& rng, std::size_t max_len = 14) {
    static const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    static const std::string extra = "0123456789 _-+.,:;()[]{}=\"\\#>/'!?*&%$@|~`^";
    std::string s(1, letters[pick(rng, letters.size())]);
    auto len = pick(rng, max_len);
    for (std::size_t i = 0; i < len; ++i) {
        s += coin(rng, 0.6) ? letters[pick(rng, letters.size())] : extra[pick(rng, extra.size())];
    }
    if (coin(rng, 0.1)) {
        s += " \xce\xb2-caten\xc3\xadn";  // multi-byte UTF-8
    }
    return s;
}

inline std::string random_number_text(Rng& rng) {
    std::string s = coin(rng, 0.3) ? "-" : "";
    s += coin(rng, 0.2) ? std::string("0") : std::to_string(1 + pick(rng, 999));
    if (coin(rng, 0.5)) {
        s += "." + std::to_string(pick(rng, 10)) + std::to_string(1 + pick(rng, 9));
    }
    return s;
}

inline std::string random_identifier(Rng& rng) {
    static const std::string head = "abcdefghijklmnopqrstuvwxyz_";
    static const std::string tail = "abcdefghijklmnopqrstuvwxyz0123456789_";
    std::string s(1, head[pick(rng, head.size())]);
    auto len = pick(rng, 6);
    for (std::size_t i = 0; i < len; ++i) {
        s += tail[pick(rng, tail.size())];
    }
    return s;
}

inline ArgValue random_arg(Rng& rng, const ArgSpec& spec) {
    using vctrace::ArgKind;
    switch (spec.kind) {
    case ArgKind::Number:
        return ArgValue::number(random_number_text(rng));
    case ArgKind::Enum:
        return ArgValue::token(spec.enum_values[pick(rng, spec.enum_values.size())]);
    case ArgKind::EntityList: {
        std::vector<std::string> items;
        auto n = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i) {
            items.push_back(random_value_text(rng, 8));
        }
        return ArgValue::list(std::move(items));
    }
    case ArgKind::Entity:
    case ArgKind::Text:
        break;
    }
    return ArgValue::string(random_value_text(rng));
}

inline std::string random_explain(Rng& rng) {
    std::string s = coin(rng, 0.3) ? "\n  " : "";
    auto words = 1 + pick(rng, 20);
    for (std::size_t i = 0; i < words; ++i) {
        s += random_value_text(rng, 8);
        s += coin(rng, 0.1) ? "\n" : " ";
    }
    return s;
}

// Schema-conformant trace over a random DAG (edges only go forward in node order).
inline vctrace::ReasoningTrace random_trace(Rng& rng, const vctrace::SchemaRegistry& registry,
                                            std::size_t max_nodes = 8) {
    vctrace::ReasoningTrace t;
    t.trace_id = "t" + std::to_string(rng() % 100000);
    t.perturbation = "drug";
    t.context = "cells";
    t.explain = random_explain(rng);
    auto n = 1 + pick(rng, max_nodes);
    std::set<std::string> used;
    for (std::size_t i = 0; i < n; ++i) {
        vctrace::ActionNode node;
        do {
            node.id = random_identifier(rng);
        } while (!used.insert(node.id).second);
        const auto& schema = registry.schemas()[pick(rng, registry.schemas().size())];
        node.primitive = schema.primitive;
        for (const auto& spec : schema.args) {
            if (spec.required || coin(rng, 0.4)) {
                node.args[spec.name] = random_arg(rng, spec);
            }
        }
        t.nodes.push_back(std::move(node));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (coin(rng, 0.3)) {
                t.edges.push_back({t.nodes[i].id, t.nodes[j].id});
            }
        }
    }
    std::sort(t.edges.begin(), t.edges.end());
    return t;
}

// Random directed graph on n nodes (self-loops allowed) as a schema-clean trace.
inline vctrace::ReasoningTrace random_digraph(Rng& rng, std::size_t n, double p,
                                              std::vector<std::pair<std::size_t, std::size_t>>* edges_out = nullptr) {
    vctrace::ReasoningTrace t;
    t.trace_id = "g";
    t.explain = "graph";
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
        vctrace::ActionNode node;
        node.id = "v" + std::to_string(i);
        node.primitive = "set_context";
        node.args["cell_model"] = ArgValue::string("cells");
        t.nodes.push_back(std::move(node));
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (coin(rng, a == b ? p / 4 : p)) {
                t.edges.push_back({"v" + std::to_string(a), "v" + std::to_string(b)});
                if (edges_out) {
                    edges_out->emplace_back(a, b);
                }
            }
        }
    }
    std::sort(t.edges.begin(), t.edges.end());
    return t;
}

inline std::string random_bytes(Rng& rng, std::size_t max_len) {
    auto len = pick(rng, max_len + 1);
    std::string s(len, '\0');
    for (auto& c : s) {
        c = static_cast<char>(rng() & 0xff);
    }
    return s;
}

// Mostly-plausible trace text with random corruption: the fuzzer's second diet.
inline std::string mutated_trace_text(Rng& rng, std::string text) {
    static const std::vector<std::string> snippets = {"<explain>", "</explain>", "<dag>", "</dag>", "->", "(",
                                                      ")", "\"", "\\", "[", "]", "=", ",", "\n", "#", ":"};
    auto edits = 1 + pick(rng, 6);
    for (std::size_t i = 0; i < edits && !text.empty(); ++i) {
        auto pos = pick(rng, text.size());
        switch (pick(rng, 3)) {
        case 0:
            text.erase(pos, 1 + pick(rng, 8));
            break;
        case 1:
            text.insert(pos, snippets[pick(rng, snippets.size())]);
            break;
        default:
            text[pos] = static_cast<char>(rng() & 0xff);
            break;
        }
    }
    return text;
}

}  // namespace vt
