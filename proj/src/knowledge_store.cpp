#include "vctrace/knowledge_store.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>
#include <tuple>

namespace vctrace {

double JaccardSimilarity::score(std::string_view a, std::string_view b) const {
    auto ta = token_set(a);
    auto tb = token_set(b);
    if (ta.empty() && tb.empty()) {
        return 0.0;
    }
    std::vector<std::string> common;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
    auto uni = ta.size() + tb.size() - common.size();
    return static_cast<double>(common.size()) / static_cast<double>(uni);
}

std::string_view to_string(NodeMatch m) {
    switch (m) {
    case NodeMatch::Exact:
        return "exact";
    case NodeMatch::Synonym:
        return "synonym";
    case NodeMatch::Similarity:
        return "similarity";
    }
    return "exact";
}

KnowledgeGraph::KnowledgeGraph(std::vector<KGNode> nodes, std::vector<KGEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (!by_id_.emplace(n.node_id, i).second) {
            throw FormatError("knowledge graph: duplicate node id " + n.node_id);
        }
        by_name_[fold(trim(n.name))].push_back(i);
        for (const auto& s : n.synonyms) {
            by_synonym_[fold(trim(s))].push_back(i);
        }
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const auto& e = edges_[i];
        if (!by_id_.count(e.src) || !by_id_.count(e.dst)) {
            throw FormatError("knowledge graph: edge " + e.src + " -" + e.relation + "-> " + e.dst +
                              " has an unknown endpoint");
        }
        incident_[e.src].push_back(i);
        if (e.dst != e.src) {
            incident_[e.dst].push_back(i);
        }
    }
}

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& nodes_tsv, const std::filesystem::path& edges_tsv) {
    auto nt = read_tsv(nodes_tsv, {"node_id", "name", "node_type", "synonyms"});
    std::vector<KGNode> nodes;
    for (const auto& row : nt.rows) {
        KGNode n{row[nt.column("node_id")], row[nt.column("name")], row[nt.column("node_type")], {}};
        if (!trim(row[nt.column("synonyms")]).empty()) {
            for (auto& s : split(row[nt.column("synonyms")], '|')) {
                if (!trim(s).empty()) {
                    n.synonyms.emplace_back(trim(s));
                }
            }
        }
        nodes.push_back(std::move(n));
    }
    auto et = read_tsv(edges_tsv, {"src", "relation", "dst"});
    std::vector<KGEdge> edges;
    for (const auto& row : et.rows) {
        edges.push_back({row[et.column("src")], row[et.column("relation")], row[et.column("dst")]});
    }
    return KnowledgeGraph(std::move(nodes), std::move(edges));
}

const KGNode* KnowledgeGraph::node(std::string_view node_id) const {
    auto it = by_id_.find(node_id);
    return it == by_id_.end() ? nullptr : &nodes_[it->second];
}

NodeLookup KnowledgeGraph::lookup_node(std::string_view mention, const SimilarityProvider& sim) const {
    if (nodes_.empty()) {
        throw LookupError("knowledge graph is empty");
    }
    auto key = fold(trim(mention));
    auto smallest_id = [&](const std::vector<std::size_t>& idx) {
        return &nodes_[*std::min_element(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return nodes_[a].node_id < nodes_[b].node_id;
        })];
    };
    if (auto it = by_name_.find(key); it != by_name_.end()) {
        return {smallest_id(it->second), NodeMatch::Exact, 1.0};
    }
    if (auto it = by_synonym_.find(key); it != by_synonym_.end()) {
        return {smallest_id(it->second), NodeMatch::Synonym, 1.0};
    }
    const KGNode* best = nullptr;
    double best_score = -1.0;
    for (const auto& n : nodes_) {
        double s = sim.score(mention, n.name);
        if (s > best_score || (s == best_score && n.node_id < best->node_id)) {
            best = &n;
            best_score = s;
        }
    }
    return {best, NodeMatch::Similarity, best_score};
}

std::string KnowledgeGraph::neighborhood_context(const KGNode& node, std::size_t max_neighbors) const {
    struct Line {
        std::string relation;
        std::string neighbor_name;
        bool outgoing;
        std::string neighbor_id;
        std::string text;
    };
    std::vector<Line> lines;
    if (auto it = incident_.find(node.node_id); it != incident_.end()) {
        for (auto ei : it->second) {
            const auto& e = edges_[ei];
            const bool outgoing = e.src == node.node_id;
            const auto& other = nodes_[by_id_.at(outgoing ? e.dst : e.src)];
            Line l{e.relation, other.name, outgoing, other.node_id, {}};
            l.text = outgoing ? node.name + " —" + e.relation + "→ " + other.name
                              : node.name + " ←" + e.relation + "— " + other.name;
            lines.push_back(std::move(l));
        }
    }
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        return std::tie(a.relation, a.neighbor_name, b.outgoing, a.neighbor_id) <
               std::tie(b.relation, b.neighbor_name, a.outgoing, b.neighbor_id);
    });
    std::string out = node.name + " (" + node.node_type + ", " + node.node_id + ")\n";
    const auto shown = std::min(lines.size(), max_neighbors);
    for (std::size_t i = 0; i < shown; ++i) {
        out += lines[i].text + "\n";
    }
    if (lines.size() > shown) {
        out += "... " + std::to_string(lines.size() - shown) + " more neighbors truncated\n";
    }
    return out;
}

std::string_view to_string(DocSource s) {
    switch (s) {
    case DocSource::Literature:
        return "literature";
    case DocSource::Encyclopedia:
        return "encyclopedia";
    case DocSource::GeneDb:
        return "gene_db";
    }
    return "literature";
}

std::optional<DocSource> parse_doc_source(std::string_view s) {
    for (auto src : {DocSource::Literature, DocSource::Encyclopedia, DocSource::GeneDb}) {
        if (to_string(src) == s) {
            return src;
        }
    }
    return std::nullopt;
}

DocumentStore::DocumentStore(std::vector<Document> docs) : docs_(std::move(docs)) {
    std::sort(docs_.begin(), docs_.end(), [](const Document& a, const Document& b) {
        return std::tie(a.source, a.doc_id) < std::tie(b.source, b.doc_id);
    });
    for (std::size_t i = 1; i < docs_.size(); ++i) {
        if (docs_[i].source == docs_[i - 1].source && docs_[i].doc_id == docs_[i - 1].doc_id) {
            throw FormatError("document store: duplicate doc_id " + docs_[i].doc_id + " in source " +
                              std::string(to_string(docs_[i].source)));
        }
    }
}

DocumentStore DocumentStore::from_jsonl(std::string_view text, const std::string& origin) {
    std::vector<Document> docs;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto where = origin + ":" + std::to_string(line_no);
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw FormatError(where + ": invalid JSON");
        }
        for (const char* key : {"doc_id", "source", "title", "body"}) {
            if (!j.contains(key) || !j.at(key).is_string()) {
                throw FormatError(where + ": field '" + key + "' must be a string");
            }
        }
        auto src = parse_doc_source(j.at("source").get<std::string>());
        if (!src) {
            throw FormatError(where + ": unknown source '" + j.at("source").get<std::string>() + "'");
        }
        docs.push_back({j.at("doc_id").get<std::string>(), *src, j.at("title").get<std::string>(),
                        j.at("body").get<std::string>()});
    });
    return DocumentStore(std::move(docs));
}

DocumentStore DocumentStore::load(const std::vector<std::filesystem::path>& jsonl_files) {
    std::vector<Document> all;
    for (const auto& f : jsonl_files) {
        auto part = from_jsonl(read_file(f), f.string());
        all.insert(all.end(), part.docs_.begin(), part.docs_.end());
    }
    return DocumentStore(std::move(all));
}

std::string DocumentStore::gene_context(std::string_view symbol) const {
    auto key = fold(trim(symbol));
    std::vector<std::string> bodies;
    for (const auto& d : docs_) {
        if (d.source == DocSource::GeneDb && fold(trim(d.title)) == key) {
            bodies.push_back(d.body);
        }
    }
    return join(bodies, "\n\n");
}

std::vector<const Document*> DocumentStore::search_documents(const std::vector<std::string>& entities,
                                                             DocSource source, std::size_t k,
                                                             const SimilarityProvider& sim) const {
    std::vector<const Document*> out;
    if (entities.empty() || k == 0) {
        return out;
    }
    auto query = join(entities, " ");
    std::vector<std::pair<double, const Document*>> scored;
    for (const auto& d : docs_) {
        if (d.source == source) {
            scored.emplace_back(sim.score(query, d.title + " " + d.body), &d);
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second->doc_id < b.second->doc_id;
    });
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

}  // namespace vctrace
