#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

/// Text similarity in [0, 1]; symmetric, and 1 for identical nonempty input.
class SimilarityProvider {
public:
    virtual ~SimilarityProvider() = default;
    virtual double score(std::string_view a, std::string_view b) const = 0;
};

/// Token-set Jaccard over lowercased alphanumeric tokens.
class JaccardSimilarity final : public SimilarityProvider {
public:
    double score(std::string_view a, std::string_view b) const override;
};

struct KGNode {
    std::string node_id;
    std::string name;
    std::string node_type;
    std::vector<std::string> synonyms;
};

struct KGEdge {
    std::string src;
    std::string relation;
    std::string dst;
};

enum class NodeMatch { Exact, Synonym, Similarity };

std::string_view to_string(NodeMatch m);

struct NodeLookup {
    const KGNode* node = nullptr;
    NodeMatch method = NodeMatch::Exact;
    double similarity = 1.0;
};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    /// Throws FormatError on duplicate node ids or edges with unknown endpoints.
    KnowledgeGraph(std::vector<KGNode> nodes, std::vector<KGEdge> edges);

    /// nodes TSV: node_id, name, node_type, synonyms; edges TSV: src, relation, dst.
    static KnowledgeGraph load(const std::filesystem::path& nodes_tsv, const std::filesystem::path& edges_tsv);

    /// Case-folded match on names, then synonyms (ties by node id), then the
    /// node whose name scores highest under `sim` (ties by node id). Throws
    /// LookupError when the graph is empty.
    NodeLookup lookup_node(std::string_view mention, const SimilarityProvider& sim) const;

    /// Header line plus one line per incident edge, sorted by relation then
    /// neighbor name, cut at `max_neighbors` with a truncation note.
    std::string neighborhood_context(const KGNode& node, std::size_t max_neighbors) const;

    const KGNode* node(std::string_view node_id) const;
    const std::vector<KGNode>& nodes() const { return nodes_; }
    const std::vector<KGEdge>& edges() const { return edges_; }

private:
    std::vector<KGNode> nodes_;
    std::vector<KGEdge> edges_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> by_name_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> by_synonym_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> incident_;  // node id -> edge indices
};

enum class DocSource { Literature, Encyclopedia, GeneDb };

std::string_view to_string(DocSource s);
std::optional<DocSource> parse_doc_source(std::string_view s);

struct Document {
    std::string doc_id;
    DocSource source = DocSource::Literature;
    std::string title;
    std::string body;
};

class DocumentStore {
public:
    DocumentStore() = default;
    /// Throws FormatError when a doc_id repeats within one source.
    explicit DocumentStore(std::vector<Document> docs);

    /// JSONL records with doc_id, source, title, body. Several files may be merged.
    static DocumentStore load(const std::vector<std::filesystem::path>& jsonl_files);
    static DocumentStore from_jsonl(std::string_view text, const std::string& origin);

    /// Bodies of gene_db documents whose title case-folds to `symbol`, in
    /// doc_id order, separated by blank lines. Empty when none match.
    std::string gene_context(std::string_view symbol) const;

    /// Top-k documents of `source` ranked by similarity of the space-joined
    /// entities to "title body"; descending score, ties by doc_id.
    std::vector<const Document*> search_documents(const std::vector<std::string>& entities, DocSource source,
                                                  std::size_t k, const SimilarityProvider& sim) const;

    const std::vector<Document>& documents() const { return docs_; }

private:
    std::vector<Document> docs_;  // sorted by (source, doc_id)
};

}  // namespace vctrace
