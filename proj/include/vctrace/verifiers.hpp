#pragma once

#include "vctrace/lexicon.hpp"
#include "vctrace/schema.hpp"
#include "vctrace/trace.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

enum class VerdictStatus { Supported, Contradicted, Unknown };
enum class VerifierKind { Dti, De, Loc, Pheno };

std::string_view to_string(VerdictStatus s);
std::string_view to_string(VerifierKind k);
std::optional<VerdictStatus> parse_verdict_status(std::string_view s);
std::optional<VerifierKind> parse_verifier_kind(std::string_view s);

/// One verifier judgment. DTI verdicts carry the binding score whenever the
/// scorer knows the pair; DE/LOC/PHENO use 1.0 (supported), 0.0
/// (contradicted) and no score (unknown).
struct Verdict {
    std::string node_id;
    std::optional<std::string> subject;  // e.g. one gene of a gene list
    std::optional<double> score;
    VerdictStatus status = VerdictStatus::Unknown;
    VerifierKind verifier = VerifierKind::Dti;

    bool operator==(const Verdict&) const = default;
};

using VerdictMap = std::map<std::string, std::vector<Verdict>>;  // node id -> verdicts

nlohmann::json to_json(const Verdict& v, std::string_view trace_id);
/// Parses one verdict record; returns the trace id alongside. Throws FormatError.
std::pair<std::string, Verdict> verdict_from_json(const nlohmann::json& j);

enum class DELabel { Up, Down, Ns };

std::string_view to_string(DELabel l);
std::optional<DELabel> parse_de_label(std::string_view s);

struct DEGroundTruthRow {
    double log2fc = 0.0;
    std::optional<double> p_adj;  // absent for genes that were never tested
    DELabel label = DELabel::Ns;
};

/// Differential-expression ground truth keyed by case-folded
/// (perturbation_id, context_id, gene).
class DEGroundTruth {
public:
    explicit DEGroundTruth(double alpha = 0.05) : alpha_(alpha) {}

    /// Throws FormatError when the row's label disagrees with its statistics.
    void add(std::string_view perturbation_id, std::string_view context_id, std::string_view gene,
             DEGroundTruthRow row);
    const DEGroundTruthRow* find(std::string_view perturbation_id, std::string_view context_id,
                                 std::string_view gene) const;

    /// TSV with columns perturbation_id, context_id, gene, log2fc, p_adj, label
    /// (extra columns ignored; p_adj may be NA).
    static DEGroundTruth load(const std::filesystem::path& path, double alpha = 0.05);
    static DEGroundTruth from_tsv(std::string_view text, const std::string& source, double alpha = 0.05);

    double alpha() const { return alpha_; }
    std::size_t size() const { return rows_.size(); }

private:
    double alpha_;
    std::map<std::string, DEGroundTruthRow, std::less<>> rows_;
};

class DTIScorer {
public:
    virtual ~DTIScorer() = default;
    /// Binding probability in [0, 1], or nothing when the pair is not covered.
    /// Throws VerifierError on transport failure.
    virtual std::optional<double> score(const std::string& compound_id, const std::string& protein_id) const = 0;
};

/// Table backend: TSV compound_id, protein_id, score.
class TableDTIScorer final : public DTIScorer {
public:
    TableDTIScorer() = default;
    /// Throws DomainError when the score is outside [0, 1].
    void add(std::string_view compound_id, std::string_view protein_id, double score);
    static TableDTIScorer load(const std::filesystem::path& path);
    static TableDTIScorer from_tsv(std::string_view text, const std::string& source);

    std::optional<double> score(const std::string& compound_id, const std::string& protein_id) const override;

private:
    std::map<std::pair<std::string, std::string>, double> table_;
};

/// Client for an external structure-based scorer. Posts
/// {"compound_id", "protein_id"} as JSON and expects {"score": number|null}.
class HttpDTIScorer final : public DTIScorer {
public:
    /// `endpoint` like "http://host:port/score".
    explicit HttpDTIScorer(std::string endpoint, std::chrono::seconds timeout = std::chrono::seconds(30));

    std::optional<double> score(const std::string& compound_id, const std::string& protein_id) const override;

private:
    std::string host_;
    std::string path_;
    std::chrono::seconds timeout_;
};

/// Subcellular localization annotations: TSV protein_id, compartment, source.
class LocalizationTable {
public:
    void add(std::string_view protein_id, std::string_view compartment);
    static LocalizationTable load(const std::filesystem::path& path);
    static LocalizationTable from_tsv(std::string_view text, const std::string& source);

    /// Folded compartments, or nullptr when the entity is unannotated.
    const std::set<std::string>* compartments(std::string_view protein_id) const;

private:
    std::map<std::string, std::set<std::string>, std::less<>> table_;
};

/// Positive-only phenotype associations: TSV entity_id, phenotype_id.
class PhenotypeDb {
public:
    void add(std::string_view entity_id, std::string_view phenotype_id);
    static PhenotypeDb load(const std::filesystem::path& path);
    static PhenotypeDb from_tsv(std::string_view text, const std::string& source);

    bool has(std::string_view entity_id, std::string_view phenotype_id) const;

private:
    std::set<std::pair<std::string, std::string>> pairs_;
};

/// Everything the verifiers consult. Missing tables yield `unknown` verdicts.
struct VerifierContext {
    const Lexicon* lexicon = nullptr;
    const SchemaRegistry* registry = &SchemaRegistry::builtin();
    const DEGroundTruth* de = nullptr;
    const LocalizationTable* loc = nullptr;
    const PhenotypeDb* pheno = nullptr;
    const DTIScorer* dti = nullptr;
};

Verdict verify_dti(const ActionNode& node, const VerifierContext& ctx);
std::vector<Verdict> verify_de(const ActionNode& node, std::string_view perturbation, std::string_view context,
                               const VerifierContext& ctx);
Verdict verify_loc(const ActionNode& node, const VerifierContext& ctx);
Verdict verify_pheno(const ActionNode& node, const ReasoningTrace& trace, const VerifierContext& ctx);

/// Dispatches each node to its verifier by primitive. Nodes without an
/// applicable verifier get no entry. VerifierErrors are re-thrown tagged
/// with the node id.
VerdictMap verify_trace(const ReasoningTrace& trace, const VerifierContext& ctx);

/// Verdict JSONL grouped by trace id. Throws FormatError naming the line.
std::map<std::string, VerdictMap> parse_verdicts(std::string_view text, const std::string& source);

}  // namespace vctrace
