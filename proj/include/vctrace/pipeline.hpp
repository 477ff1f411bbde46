#pragma once

#include "vctrace/filter.hpp"
#include "vctrace/knowledge_store.hpp"
#include "vctrace/lexicon.hpp"
#include "vctrace/metrics.hpp"
#include "vctrace/parser.hpp"
#include "vctrace/verifiers.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vctrace {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Text with `{name}` placeholders, where name is an identifier. Any other
/// brace is literal.
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string text, std::string name);
    static PromptTemplate load(const std::filesystem::path& path);

    /// Throws ConfigError when a placeholder has no value.
    std::string render(const std::map<std::string, std::string>& vars) const;
    const std::set<std::string>& placeholders() const { return placeholders_; }
    const std::string& name() const { return name_; }

private:
    std::string text_;
    std::string name_;
    std::set<std::string> placeholders_;
};

/// All prompt templates the orchestrator uses, read from one directory:
/// report.txt, construct.txt, one_step.txt, stub_report.txt, stub_construct.txt.
struct TemplateSet {
    PromptTemplate report;
    PromptTemplate construct;
    PromptTemplate one_step;
    PromptTemplate stub_report;
    PromptTemplate stub_construct;

    static TemplateSet load(const std::filesystem::path& dir);
    /// Union of the placeholders of the generation prompts.
    std::set<std::string> prompt_variables() const;
};

struct GenerationRequest {
    std::string stage;  // "report" or "construct"
    std::string prompt;
    std::map<std::string, std::string> vars;  // consumed by the stub provider only
};

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    /// Throws PipelineError carrying the request's stage on failure.
    virtual std::string generate(const GenerationRequest& request) const = 0;
    virtual std::string_view mode() const = 0;
    /// Largest number of concurrent calls the provider accepts; 0 means any.
    virtual std::size_t max_concurrency() const { return 0; }
};

/// Instantiates the stub template of the request's stage with its vars.
class StubProvider final : public GenerationProvider {
public:
    StubProvider(PromptTemplate report, PromptTemplate construct);
    std::string generate(const GenerationRequest& request) const override;
    std::string_view mode() const override { return "stub"; }

private:
    PromptTemplate report_;
    PromptTemplate construct_;
};

/// Returns `<cache_dir>/<sha256(prompt)>.txt`; a missing file is a cache miss.
class ReplayProvider final : public GenerationProvider {
public:
    explicit ReplayProvider(std::filesystem::path cache_dir);
    std::string generate(const GenerationRequest& request) const override;
    std::string_view mode() const override { return "replay"; }

private:
    std::filesystem::path dir_;
};

/// POSTs {"prompt", "stage"} to an http:// endpoint and expects {"text": ...}.
class HttpProvider final : public GenerationProvider {
public:
    HttpProvider(std::string endpoint, std::chrono::seconds timeout, std::size_t max_concurrency);
    std::string generate(const GenerationRequest& request) const override;
    std::string_view mode() const override { return "live"; }
    std::size_t max_concurrency() const override { return max_concurrency_; }

private:
    std::string host_;
    std::string path_;
    std::chrono::seconds timeout_;
    std::size_t max_concurrency_;
};

/// Forwards to another provider and stores every response in a replay cache.
class RecordingProvider final : public GenerationProvider {
public:
    RecordingProvider(const GenerationProvider& inner, std::filesystem::path cache_dir);
    std::string generate(const GenerationRequest& request) const override;
    std::string_view mode() const override { return inner_.mode(); }
    std::size_t max_concurrency() const override { return inner_.max_concurrency(); }

private:
    const GenerationProvider& inner_;
    std::filesystem::path dir_;
};

struct PerturbationInput {
    std::string id;
    std::string perturbation;
    std::string context;
};

/// JSONL with perturbation, context and optional id (default "input-<n>",
/// n counting records from 1). Throws FormatError on malformed records.
std::vector<PerturbationInput> parse_inputs(std::string_view text, const std::string& source);

inline constexpr std::array<std::string_view, 4> kReportSections = {"kg", "gene_db", "literature",
                                                                    "encyclopedia"};

struct Report {
    PerturbationInput input;
    std::vector<std::string> entities;  // resolved canonical names, first-mention order
    std::map<std::string, std::string> sections;  // only sources that returned text
    std::string body;
    std::string prompt_digest;

    nlohmann::json to_json() const;
};

struct RetrievalConfig {
    std::size_t max_neighbors = 100;
    std::size_t k_docs = 5;
    double kg_min_similarity = 0.5;  // similarity-only KG matches below this are ignored
};

struct PipelineResources {
    const Lexicon* lexicon = nullptr;
    const KnowledgeGraph* kg = nullptr;
    const DocumentStore* docs = nullptr;
    const SimilarityProvider* similarity = nullptr;
    const GenerationProvider* provider = nullptr;
    const TemplateSet* templates = nullptr;
    const SchemaRegistry* registry = &SchemaRegistry::builtin();
    RetrievalConfig retrieval;
};

/// Entity extraction, per-source retrieval and the retrieval text blocks.
std::pair<std::vector<std::string>, std::map<std::string, std::string>> retrieve(const PerturbationInput& input,
                                                                                 const PipelineResources& res);

/// Throws PipelineError with stage "report" when the provider fails.
Report generate_report(const PerturbationInput& input, const PipelineResources& res);

/// Raw constructor output, returned verbatim. With `include_sections` the
/// retrieval sections are shown to the constructor alongside the report.
std::string construct_explanation(const Report& report, const PipelineResources& res, bool include_sections = false);

/// Single-call mode: retrieval text goes straight to the constructor.
std::string construct_one_step(const PerturbationInput& input, const PipelineResources& res);

struct PipelineOptions {
    bool one_step = false;
    bool include_sections = false;
    FilterConfig filter;
    std::size_t jobs = 1;
};

struct InputOutcome {
    PerturbationInput input;
    std::optional<Report> report;
    std::optional<std::string> raw_text;
    std::optional<ParseOutcome> parsed;
    std::optional<StructuralReport> structure;
    std::optional<VerdictMap> verdicts;
    std::optional<FilterOutcome> filter;
    std::optional<ReasoningTrace> kept;
    std::string failed_stage;  // empty unless a stage threw
    std::string error;
};

struct PipelineResult {
    std::vector<InputOutcome> outcomes;  // input order
    nlohmann::json summary;

    std::vector<nlohmann::json> kept_records() const;
    std::vector<nlohmann::json> reject_records() const;
    std::vector<nlohmann::json> report_records() const;
    std::vector<nlohmann::json> raw_records() const;
    std::vector<nlohmann::json> verdict_records() const;
};

/// report -> construct -> parse -> validate -> verify -> filter per input.
/// Per-input failures are recorded and the run continues.
PipelineResult run_pipeline(const std::vector<PerturbationInput>& inputs, const PipelineResources& res,
                            const VerifierContext& verifiers, const PipelineOptions& options);

}  // namespace vctrace
