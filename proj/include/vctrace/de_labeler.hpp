#pragma once

#include "vctrace/trace.hpp"
#include "vctrace/verifiers.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vctrace {

/// Genes x samples count matrix, stored gene-major.
struct CountsMatrix {
    std::vector<std::string> genes;
    std::vector<std::string> samples;
    std::vector<std::int64_t> counts;

    std::int64_t at(std::size_t gene, std::size_t sample) const { return counts[gene * samples.size() + sample]; }
    std::span<const std::int64_t> row(std::size_t gene) const {
        return {counts.data() + gene * samples.size(), samples.size()};
    }

    /// Throws FormatError when dimensions disagree or a count is negative.
    void check() const;
};

/// Counts TSV: first column gene symbol, remaining columns one per sample.
CountsMatrix read_counts_tsv(const std::filesystem::path& path);
CountsMatrix parse_counts_tsv(std::string_view text, const std::string& source);

enum class Condition { Treated, Control };

std::string_view to_string(Condition c);

struct SampleMeta {
    std::string sample_id;
    std::string perturbation_id;
    std::string context_id;
    Condition condition = Condition::Treated;
    int replicate = 0;
};

/// Metadata TSV: sample_id, perturbation_id, context_id, condition, replicate.
/// Throws FormatError on duplicate sample ids or unknown conditions.
std::vector<SampleMeta> read_sample_meta(const std::filesystem::path& path);
std::vector<SampleMeta> parse_sample_meta(std::string_view text, const std::string& source);

struct PseudobulkResult {
    CountsMatrix matrix;
    std::vector<SampleMeta> samples;  // parallel to matrix.samples
    std::vector<std::string> warnings;
};

/// Sums cell columns sharing (perturbation, context, condition, replicate).
/// Output groups are in sorted key order; cells without metadata are
/// dropped with a warning.
PseudobulkResult pseudobulk(const CountsMatrix& cells, const std::vector<SampleMeta>& cell_meta);

/// Median-of-ratios size factors over genes positive in every sample.
/// Throws DomainError when no such gene exists.
std::vector<double> size_factors(const CountsMatrix& counts);

enum class FitStatus { Ok, AllZero, NonConverged };

std::string_view to_string(FitStatus s);

struct NbFit {
    double intercept = 0.0;  // natural log scale
    double effect = 0.0;     // natural log fold change, treated vs control
    double se_effect = 0.0;
    double dispersion = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::Ok;
};

struct NbGlmOptions {
    double tolerance = 1e-8;
    int max_iterations = 100;
    double min_dispersion = 1e-8;
};

/// Method-of-moments NB dispersion from size-factor-normalized counts, with
/// the variance pooled within conditions. Floored at `min_dispersion`.
double moments_dispersion(std::span<const std::int64_t> counts, std::span<const double> size_factors,
                          std::span<const std::uint8_t> treated, double min_dispersion = 1e-8);

/// Fits log mu_j = log s_j + b0 + b1 * treated_j with NB variance mu + a mu^2
/// by IRLS. Throws DomainError unless each condition has at least 2 samples.
NbFit fit_nb_glm(std::span<const std::int64_t> counts, std::span<const double> size_factors,
                 std::span<const std::uint8_t> treated, const NbGlmOptions& options = {});

struct WaldResult {
    double z = 0.0;
    double p = 1.0;
};

/// Two-sided Wald test against a standard normal. Throws DomainError when se <= 0.
WaldResult wald_test(double effect, double se);

/// Benjamini-Hochberg step-up adjustment, returned in input order.
/// Throws DomainError for values outside [0, 1].
std::vector<double> bh_adjust(std::span<const double> p_values);

struct DEResult {
    std::string gene;
    std::optional<double> log2fc;
    std::optional<double> se;  // of log2fc
    std::optional<double> wald_z;
    std::optional<double> p;
    std::optional<double> p_adj;
    DELabel label = DELabel::Ns;
    FitStatus status = FitStatus::Ok;
};

/// Significant means p_adj < alpha (strict); direction by the sign of log2fc.
std::vector<DELabel> label_genes(const std::vector<DEResult>& results, double alpha = 0.05);

struct PairAnalysis {
    std::string perturbation_id;
    std::string context_id;
    std::vector<DEResult> results;  // gene order of the input matrix
};

/// Size factors, per-gene fits, Wald tests, BH over genes with status Ok,
/// and labels for one (perturbation, context) pair. Throws DomainError when
/// the pair lacks 2 treated and 2 control samples.
PairAnalysis analyze_pair(const CountsMatrix& counts, const std::vector<SampleMeta>& samples,
                          const std::string& perturbation_id, const std::string& context_id, double alpha = 0.05,
                          std::size_t jobs = 1);

/// All (perturbation, context) pairs present in the metadata, sorted.
std::vector<std::pair<std::string, std::string>> analysis_pairs(const std::vector<SampleMeta>& samples);

enum class QATask { De, Doc };

std::string_view to_string(QATask t);
std::optional<QATask> parse_qa_task(std::string_view s);

struct QAExample {
    std::string perturbation_id;
    std::string context_id;
    std::string gene;
    QATask task = QATask::De;
    int label = 0;

    bool operator==(const QAExample&) const = default;
};

nlohmann::json to_json(const QAExample& e);
QAExample qa_example_from_json(const nlohmann::json& j);

struct LabelingOptions {
    std::size_t top_n = 25;
    std::size_t n_nonreg = 100;
};

struct ExampleSet {
    std::vector<QAExample> examples;
    std::size_t n_up = 0;
    std::size_t n_down = 0;
    std::size_t n_ns = 0;
    std::size_t shortfall_up = 0;
    std::size_t shortfall_down = 0;
    std::size_t shortfall_ns = 0;
};

/// Top `top_n` up and down genes by |log2fc| (ties by symbol) and `n_nonreg`
/// non-regulated genes drawn uniformly without replacement. DE-task labels
/// are 1 for regulated and 0 for sampled non-regulated genes; DOC-task
/// examples cover the selected regulated genes with 1 = up, 0 = down.
/// Genes whose fit did not succeed are never sampled as non-regulated.
ExampleSet build_examples(const PairAnalysis& pair, std::uint64_t seed, const LabelingOptions& options = {});

struct SplitSpec {
    std::optional<double> test_fraction;  // of perturbations
    std::optional<std::size_t> n_test;    // examples, sampled from the test side
};

struct Split {
    std::vector<QAExample> train;
    std::vector<QAExample> test;
    std::vector<std::string> train_perturbations;
    std::vector<std::string> test_perturbations;
    std::size_t n_dropped = 0;  // test-side examples not sampled into `test`
};

/// Partitions perturbation ids by a seeded shuffle so train and test never
/// share a perturbation. Throws DomainError on empty input or a bad spec.
Split split_by_perturbation(const std::vector<QAExample>& examples, const SplitSpec& spec, std::uint64_t seed);

struct LeakageReport {
    std::size_t de_overlap = 0;
    std::size_t de_total = 0;
    std::size_t doc_overlap = 0;
    std::size_t doc_total = 0;

    std::optional<double> de_fraction() const;
    std::optional<double> doc_fraction() const;
};

/// Fraction of test examples whose gene appears among the
/// regulates_expression genes of the trace for the same pair.
LeakageReport leakage_overlap(const std::vector<QAExample>& test, const std::vector<ReasoningTrace>& traces);

/// DE result TSV, also readable as verifier ground truth.
std::string de_results_tsv(const std::vector<PairAnalysis>& pairs);

/// QA example JSONL. Throws FormatError naming the line.
std::vector<QAExample> parse_examples(std::string_view text, const std::string& source);

}  // namespace vctrace
