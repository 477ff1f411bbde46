#pragma once

#include "vctrace/de_labeler.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vctrace {

/// Fixed-length compound fingerprint; bit 0 is the most significant bit of
/// the first hex digit.
struct Fingerprint {
    std::string compound_id;
    std::size_t n_bits = 0;
    std::vector<std::uint64_t> words;

    static Fingerprint from_hex(std::string compound_id, std::size_t n_bits, std::string_view hex);
    static Fingerprint from_bits(std::string compound_id, const std::vector<bool>& bits);

    bool test(std::size_t bit) const { return (words[bit / 64] >> (bit % 64)) & 1U; }
    std::size_t popcount() const;
};

class FingerprintSet {
public:
    /// TSV with columns compound_id, n_bits, hex. Throws FormatError on
    /// malformed hex, duplicate ids, or mixed lengths.
    static FingerprintSet from_tsv(std::string_view text, const std::string& source);
    static FingerprintSet load(const std::filesystem::path& path);

    void add(Fingerprint fp);
    const Fingerprint* find(const std::string& compound_id) const;
    /// Throws LookupError naming the compound.
    const Fingerprint& at(const std::string& compound_id) const;
    std::size_t n_bits() const { return n_bits_; }
    std::size_t size() const { return by_id_.size(); }

private:
    std::map<std::string, Fingerprint> by_id_;
    std::size_t n_bits_ = 0;
};

/// |a & b| / |a | b|. Two empty fingerprints score 0 and set `*both_empty`.
/// Throws DomainError when lengths differ.
double tanimoto(const Fingerprint& a, const Fingerprint& b, bool* both_empty = nullptr);

struct Prediction {
    QAExample example;
    int predicted = 0;
    std::optional<double> score;
};

nlohmann::json to_json(const Prediction& p);

/// Seeded fair coin per example.
std::vector<Prediction> predict_random(const std::vector<QAExample>& examples, std::uint64_t seed);

/// Mean training label over the same (context, gene, task); falls back to the
/// task's base rate in training. Predicts 1 only when the score exceeds 0.5.
/// Throws DomainError when `train` is empty.
std::vector<Prediction> predict_mean(const std::vector<QAExample>& test, const std::vector<QAExample>& train);

/// Majority vote over the labels of the k training compounds most similar to
/// the test compound (ties by compound id), extending past k until some
/// neighbor has a label for the key. A tied vote takes the nearest
/// contributing compound's label. Throws LookupError for a compound without
/// a fingerprint and DomainError when k == 0 or `train` is empty.
std::vector<Prediction> predict_knn(const std::vector<QAExample>& test, const std::vector<QAExample>& train,
                                    const FingerprintSet& fingerprints, std::size_t k, std::size_t jobs = 1,
                                    std::vector<std::string>* warnings = nullptr);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    void add(int predicted, int label);
    double f1() const;
    std::size_t n() const { return tp + fp + fn + tn; }
};

/// 2TP / (2TP + FP + FN), or 0 when that denominator is zero.
double f1_score(const std::vector<int>& predicted, const std::vector<int>& labels);

struct EvalCell {
    std::string context;  // "*" for a pooled marginal
    std::string task;     // "*" for a pooled marginal
    Confusion confusion;
};

struct EvalReport {
    std::string method;
    std::vector<EvalCell> cells;        // per (context, task), sorted
    std::vector<EvalCell> per_context;  // all tasks pooled
    std::vector<EvalCell> per_task;     // all contexts pooled
    EvalCell overall{"*", "*", {}};

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Groups predictions by (context, task); each prediction carries its label.
EvalReport evaluate(const std::vector<Prediction>& predictions, std::string method);

}  // namespace vctrace
