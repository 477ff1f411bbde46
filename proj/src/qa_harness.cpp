#include "vctrace/qa_harness.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/parallel.hpp"
#include "vctrace/random.hpp"
#include "vctrace/text.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <random>
#include <tuple>

namespace vctrace {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    if (c >= 'A' && c <= 'F') {
        return c - 'A' + 10;
    }
    return -1;
}

}  // namespace

Fingerprint Fingerprint::from_hex(std::string compound_id, std::size_t n_bits, std::string_view hex) {
    if (n_bits == 0) {
        throw FormatError("fingerprint for " + compound_id + ": n_bits must be positive");
    }
    if (hex.size() != (n_bits + 3) / 4) {
        throw FormatError("fingerprint for " + compound_id + ": expected " + std::to_string((n_bits + 3) / 4) +
                          " hex digits, got " + std::to_string(hex.size()));
    }
    Fingerprint fp;
    fp.compound_id = std::move(compound_id);
    fp.n_bits = n_bits;
    fp.words.assign((n_bits + 63) / 64, 0);
    for (std::size_t d = 0; d < hex.size(); ++d) {
        const int v = hex_value(hex[d]);
        if (v < 0) {
            throw FormatError("fingerprint for " + fp.compound_id + ": invalid hex digit");
        }
        for (int b = 0; b < 4; ++b) {
            if (!((v >> (3 - b)) & 1)) {
                continue;
            }
            const std::size_t bit = d * 4 + static_cast<std::size_t>(b);
            if (bit >= n_bits) {
                throw FormatError("fingerprint for " + fp.compound_id + ": padding bits must be zero");
            }
            fp.words[bit / 64] |= std::uint64_t{1} << (bit % 64);
        }
    }
    return fp;
}

Fingerprint Fingerprint::from_bits(std::string compound_id, const std::vector<bool>& bits) {
    Fingerprint fp;
    fp.compound_id = std::move(compound_id);
    fp.n_bits = bits.size();
    fp.words.assign((bits.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) {
            fp.words[i / 64] |= std::uint64_t{1} << (i % 64);
        }
    }
    return fp;
}

std::size_t Fingerprint::popcount() const {
    std::size_t n = 0;
    for (auto w : words) {
        n += static_cast<std::size_t>(std::popcount(w));
    }
    return n;
}

FingerprintSet FingerprintSet::from_tsv(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source, {"compound_id", "n_bits", "hex"});
    FingerprintSet set;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto where = source + ":" + std::to_string(t.line_numbers[r]);
        auto n = parse_int(row[t.column("n_bits")], where + " n_bits");
        if (n <= 0) {
            throw FormatError(where + ": n_bits must be positive");
        }
        try {
            set.add(Fingerprint::from_hex(row[t.column("compound_id")], static_cast<std::size_t>(n),
                                          trim(row[t.column("hex")])));
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return set;
}

FingerprintSet FingerprintSet::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

void FingerprintSet::add(Fingerprint fp) {
    if (!by_id_.empty() && fp.n_bits != n_bits_) {
        throw FormatError("fingerprint for " + fp.compound_id + " has " + std::to_string(fp.n_bits) +
                          " bits; expected " + std::to_string(n_bits_));
    }
    n_bits_ = fp.n_bits;
    auto id = fp.compound_id;
    if (!by_id_.emplace(id, std::move(fp)).second) {
        throw FormatError("duplicate fingerprint for compound " + id);
    }
}

const Fingerprint* FingerprintSet::find(const std::string& compound_id) const {
    auto it = by_id_.find(compound_id);
    return it == by_id_.end() ? nullptr : &it->second;
}

const Fingerprint& FingerprintSet::at(const std::string& compound_id) const {
    const auto* fp = find(compound_id);
    if (!fp) {
        throw LookupError("no fingerprint for compound " + compound_id);
    }
    return *fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b, bool* both_empty) {
    if (a.n_bits != b.n_bits) {
        throw DomainError("tanimoto: fingerprints of " + a.compound_id + " and " + b.compound_id +
                          " differ in length");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.words.size(); ++i) {
        inter += static_cast<std::size_t>(std::popcount(a.words[i] & b.words[i]));
        uni += static_cast<std::size_t>(std::popcount(a.words[i] | b.words[i]));
    }
    if (both_empty) {
        *both_empty = uni == 0;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json to_json(const Prediction& p) {
    auto j = to_json(p.example);
    j["predicted"] = p.predicted;
    j["score"] = optional_number(p.score);
    return j;
}

std::vector<Prediction> predict_random(const std::vector<QAExample>& examples, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, "random-baseline"));
    std::vector<Prediction> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        out.push_back({e, static_cast<int>(rng() >> 63), 0.5});
    }
    return out;
}

namespace {

using Key = std::tuple<std::string, std::string, QATask>;  // context, gene, task

struct Mean {
    std::size_t ones = 0;
    std::size_t n = 0;
    double value() const { return static_cast<double>(ones) / static_cast<double>(n); }
};

std::map<QATask, Mean> base_rates(const std::vector<QAExample>& train) {
    std::map<QATask, Mean> rates;
    for (const auto& e : train) {
        auto& m = rates[e.task];
        m.ones += e.label == 1 ? 1 : 0;
        ++m.n;
    }
    return rates;
}

double fallback(const std::map<QATask, Mean>& rates, QATask task) {
    auto it = rates.find(task);
    return it == rates.end() ? 0.0 : it->second.value();
}

}  // namespace

std::vector<Prediction> predict_mean(const std::vector<QAExample>& test, const std::vector<QAExample>& train) {
    if (train.empty()) {
        throw DomainError("mean baseline: training set is empty");
    }
    std::map<Key, Mean> by_key;
    for (const auto& e : train) {
        auto& m = by_key[{e.context_id, e.gene, e.task}];
        m.ones += e.label == 1 ? 1 : 0;
        ++m.n;
    }
    const auto rates = base_rates(train);
    std::vector<Prediction> out;
    out.reserve(test.size());
    for (const auto& e : test) {
        auto it = by_key.find({e.context_id, e.gene, e.task});
        const double score = it != by_key.end() ? it->second.value() : fallback(rates, e.task);
        out.push_back({e, score > 0.5 ? 1 : 0, score});
    }
    return out;
}

std::vector<Prediction> predict_knn(const std::vector<QAExample>& test, const std::vector<QAExample>& train,
                                    const FingerprintSet& fingerprints, std::size_t k, std::size_t jobs,
                                    std::vector<std::string>* warnings) {
    if (k == 0) {
        throw DomainError("kNN baseline: k must be at least 1");
    }
    if (train.empty()) {
        throw DomainError("kNN baseline: training set is empty");
    }
    // compound -> key -> labels in training order
    std::map<std::string, std::map<Key, std::vector<int>>> labels;
    for (const auto& e : train) {
        fingerprints.at(e.perturbation_id);
        labels[e.perturbation_id][{e.context_id, e.gene, e.task}].push_back(e.label);
    }
    std::vector<std::string> test_compounds;
    for (const auto& e : test) {
        fingerprints.at(e.perturbation_id);
        test_compounds.push_back(e.perturbation_id);
    }
    std::sort(test_compounds.begin(), test_compounds.end());
    test_compounds.erase(std::unique(test_compounds.begin(), test_compounds.end()), test_compounds.end());

    // Neighbor ranking per distinct test compound.
    std::vector<std::vector<const std::string*>> rankings(test_compounds.size());
    std::vector<std::uint8_t> empty_pairs(test_compounds.size(), 0);
    parallel_for(test_compounds.size(), jobs, [&](std::size_t i) {
        const auto& query = fingerprints.at(test_compounds[i]);
        std::vector<std::pair<double, const std::string*>> scored;
        for (const auto& [compound, unused] : labels) {
            bool both_empty = false;
            scored.emplace_back(tanimoto(query, fingerprints.at(compound), &both_empty), &compound);
            empty_pairs[i] |= both_empty ? 1 : 0;
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) {
                return a.first > b.first;
            }
            return *a.second < *b.second;
        });
        for (const auto& s : scored) {
            rankings[i].push_back(s.second);
        }
    });
    if (warnings) {
        for (std::size_t i = 0; i < test_compounds.size(); ++i) {
            if (empty_pairs[i]) {
                warnings->push_back("tanimoto: empty fingerprint pair involving " + test_compounds[i] +
                                    "; similarity taken as 0");
            }
        }
    }

    const auto rates = base_rates(train);
    std::vector<Prediction> out(test.size());
    parallel_for(test.size(), jobs, [&](std::size_t t) {
        const auto& e = test[t];
        const auto ci = static_cast<std::size_t>(
            std::lower_bound(test_compounds.begin(), test_compounds.end(), e.perturbation_id) -
            test_compounds.begin());
        const auto& ranking = rankings[ci];
        const Key key{e.context_id, e.gene, e.task};
        std::size_t ones = 0, zeros = 0;
        std::optional<int> nearest;
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            if (r >= k && ones + zeros > 0) {
                break;
            }
            const auto& by_key = labels.at(*ranking[r]);
            auto it = by_key.find(key);
            if (it == by_key.end()) {
                continue;
            }
            for (int l : it->second) {
                (l == 1 ? ones : zeros) += 1;
            }
            if (!nearest) {
                nearest = it->second.front();
            }
        }
        Prediction p{e, 0, std::nullopt};
        if (ones + zeros == 0) {
            const double rate = fallback(rates, e.task);
            p.predicted = rate > 0.5 ? 1 : 0;
            p.score = rate;
        } else {
            p.score = static_cast<double>(ones) / static_cast<double>(ones + zeros);
            p.predicted = ones > zeros ? 1 : (zeros > ones ? 0 : *nearest);
        }
        out[t] = std::move(p);
    });
    return out;
}

void Confusion::add(int predicted, int label) {
    if (predicted == 1 && label == 1) {
        ++tp;
    } else if (predicted == 1) {
        ++fp;
    } else if (label == 1) {
        ++fn;
    } else {
        ++tn;
    }
}

double Confusion::f1() const {
    const auto denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double f1_score(const std::vector<int>& predicted, const std::vector<int>& labels) {
    if (predicted.size() != labels.size()) {
        throw DomainError("f1: predictions and labels differ in length");
    }
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        c.add(predicted[i], labels[i]);
    }
    return c.f1();
}

EvalReport evaluate(const std::vector<Prediction>& predictions, std::string method) {
    EvalReport r;
    r.method = std::move(method);
    std::map<std::pair<std::string, std::string>, Confusion> cells;
    std::map<std::string, Confusion> contexts, tasks;
    for (const auto& p : predictions) {
        const std::string task(to_string(p.example.task));
        cells[{p.example.context_id, task}].add(p.predicted, p.example.label);
        contexts[p.example.context_id].add(p.predicted, p.example.label);
        tasks[task].add(p.predicted, p.example.label);
        r.overall.confusion.add(p.predicted, p.example.label);
    }
    for (const auto& [key, c] : cells) {
        r.cells.push_back({key.first, key.second, c});
    }
    for (const auto& [ctx, c] : contexts) {
        r.per_context.push_back({ctx, "*", c});
    }
    for (const auto& [task, c] : tasks) {
        r.per_task.push_back({"*", task, c});
    }
    return r;
}

namespace {

nlohmann::json cell_json(const EvalCell& c) {
    return {{"context", c.context}, {"task", c.task},          {"n", c.confusion.n()},
            {"tp", c.confusion.tp}, {"fp", c.confusion.fp},    {"fn", c.confusion.fn},
            {"tn", c.confusion.tn}, {"f1", c.confusion.f1()}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["method"] = method;
    for (const char* name : {"cells", "per_context", "per_task"}) {
        j[name] = nlohmann::json::array();
    }
    for (const auto& c : cells) {
        j["cells"].push_back(cell_json(c));
    }
    for (const auto& c : per_context) {
        j["per_context"].push_back(cell_json(c));
    }
    for (const auto& c : per_task) {
        j["per_task"].push_back(cell_json(c));
    }
    j["overall"] = cell_json(overall);
    return j;
}

std::string EvalReport::to_table() const {
    std::vector<const EvalCell*> rows;
    for (const auto& c : cells) {
        rows.push_back(&c);
    }
    for (const auto& c : per_context) {
        rows.push_back(&c);
    }
    for (const auto& c : per_task) {
        rows.push_back(&c);
    }
    rows.push_back(&overall);
    std::size_t wc = 7;  // "context"
    for (const auto* c : rows) {
        wc = std::max(wc, c->context.size());
    }
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s  %-4s  %6s  %6s\n", static_cast<int>(wc), "context", "task", "n", "F1");
    out += "[" + method + "]\n" + buf;
    for (const auto* c : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %-4s  %6zu  %6.4f\n", static_cast<int>(wc), c->context.c_str(),
                      c->task.c_str(), c->confusion.n(), c->confusion.f1());
        out += buf;
    }
    return out;
}

}  // namespace vctrace
