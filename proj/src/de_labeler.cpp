#include "vctrace/de_labeler.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/parallel.hpp"
#include "vctrace/random.hpp"
#include "vctrace/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace vctrace {

void CountsMatrix::check() const {
    if (counts.size() != genes.size() * samples.size()) {
        throw FormatError("counts matrix: dimensions do not match data size");
    }
    for (auto c : counts) {
        if (c < 0) {
            throw FormatError("counts matrix: negative count");
        }
    }
}

CountsMatrix parse_counts_tsv(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source);
    if (t.header.size() < 2) {
        throw FormatError(source + ": counts table needs a gene column and at least one sample column");
    }
    CountsMatrix m;
    m.samples.assign(t.header.begin() + 1, t.header.end());
    std::set<std::string> seen(m.samples.begin(), m.samples.end());
    if (seen.size() != m.samples.size()) {
        throw FormatError(source + ": duplicate sample column");
    }
    m.counts.reserve(t.rows.size() * m.samples.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        m.genes.push_back(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c) {
            auto v = parse_int(row[c], source + ":" + std::to_string(t.line_numbers[r]));
            if (v < 0) {
                throw FormatError(source + ":" + std::to_string(t.line_numbers[r]) + ": negative count");
            }
            m.counts.push_back(v);
        }
    }
    return m;
}

CountsMatrix read_counts_tsv(const std::filesystem::path& path) {
    return parse_counts_tsv(read_file(path), path.string());
}

std::string_view to_string(Condition c) { return c == Condition::Treated ? "treated" : "control"; }

std::vector<SampleMeta> parse_sample_meta(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source, {"sample_id", "perturbation_id", "context_id", "condition", "replicate"});
    std::vector<SampleMeta> out;
    std::set<std::string> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto where = source + ":" + std::to_string(t.line_numbers[r]);
        SampleMeta s;
        s.sample_id = row[t.column("sample_id")];
        s.perturbation_id = row[t.column("perturbation_id")];
        s.context_id = row[t.column("context_id")];
        auto cond = fold(row[t.column("condition")]);
        if (cond == "treated") {
            s.condition = Condition::Treated;
        } else if (cond == "control") {
            s.condition = Condition::Control;
        } else {
            throw FormatError(where + ": condition must be treated or control");
        }
        s.replicate = static_cast<int>(parse_int(row[t.column("replicate")], where + " replicate"));
        if (!ids.insert(s.sample_id).second) {
            throw FormatError(where + ": duplicate sample_id " + s.sample_id);
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SampleMeta> read_sample_meta(const std::filesystem::path& path) {
    return parse_sample_meta(read_file(path), path.string());
}

PseudobulkResult pseudobulk(const CountsMatrix& cells, const std::vector<SampleMeta>& cell_meta) {
    cells.check();
    PseudobulkResult out;
    std::map<std::string, const SampleMeta*, std::less<>> meta_by_id;
    for (const auto& m : cell_meta) {
        meta_by_id.emplace(m.sample_id, &m);
    }
    using Key = std::tuple<std::string, std::string, int, int>;  // pert, ctx, condition, replicate
    std::map<Key, std::vector<std::size_t>> groups;
    std::map<Key, const SampleMeta*> exemplar;
    for (std::size_t c = 0; c < cells.samples.size(); ++c) {
        auto it = meta_by_id.find(cells.samples[c]);
        if (it == meta_by_id.end()) {
            out.warnings.push_back("cell '" + cells.samples[c] + "' has no metadata; dropped");
            continue;
        }
        const auto* m = it->second;
        Key key{m->perturbation_id, m->context_id, m->condition == Condition::Treated ? 0 : 1, m->replicate};
        groups[key].push_back(c);
        exemplar.emplace(key, m);
    }
    out.matrix.genes = cells.genes;
    for (const auto& [key, members] : groups) {
        const auto* m = exemplar.at(key);
        SampleMeta s = *m;
        s.sample_id = m->perturbation_id + "|" + m->context_id + "|" + std::string(to_string(m->condition)) + "|" +
                      std::to_string(m->replicate);
        out.samples.push_back(std::move(s));
        out.matrix.samples.push_back(out.samples.back().sample_id);
    }
    const auto n_groups = groups.size();
    out.matrix.counts.assign(cells.genes.size() * n_groups, 0);
    std::size_t gi = 0;
    for (const auto& [key, members] : groups) {
        for (std::size_t g = 0; g < cells.genes.size(); ++g) {
            std::int64_t sum = 0;
            for (auto c : members) {
                sum += cells.at(g, c);
            }
            out.matrix.counts[g * n_groups + gi] = sum;
        }
        ++gi;
    }
    return out;
}

std::vector<double> size_factors(const CountsMatrix& counts) {
    counts.check();
    const auto n = counts.samples.size();
    std::vector<std::vector<double>> ratios(n);
    for (std::size_t g = 0; g < counts.genes.size(); ++g) {
        auto row = counts.row(g);
        if (n == 0 || std::any_of(row.begin(), row.end(), [](std::int64_t c) { return c <= 0; })) {
            continue;
        }
        double log_mean = 0.0;
        for (auto c : row) {
            log_mean += std::log(static_cast<double>(c));
        }
        log_mean /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            ratios[j].push_back(std::exp(std::log(static_cast<double>(row[j])) - log_mean));
        }
    }
    if (n == 0 || ratios[0].empty()) {
        throw DomainError("size factors: no gene has positive counts in every sample");
    }
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto& r = ratios[j];
        std::sort(r.begin(), r.end());
        const auto m = r.size();
        out[j] = m % 2 ? r[m / 2] : 0.5 * (r[m / 2 - 1] + r[m / 2]);
    }
    return out;
}

std::string_view to_string(FitStatus s) {
    switch (s) {
    case FitStatus::Ok:
        return "ok";
    case FitStatus::AllZero:
        return "all_zero";
    case FitStatus::NonConverged:
        return "non_converged";
    }
    return "ok";
}

namespace {

void check_design(std::span<const std::int64_t> counts, std::span<const double> size_factors,
                  std::span<const std::uint8_t> treated) {
    if (counts.size() != size_factors.size() || counts.size() != treated.size()) {
        throw DomainError("NB GLM: counts, size factors and design differ in length");
    }
    std::size_t n_treated = 0;
    for (auto t : treated) {
        n_treated += t ? 1 : 0;
    }
    if (n_treated < 2 || counts.size() - n_treated < 2) {
        throw DomainError("NB GLM: need at least 2 treated and 2 control samples");
    }
    for (auto s : size_factors) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw DomainError("NB GLM: size factors must be positive and finite");
        }
    }
}

}  // namespace

double moments_dispersion(std::span<const std::int64_t> counts, std::span<const double> size_factors,
                          std::span<const std::uint8_t> treated, double min_dispersion) {
    const auto n = counts.size();
    double sum[2] = {0.0, 0.0};
    std::size_t num[2] = {0, 0};
    for (std::size_t j = 0; j < n; ++j) {
        const int c = treated[j] ? 1 : 0;
        sum[c] += static_cast<double>(counts[j]) / size_factors[j];
        ++num[c];
    }
    const double mean[2] = {num[0] ? sum[0] / static_cast<double>(num[0]) : 0.0,
                            num[1] ? sum[1] / static_cast<double>(num[1]) : 0.0};
    // E[(q - m_c)^2] = m_c / s + a m_c^2 for q = y / s, pooled over both groups.
    double ss = 0.0;
    double poisson_part = 0.0;
    double mean_sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const int c = treated[j] ? 1 : 0;
        const double q = static_cast<double>(counts[j]) / size_factors[j];
        ss += (q - mean[c]) * (q - mean[c]);
        poisson_part += mean[c] / size_factors[j];
        mean_sq += mean[c] * mean[c];
    }
    if (n <= 2 || mean_sq <= 0.0) {
        return min_dispersion;
    }
    const double var = ss / static_cast<double>(n - 2);
    const double a = (var - poisson_part / static_cast<double>(n)) / (mean_sq / static_cast<double>(n));
    return std::max(a, min_dispersion);
}

NbFit fit_nb_glm(std::span<const std::int64_t> counts, std::span<const double> size_factors,
                 std::span<const std::uint8_t> treated, const NbGlmOptions& options) {
    check_design(counts, size_factors, treated);
    NbFit fit;
    if (std::all_of(counts.begin(), counts.end(), [](std::int64_t c) { return c == 0; })) {
        fit.status = FitStatus::AllZero;
        return fit;
    }
    const auto n = counts.size();
    const double alpha = moments_dispersion(counts, size_factors, treated, options.min_dispersion);
    fit.dispersion = alpha;

    // Start from the group means of normalized counts.
    double sum[2] = {0.0, 0.0};
    double cnt[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        const int c = treated[j] ? 1 : 0;
        sum[c] += static_cast<double>(counts[j]) / size_factors[j];
        cnt[c] += 1.0;
    }
    auto safe_log = [](double m) { return std::log(std::max(m, 0.1)); };
    double b0 = safe_log(sum[0] / cnt[0]);
    double b1 = safe_log(sum[1] / cnt[1]) - b0;

    auto normal_matrix = [&](double beta0, double beta1, double& a, double& b, double& det, double* rhs0,
                             double* rhs1) {
        a = b = 0.0;
        double r0 = 0.0, r1 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double t = treated[j] ? 1.0 : 0.0;
            const double eta = beta0 + beta1 * t;
            const double mu = size_factors[j] * std::exp(eta);
            const double w = mu / (1.0 + alpha * mu);
            const double z = eta + (static_cast<double>(counts[j]) - mu) / mu;
            a += w;
            b += w * t;
            r0 += w * z;
            r1 += w * t * z;
        }
        // X'WX = [[a, b], [b, b]] because the treated indicator is 0/1.
        det = a * b - b * b;
        if (rhs0) {
            *rhs0 = r0;
            *rhs1 = r1;
        }
    };

    bool converged = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        fit.iterations = it;
        double a, b, det, r0, r1;
        normal_matrix(b0, b1, a, b, det, &r0, &r1);
        if (!std::isfinite(det) || det <= 1e-300 * std::max(1.0, a * a)) {
            break;
        }
        const double nb0 = (b * r0 - b * r1) / det;
        const double nb1 = (-b * r0 + a * r1) / det;
        if (!std::isfinite(nb0) || !std::isfinite(nb1)) {
            break;
        }
        const double delta = std::max(std::abs(nb0 - b0), std::abs(nb1 - b1));
        b0 = nb0;
        b1 = nb1;
        if (delta < options.tolerance) {
            converged = true;
            break;
        }
    }
    fit.intercept = b0;
    fit.effect = b1;
    if (!converged) {
        fit.status = FitStatus::NonConverged;
        return fit;
    }
    double a, b, det;
    normal_matrix(b0, b1, a, b, det, nullptr, nullptr);
    if (!std::isfinite(det) || det <= 0.0) {
        fit.status = FitStatus::NonConverged;
        return fit;
    }
    fit.se_effect = std::sqrt(a / det);
    fit.status = FitStatus::Ok;
    return fit;
}

WaldResult wald_test(double effect, double se) {
    if (!(se > 0.0) || !std::isfinite(se)) {
        throw DomainError("Wald test: standard error must be positive and finite");
    }
    WaldResult r;
    r.z = effect / se;
    r.p = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    return r;
}

std::vector<double> bh_adjust(std::span<const double> p_values) {
    const auto m = p_values.size();
    for (auto p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DomainError("BH adjustment: p-values must lie in [0, 1]");
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> out(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const auto i = order[k];
        const double scaled = p_values[i] * (static_cast<double>(m) / static_cast<double>(k + 1));
        running = std::min(running, scaled);
        out[i] = std::min(running, 1.0);
    }
    return out;
}

std::vector<DELabel> label_genes(const std::vector<DEResult>& results, double alpha) {
    std::vector<DELabel> out;
    out.reserve(results.size());
    for (const auto& r : results) {
        if (r.status == FitStatus::Ok && r.p_adj && *r.p_adj < alpha && r.log2fc && *r.log2fc != 0.0) {
            out.push_back(*r.log2fc > 0.0 ? DELabel::Up : DELabel::Down);
        } else {
            out.push_back(DELabel::Ns);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> analysis_pairs(const std::vector<SampleMeta>& samples) {
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& s : samples) {
        pairs.emplace(s.perturbation_id, s.context_id);
    }
    return {pairs.begin(), pairs.end()};
}

PairAnalysis analyze_pair(const CountsMatrix& counts, const std::vector<SampleMeta>& samples,
                          const std::string& perturbation_id, const std::string& context_id, double alpha,
                          std::size_t jobs) {
    counts.check();
    std::map<std::string, std::size_t, std::less<>> column;
    for (std::size_t j = 0; j < counts.samples.size(); ++j) {
        column.emplace(counts.samples[j], j);
    }
    CountsMatrix sub;
    sub.genes = counts.genes;
    std::vector<std::size_t> cols;
    std::vector<std::uint8_t> treated;
    for (const auto& s : samples) {
        if (s.perturbation_id != perturbation_id || s.context_id != context_id) {
            continue;
        }
        auto it = column.find(s.sample_id);
        if (it == column.end()) {
            throw FormatError("sample '" + s.sample_id + "' has metadata but no counts column");
        }
        cols.push_back(it->second);
        sub.samples.push_back(s.sample_id);
        treated.push_back(s.condition == Condition::Treated ? 1 : 0);
    }
    const auto n_treated = static_cast<std::size_t>(std::count(treated.begin(), treated.end(), 1));
    if (n_treated < 2 || treated.size() - n_treated < 2) {
        throw DomainError("pair " + perturbation_id + "/" + context_id +
                          " needs at least 2 treated and 2 control samples");
    }
    sub.counts.reserve(sub.genes.size() * cols.size());
    for (std::size_t g = 0; g < sub.genes.size(); ++g) {
        for (auto c : cols) {
            sub.counts.push_back(counts.at(g, c));
        }
    }
    const auto sf = size_factors(sub);

    PairAnalysis out{perturbation_id, context_id, std::vector<DEResult>(sub.genes.size())};
    parallel_for(sub.genes.size(), jobs, [&](std::size_t g) {
        auto& r = out.results[g];
        r.gene = sub.genes[g];
        auto fit = fit_nb_glm(sub.row(g), sf, treated);
        r.status = fit.status;
        if (fit.status != FitStatus::Ok) {
            return;
        }
        auto w = wald_test(fit.effect, fit.se_effect);
        r.log2fc = fit.effect / std::log(2.0);
        r.se = fit.se_effect / std::log(2.0);
        r.wald_z = w.z;
        r.p = w.p;
    });

    std::vector<double> tested_p;
    std::vector<std::size_t> tested_idx;
    for (std::size_t g = 0; g < out.results.size(); ++g) {
        if (out.results[g].status == FitStatus::Ok) {
            tested_p.push_back(*out.results[g].p);
            tested_idx.push_back(g);
        }
    }
    auto adj = bh_adjust(tested_p);
    for (std::size_t k = 0; k < tested_idx.size(); ++k) {
        out.results[tested_idx[k]].p_adj = adj[k];
    }
    auto labels = label_genes(out.results, alpha);
    for (std::size_t g = 0; g < labels.size(); ++g) {
        out.results[g].label = labels[g];
    }
    return out;
}

std::string_view to_string(QATask t) { return t == QATask::De ? "de" : "doc"; }

std::optional<QATask> parse_qa_task(std::string_view s) {
    if (s == "de") {
        return QATask::De;
    }
    if (s == "doc") {
        return QATask::Doc;
    }
    return std::nullopt;
}

nlohmann::json to_json(const QAExample& e) {
    return {{"perturbation_id", e.perturbation_id},
            {"context_id", e.context_id},
            {"gene", e.gene},
            {"task", to_string(e.task)},
            {"label", e.label}};
}

QAExample qa_example_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw FormatError("QA example must be a JSON object");
    }
    for (const char* key : {"perturbation_id", "context_id", "gene", "task"}) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw FormatError(std::string("QA example: field '") + key + "' must be a string");
        }
    }
    if (!j.contains("label") || !j.at("label").is_number_integer()) {
        throw FormatError("QA example: field 'label' must be 0 or 1");
    }
    QAExample e;
    e.perturbation_id = j.at("perturbation_id").get<std::string>();
    e.context_id = j.at("context_id").get<std::string>();
    e.gene = j.at("gene").get<std::string>();
    auto task = parse_qa_task(j.at("task").get<std::string>());
    if (!task) {
        throw FormatError("QA example: task must be de or doc");
    }
    e.task = *task;
    e.label = j.at("label").get<int>();
    if (e.label != 0 && e.label != 1) {
        throw FormatError("QA example: label must be 0 or 1");
    }
    return e;
}

ExampleSet build_examples(const PairAnalysis& pair, std::uint64_t seed, const LabelingOptions& options) {
    std::vector<const DEResult*> up, down, ns;
    for (const auto& r : pair.results) {
        if (r.label == DELabel::Up) {
            up.push_back(&r);
        } else if (r.label == DELabel::Down) {
            down.push_back(&r);
        } else if (r.status == FitStatus::Ok) {
            ns.push_back(&r);
        }
    }
    auto by_magnitude = [](const DEResult* a, const DEResult* b) {
        const double ma = std::abs(*a->log2fc), mb = std::abs(*b->log2fc);
        if (ma != mb) {
            return ma > mb;
        }
        return a->gene < b->gene;
    };
    std::sort(up.begin(), up.end(), by_magnitude);
    std::sort(down.begin(), down.end(), by_magnitude);
    std::sort(ns.begin(), ns.end(), [](const DEResult* a, const DEResult* b) { return a->gene < b->gene; });

    ExampleSet out;
    out.n_up = std::min(options.top_n, up.size());
    out.n_down = std::min(options.top_n, down.size());
    out.shortfall_up = options.top_n - out.n_up;
    out.shortfall_down = options.top_n - out.n_down;
    up.resize(out.n_up);
    down.resize(out.n_down);

    std::mt19937_64 rng(mix_seed(seed, pair.perturbation_id + '\t' + pair.context_id));
    auto picks = sample_without_replacement(ns.size(), options.n_nonreg, rng);
    std::sort(picks.begin(), picks.end());
    out.n_ns = picks.size();
    out.shortfall_ns = options.n_nonreg - out.n_ns;

    auto emit = [&](const DEResult* r, QATask task, int label) {
        out.examples.push_back({pair.perturbation_id, pair.context_id, r->gene, task, label});
    };
    for (const auto* r : up) {
        emit(r, QATask::De, 1);
    }
    for (const auto* r : down) {
        emit(r, QATask::De, 1);
    }
    for (auto i : picks) {
        emit(ns[i], QATask::De, 0);
    }
    for (const auto* r : up) {
        emit(r, QATask::Doc, 1);
    }
    for (const auto* r : down) {
        emit(r, QATask::Doc, 0);
    }
    return out;
}

Split split_by_perturbation(const std::vector<QAExample>& examples, const SplitSpec& spec, std::uint64_t seed) {
    if (examples.empty()) {
        throw DomainError("split: no examples");
    }
    if (spec.test_fraction.has_value() == spec.n_test.has_value()) {
        throw DomainError("split: give exactly one of test_fraction or n_test");
    }
    if (spec.test_fraction && !(*spec.test_fraction >= 0.0 && *spec.test_fraction <= 1.0)) {
        throw DomainError("split: test_fraction must lie in [0, 1]");
    }
    std::set<std::string> unique;
    std::map<std::string, std::size_t> per_pert;
    for (const auto& e : examples) {
        unique.insert(e.perturbation_id);
        ++per_pert[e.perturbation_id];
    }
    std::vector<std::string> perts(unique.begin(), unique.end());
    std::mt19937_64 rng(mix_seed(seed, "split"));
    seeded_shuffle(perts, rng);

    const std::size_t p = perts.size();
    const std::size_t max_test = p >= 2 ? p - 1 : 0;
    std::size_t n_test_perts = 0;
    if (spec.test_fraction) {
        auto want = static_cast<std::size_t>(std::llround(*spec.test_fraction * static_cast<double>(p)));
        if (*spec.test_fraction > 0.0) {
            want = std::max<std::size_t>(want, 1);
        }
        n_test_perts = std::min(want, max_test);
    } else {
        std::size_t pool = 0;
        while (n_test_perts < max_test && pool < *spec.n_test) {
            pool += per_pert[perts[n_test_perts]];
            ++n_test_perts;
        }
    }

    Split out;
    std::set<std::string> test_set(perts.begin(), perts.begin() + static_cast<std::ptrdiff_t>(n_test_perts));
    out.test_perturbations.assign(test_set.begin(), test_set.end());
    std::set<std::string> train_set(perts.begin() + static_cast<std::ptrdiff_t>(n_test_perts), perts.end());
    out.train_perturbations.assign(train_set.begin(), train_set.end());

    std::vector<const QAExample*> test_pool;
    for (const auto& e : examples) {
        if (test_set.count(e.perturbation_id)) {
            test_pool.push_back(&e);
        } else {
            out.train.push_back(e);
        }
    }
    if (spec.n_test && test_pool.size() > *spec.n_test) {
        auto picks = sample_without_replacement(test_pool.size(), *spec.n_test, rng);
        std::sort(picks.begin(), picks.end());
        for (auto i : picks) {
            out.test.push_back(*test_pool[i]);
        }
        out.n_dropped = test_pool.size() - picks.size();
    } else {
        for (const auto* e : test_pool) {
            out.test.push_back(*e);
        }
    }
    return out;
}

std::optional<double> LeakageReport::de_fraction() const {
    if (de_total == 0) {
        return std::nullopt;
    }
    return static_cast<double>(de_overlap) / static_cast<double>(de_total);
}

std::optional<double> LeakageReport::doc_fraction() const {
    if (doc_total == 0) {
        return std::nullopt;
    }
    return static_cast<double>(doc_overlap) / static_cast<double>(doc_total);
}

LeakageReport leakage_overlap(const std::vector<QAExample>& test, const std::vector<ReasoningTrace>& traces) {
    std::map<std::pair<std::string, std::string>, std::set<std::string>> genes_by_pair;
    for (const auto& t : traces) {
        auto& genes = genes_by_pair[{fold(trim(t.perturbation)), fold(trim(t.context))}];
        for (const auto& n : t.nodes) {
            if (n.primitive != "regulates_expression") {
                continue;
            }
            if (const auto* v = n.arg("genes"); v && v->type == ArgValue::Type::List) {
                for (const auto& g : v->items) {
                    genes.insert(fold(trim(g)));
                }
            }
        }
    }
    LeakageReport out;
    for (const auto& e : test) {
        auto it = genes_by_pair.find({fold(trim(e.perturbation_id)), fold(trim(e.context_id))});
        const bool overlap = it != genes_by_pair.end() && it->second.count(fold(trim(e.gene))) > 0;
        if (e.task == QATask::De) {
            ++out.de_total;
            out.de_overlap += overlap ? 1 : 0;
        } else {
            ++out.doc_total;
            out.doc_overlap += overlap ? 1 : 0;
        }
    }
    return out;
}

std::string de_results_tsv(const std::vector<PairAnalysis>& pairs) {
    auto num = [](const std::optional<double>& v) {
        if (!v) {
            return std::string("NA");
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.10g", *v);
        return std::string(buf);
    };
    std::string out = "perturbation_id\tcontext_id\tgene\tlog2fc\tse\twald_z\tp\tp_adj\tlabel\tstatus\n";
    for (const auto& pa : pairs) {
        for (const auto& r : pa.results) {
            out += pa.perturbation_id + "\t" + pa.context_id + "\t" + r.gene + "\t" + num(r.log2fc) + "\t" +
                   num(r.se) + "\t" + num(r.wald_z) + "\t" + num(r.p) + "\t" + num(r.p_adj) + "\t" +
                   std::string(to_string(r.label)) + "\t" + std::string(to_string(r.status)) + "\n";
        }
    }
    return out;
}

std::vector<QAExample> parse_examples(std::string_view text, const std::string& source) {
    std::vector<QAExample> out;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto where = source + ":" + std::to_string(line_no);
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw FormatError(where + ": invalid JSON");
        }
        try {
            out.push_back(qa_example_from_json(j));
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
    });
    return out;
}

}  // namespace vctrace
