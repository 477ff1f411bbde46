#include "vctrace/metrics.hpp"

#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace vctrace {

std::optional<double> Fraction::value() const {
    if (denominator == 0) {
        return std::nullopt;
    }
    return static_cast<double>(numerator) / static_cast<double>(denominator);
}

void ValidityCounts::add(bool valid) {
    ++n_records;
    if (valid) {
        ++n_valid;
    }
}

void ValidityCounts::merge(const ValidityCounts& other) {
    n_records += other.n_records;
    n_valid += other.n_valid;
}

Fraction validity(const std::vector<CorpusRecord>& corpus, const SchemaRegistry& registry) {
    ValidityCounts counts;
    for (const auto& rec : corpus) {
        counts.add(rec.outcome && rec.outcome->ok() && validate_graph(*rec.outcome->trace, registry).valid);
    }
    return counts.fraction();
}

Verifiability verifiability(const std::vector<ReasoningTrace>& traces, const Lexicon& lexicon,
                            const SchemaRegistry& registry) {
    Verifiability out;
    double macro_sum = 0.0;
    for (const auto& t : traces) {
        std::size_t total = 0;
        std::size_t resolved = 0;
        for (const auto& n : t.nodes) {
            const auto* schema = registry.find(n.primitive);
            if (!schema) {
                continue;
            }
            for (const auto& [name, value] : n.args) {
                const auto* spec = schema->find(name);
                if (!spec) {
                    continue;
                }
                auto count = [&](const std::string& mention) {
                    ++total;
                    if (lexicon.resolve(mention).resolved()) {
                        ++resolved;
                    }
                };
                if (spec->kind == ArgKind::Entity && value.type != ArgValue::Type::List) {
                    count(value.text);
                } else if (spec->kind == ArgKind::EntityList && value.type == ArgValue::Type::List) {
                    std::for_each(value.items.begin(), value.items.end(), count);
                }
            }
        }
        out.micro.numerator += resolved;
        out.micro.denominator += total;
        if (total > 0) {
            macro_sum += static_cast<double>(resolved) / static_cast<double>(total);
            ++out.n_traces_in_macro;
        }
    }
    if (out.n_traces_in_macro > 0) {
        out.macro = macro_sum / static_cast<double>(out.n_traces_in_macro);
    }
    return out;
}

DtiScore dti_score(const std::vector<Verdict>& verdicts) {
    DtiScore out;
    double sum = 0.0;
    for (const auto& v : verdicts) {
        if (v.verifier != VerifierKind::Dti) {
            continue;
        }
        if (v.score) {
            sum += *v.score;
            ++out.n_scored;
        } else {
            ++out.n_unknown;
        }
    }
    if (out.n_scored > 0) {
        out.mean = sum / static_cast<double>(out.n_scored);
    }
    return out;
}

Fraction de_score(const std::vector<ReasoningTrace>& traces, const std::map<std::string, VerdictMap>& verdicts) {
    Fraction out;
    for (const auto& t : traces) {
        const bool has_de = std::any_of(t.nodes.begin(), t.nodes.end(),
                                        [](const ActionNode& n) { return n.primitive == "regulates_expression"; });
        if (!has_de) {
            continue;
        }
        ++out.denominator;
        auto it = verdicts.find(t.trace_id);
        if (it == verdicts.end()) {
            continue;
        }
        bool supported = false;
        for (const auto& [node, vs] : it->second) {
            for (const auto& v : vs) {
                supported = supported || (v.verifier == VerifierKind::De && v.status == VerdictStatus::Supported);
            }
        }
        if (supported) {
            ++out.numerator;
        }
    }
    return out;
}

nlohmann::json MetricsReport::to_json() const {
    auto frac = [](const Fraction& f) {
        return nlohmann::json{{"value", optional_number(f.value())},
                              {"numerator", f.numerator},
                              {"denominator", f.denominator}};
    };
    nlohmann::json j;
    j["validity"] = frac(validity);
    j["verifiability_micro"] = frac(verifiability.micro);
    j["verifiability_macro"] = {{"value", optional_number(verifiability.macro)},
                                {"n_traces", verifiability.n_traces_in_macro}};
    j["dti_score"] = {{"value", optional_number(dti.mean)}, {"n_scored", dti.n_scored}, {"n_unknown", dti.n_unknown}};
    j["de_score"] = frac(de);
    j["n_traces"] = n_traces;
    j["n_args"] = verifiability.micro.denominator;
    j["n_dti_verdicts"] = dti.n_scored + dti.n_unknown;
    return j;
}

std::string MetricsReport::to_table() const {
    auto cell = [](const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("n/a"); };
    std::ostringstream os;
    os << std::left << std::setw(10) << "Validity" << std::setw(15) << "Verifiability" << std::setw(8) << "DTI"
       << "DE" << "\n";
    os << std::left << std::setw(10) << cell(validity.value()) << std::setw(15) << cell(verifiability.micro.value())
       << std::setw(8) << cell(dti.mean) << cell(de.value()) << "\n";
    return os.str();
}

}  // namespace vctrace
