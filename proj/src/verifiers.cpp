#include "vctrace/verifiers.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <httplib.h>

#include <algorithm>

namespace vctrace {

std::string_view to_string(VerdictStatus s) {
    switch (s) {
    case VerdictStatus::Supported:
        return "supported";
    case VerdictStatus::Contradicted:
        return "contradicted";
    case VerdictStatus::Unknown:
        return "unknown";
    }
    return "unknown";
}

std::string_view to_string(VerifierKind k) {
    switch (k) {
    case VerifierKind::Dti:
        return "dti";
    case VerifierKind::De:
        return "de";
    case VerifierKind::Loc:
        return "loc";
    case VerifierKind::Pheno:
        return "pheno";
    }
    return "dti";
}

std::optional<VerdictStatus> parse_verdict_status(std::string_view s) {
    for (auto v : {VerdictStatus::Supported, VerdictStatus::Contradicted, VerdictStatus::Unknown}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

std::optional<VerifierKind> parse_verifier_kind(std::string_view s) {
    for (auto v : {VerifierKind::Dti, VerifierKind::De, VerifierKind::Loc, VerifierKind::Pheno}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

nlohmann::json to_json(const Verdict& v, std::string_view trace_id) {
    nlohmann::json j;
    j["trace_id"] = trace_id;
    j["node_id"] = v.node_id;
    j["subject"] = v.subject ? nlohmann::json(*v.subject) : nlohmann::json(nullptr);
    j["verifier"] = to_string(v.verifier);
    j["status"] = to_string(v.status);
    j["score"] = optional_number(v.score);
    return j;
}

std::pair<std::string, Verdict> verdict_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw FormatError("verdict record must be a JSON object");
    }
    for (const char* key : {"trace_id", "node_id", "verifier", "status"}) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw FormatError(std::string("verdict record: field '") + key + "' must be a string");
        }
    }
    Verdict v;
    v.node_id = j.at("node_id").get<std::string>();
    auto kind = parse_verifier_kind(j.at("verifier").get<std::string>());
    auto status = parse_verdict_status(j.at("status").get<std::string>());
    if (!kind || !status) {
        throw FormatError("verdict record: unknown verifier or status");
    }
    v.verifier = *kind;
    v.status = *status;
    if (j.contains("subject") && j.at("subject").is_string()) {
        v.subject = j.at("subject").get<std::string>();
    }
    if (j.contains("score") && j.at("score").is_number()) {
        v.score = j.at("score").get<double>();
        if (*v.score < 0.0 || *v.score > 1.0) {
            throw FormatError("verdict record: score outside [0, 1]");
        }
    }
    return {j.at("trace_id").get<std::string>(), std::move(v)};
}

std::string_view to_string(DELabel l) {
    switch (l) {
    case DELabel::Up:
        return "up";
    case DELabel::Down:
        return "down";
    case DELabel::Ns:
        return "ns";
    }
    return "ns";
}

std::optional<DELabel> parse_de_label(std::string_view s) {
    for (auto l : {DELabel::Up, DELabel::Down, DELabel::Ns}) {
        if (to_string(l) == s) {
            return l;
        }
    }
    return std::nullopt;
}

namespace {

std::string de_key(std::string_view p, std::string_view c, std::string_view g) {
    return fold(trim(p)) + '\t' + fold(trim(c)) + '\t' + fold(trim(g));
}

}  // namespace

void DEGroundTruth::add(std::string_view perturbation_id, std::string_view context_id, std::string_view gene,
                        DEGroundTruthRow row) {
    const bool significant = row.p_adj && *row.p_adj < alpha_;
    const bool consistent = (row.label == DELabel::Up && significant && row.log2fc > 0) ||
                            (row.label == DELabel::Down && significant && row.log2fc < 0) ||
                            (row.label == DELabel::Ns &&
                             !(significant && row.log2fc != 0));
    if (!consistent) {
        throw FormatError("DE ground truth: label '" + std::string(to_string(row.label)) + "' inconsistent with log2fc/p_adj for " +
                          std::string(perturbation_id) + "/" + std::string(context_id) + "/" + std::string(gene));
    }
    if (row.p_adj && (*row.p_adj < 0.0 || *row.p_adj > 1.0)) {
        throw FormatError("DE ground truth: p_adj outside [0, 1] for " + std::string(gene));
    }
    rows_[de_key(perturbation_id, context_id, gene)] = row;
}

const DEGroundTruthRow* DEGroundTruth::find(std::string_view perturbation_id, std::string_view context_id,
                                            std::string_view gene) const {
    auto it = rows_.find(de_key(perturbation_id, context_id, gene));
    return it == rows_.end() ? nullptr : &it->second;
}

DEGroundTruth DEGroundTruth::from_tsv(std::string_view text, const std::string& source, double alpha) {
    auto t = parse_tsv(text, source, {"perturbation_id", "context_id", "gene", "log2fc", "p_adj", "label"});
    DEGroundTruth gt(alpha);
    const auto cp = t.column("perturbation_id"), cc = t.column("context_id"), cg = t.column("gene"),
               cl = t.column("log2fc"), cpa = t.column("p_adj"), clab = t.column("label");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto where = source + ":" + std::to_string(t.line_numbers[r]);
        DEGroundTruthRow g;
        auto label = parse_de_label(row[clab]);
        if (!label) {
            throw FormatError(where + ": unknown label '" + row[clab] + "'");
        }
        g.label = *label;
        g.log2fc = row[cl] == "NA" ? 0.0 : parse_double(row[cl], where + " log2fc");
        if (row[cpa] != "NA") {
            g.p_adj = parse_double(row[cpa], where + " p_adj");
        }
        gt.add(row[cp], row[cc], row[cg], g);
    }
    return gt;
}

DEGroundTruth DEGroundTruth::load(const std::filesystem::path& path, double alpha) {
    return from_tsv(read_file(path), path.string(), alpha);
}

void TableDTIScorer::add(std::string_view compound_id, std::string_view protein_id, double score) {
    if (!(score >= 0.0 && score <= 1.0)) {
        throw DomainError("DTI score outside [0, 1] for " + std::string(compound_id) + "/" + std::string(protein_id));
    }
    table_[{fold(compound_id), fold(protein_id)}] = score;
}

TableDTIScorer TableDTIScorer::from_tsv(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source, {"compound_id", "protein_id", "score"});
    TableDTIScorer scorer;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        auto where = source + ":" + std::to_string(t.line_numbers[r]);
        auto s = parse_double(row[t.column("score")], where + " score");
        if (!(s >= 0.0 && s <= 1.0)) {
            throw FormatError(where + ": score outside [0, 1]");
        }
        scorer.add(row[t.column("compound_id")], row[t.column("protein_id")], s);
    }
    return scorer;
}

TableDTIScorer TableDTIScorer::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

std::optional<double> TableDTIScorer::score(const std::string& compound_id, const std::string& protein_id) const {
    auto it = table_.find({fold(compound_id), fold(protein_id)});
    if (it == table_.end()) {
        return std::nullopt;
    }
    return it->second;
}

HttpDTIScorer::HttpDTIScorer(std::string endpoint, std::chrono::seconds timeout) : timeout_(timeout) {
    const std::string scheme = "http://";
    if (endpoint.rfind(scheme, 0) != 0) {
        throw ConfigError("DTI scorer endpoint must start with http://: " + endpoint);
    }
    auto slash = endpoint.find('/', scheme.size());
    host_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

std::optional<double> HttpDTIScorer::score(const std::string& compound_id, const std::string& protein_id) const {
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    nlohmann::json req = {{"compound_id", compound_id}, {"protein_id", protein_id}};
    auto res = client.Post(path_, req.dump(), "application/json");
    if (!res) {
        throw VerifierError("", "DTI scorer unreachable at " + host_ + path_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 404) {
        return std::nullopt;
    }
    if (res->status != 200) {
        throw VerifierError("", "DTI scorer returned HTTP " + std::to_string(res->status));
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("score")) {
        throw VerifierError("", "DTI scorer returned a malformed response");
    }
    if (j.at("score").is_null()) {
        return std::nullopt;
    }
    if (!j.at("score").is_number()) {
        throw VerifierError("", "DTI scorer returned a non-numeric score");
    }
    auto s = j.at("score").get<double>();
    if (!(s >= 0.0 && s <= 1.0)) {
        throw VerifierError("", "DTI scorer returned a score outside [0, 1]");
    }
    return s;
}

void LocalizationTable::add(std::string_view protein_id, std::string_view compartment) {
    table_[fold(trim(protein_id))].insert(fold(trim(compartment)));
}

LocalizationTable LocalizationTable::from_tsv(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source, {"protein_id", "compartment", "source"});
    LocalizationTable loc;
    for (const auto& row : t.rows) {
        loc.add(row[t.column("protein_id")], row[t.column("compartment")]);
    }
    return loc;
}

LocalizationTable LocalizationTable::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

const std::set<std::string>* LocalizationTable::compartments(std::string_view protein_id) const {
    auto it = table_.find(fold(trim(protein_id)));
    return it == table_.end() ? nullptr : &it->second;
}

void PhenotypeDb::add(std::string_view entity_id, std::string_view phenotype_id) {
    pairs_.emplace(fold(trim(entity_id)), fold(trim(phenotype_id)));
}

PhenotypeDb PhenotypeDb::from_tsv(std::string_view text, const std::string& source) {
    auto t = parse_tsv(text, source, {"entity_id", "phenotype_id"});
    PhenotypeDb db;
    for (const auto& row : t.rows) {
        db.add(row[t.column("entity_id")], row[t.column("phenotype_id")]);
    }
    return db;
}

PhenotypeDb PhenotypeDb::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

bool PhenotypeDb::has(std::string_view entity_id, std::string_view phenotype_id) const {
    return pairs_.count({fold(trim(entity_id)), fold(trim(phenotype_id))}) > 0;
}

namespace {

// Keys a mention may be stored under in a ground-truth table: the mention
// itself plus, when the lexicon knows it, the entity id and canonical name.
std::vector<std::string> candidate_keys(std::string_view mention, const VerifierContext& ctx,
                                        std::optional<EntityType> hint = std::nullopt) {
    std::vector<std::string> keys{std::string(trim(mention))};
    if (ctx.lexicon) {
        auto r = ctx.lexicon->resolve(mention, hint);
        if (r.resolved()) {
            keys.push_back(*r.entity_id);
            if (const auto* e = ctx.lexicon->entry(*r.entity_id)) {
                keys.push_back(e->canonical);
            }
        }
    }
    std::vector<std::string> uniq;
    for (auto& k : keys) {
        if (std::find(uniq.begin(), uniq.end(), k) == uniq.end()) {
            uniq.push_back(std::move(k));
        }
    }
    return uniq;
}

std::string single_text(const ActionNode& node, std::string_view arg) {
    const auto* v = node.arg(arg);
    if (!v || v->type == ArgValue::Type::List) {
        return {};
    }
    return v->text;
}

}  // namespace

Verdict verify_dti(const ActionNode& node, const VerifierContext& ctx) {
    Verdict v;
    v.node_id = node.id;
    v.verifier = VerifierKind::Dti;
    v.status = VerdictStatus::Unknown;
    if (!ctx.lexicon || !ctx.dti) {
        return v;
    }
    auto actor = ctx.lexicon->resolve(single_text(node, "actor"), EntityType::Compound);
    auto target = ctx.lexicon->resolve(single_text(node, "target"), EntityType::Protein);
    if (!target.resolved()) {
        target = ctx.lexicon->resolve(single_text(node, "target"), EntityType::Gene);
    }
    if (!actor.resolved() || !target.resolved()) {
        return v;
    }
    std::optional<double> s;
    try {
        s = ctx.dti->score(*actor.entity_id, *target.entity_id);
    } catch (const VerifierError& e) {
        throw VerifierError(node.id, e.what());
    }
    if (s) {
        v.score = *s;
        v.status = VerdictStatus::Supported;
    }
    return v;
}

std::vector<Verdict> verify_de(const ActionNode& node, std::string_view perturbation, std::string_view context,
                               const VerifierContext& ctx) {
    std::vector<Verdict> out;
    const auto* genes = node.arg("genes");
    auto direction = fold(single_text(node, "direction"));
    if (!genes || genes->type != ArgValue::Type::List) {
        return out;
    }
    auto perts = candidate_keys(perturbation, ctx, EntityType::Compound);
    auto ctxs = candidate_keys(context, ctx, EntityType::CellLine);
    for (const auto& gene : genes->items) {
        Verdict v;
        v.node_id = node.id;
        v.subject = gene;
        v.verifier = VerifierKind::De;
        v.status = VerdictStatus::Unknown;
        const DEGroundTruthRow* row = nullptr;
        if (ctx.de) {
            auto gene_keys = candidate_keys(gene, ctx, EntityType::Gene);
            for (const auto& p : perts) {
                for (const auto& c : ctxs) {
                    for (const auto& g : gene_keys) {
                        if (!row) {
                            row = ctx.de->find(p, c, g);
                        }
                    }
                }
            }
        }
        if (row) {
            const bool claim_up = direction == "up";
            const bool claim_down = direction == "down";
            if ((claim_up && row->label == DELabel::Up) || (claim_down && row->label == DELabel::Down)) {
                v.status = VerdictStatus::Supported;
                v.score = 1.0;
            } else if (claim_up || claim_down) {
                v.status = VerdictStatus::Contradicted;
                v.score = 0.0;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

Verdict verify_loc(const ActionNode& node, const VerifierContext& ctx) {
    Verdict v;
    v.node_id = node.id;
    v.verifier = VerifierKind::Loc;
    v.status = VerdictStatus::Unknown;
    if (!ctx.loc) {
        return v;
    }
    const std::set<std::string>* annotated = nullptr;
    for (const auto& key : candidate_keys(single_text(node, "entity"), ctx, EntityType::Protein)) {
        if ((annotated = ctx.loc->compartments(key))) {
            break;
        }
    }
    if (!annotated) {
        return v;
    }
    std::vector<std::vector<std::string>> claimed;  // each claim's acceptable spellings
    for (const char* arg : {"from_loc", "to_loc"}) {
        auto text = single_text(node, arg);
        if (trim(text).empty()) {
            continue;
        }
        std::vector<std::string> spellings;
        for (const auto& k : candidate_keys(text, ctx, EntityType::Compartment)) {
            spellings.push_back(fold(k));
        }
        claimed.push_back(std::move(spellings));
    }
    if (claimed.empty()) {
        return v;
    }
    std::size_t matched = 0;
    for (const auto& spellings : claimed) {
        if (std::any_of(spellings.begin(), spellings.end(), [&](const auto& s) { return annotated->count(s) > 0; })) {
            ++matched;
        }
    }
    if (matched == claimed.size()) {
        v.status = VerdictStatus::Supported;
        v.score = 1.0;
    } else if (matched == 0) {
        v.status = VerdictStatus::Contradicted;
        v.score = 0.0;
    }
    return v;
}

Verdict verify_pheno(const ActionNode& node, const ReasoningTrace& trace, const VerifierContext& ctx) {
    Verdict v;
    v.node_id = node.id;
    v.verifier = VerifierKind::Pheno;
    v.status = VerdictStatus::Unknown;
    if (!ctx.pheno) {
        return v;
    }
    auto phenotypes = candidate_keys(single_text(node, "phenotype"), ctx, EntityType::Phenotype);
    auto associated = [&](std::string_view mention) {
        for (const auto& e : candidate_keys(mention, ctx)) {
            for (const auto& p : phenotypes) {
                if (ctx.pheno->has(e, p)) {
                    return true;
                }
            }
        }
        return false;
    };
    bool supported = associated(single_text(node, "actor"));
    if (!supported) {
        // Downstream clause: any entity named by an ancestor action.
        for (const auto& anc_id : ancestors(trace, node.id)) {
            const auto* anc = trace.node(anc_id);
            const auto* schema = anc ? ctx.registry->find(anc->primitive) : nullptr;
            if (!schema) {
                continue;
            }
            for (const auto& [name, value] : anc->args) {
                const auto* spec = schema->find(name);
                if (!spec || (spec->kind != ArgKind::Entity && spec->kind != ArgKind::EntityList)) {
                    continue;
                }
                if (value.type == ArgValue::Type::List) {
                    supported = std::any_of(value.items.begin(), value.items.end(), associated);
                } else {
                    supported = associated(value.text);
                }
                if (supported) {
                    break;
                }
            }
            if (supported) {
                break;
            }
        }
    }
    if (supported) {
        v.status = VerdictStatus::Supported;
        v.score = 1.0;
    }
    return v;
}

VerdictMap verify_trace(const ReasoningTrace& trace, const VerifierContext& ctx) {
    VerdictMap out;
    for (const auto& node : trace.nodes) {
        try {
            if (node.primitive == "binds_to") {
                out[node.id].push_back(verify_dti(node, ctx));
            } else if (node.primitive == "regulates_expression") {
                auto vs = verify_de(node, trace.perturbation, trace.context, ctx);
                if (!vs.empty()) {
                    out[node.id] = std::move(vs);
                }
            } else if (node.primitive == "localizes_to") {
                out[node.id].push_back(verify_loc(node, ctx));
            } else if (node.primitive == "induces_phenotype" || node.primitive == "alleviates_phenotype") {
                out[node.id].push_back(verify_pheno(node, trace, ctx));
            }
        } catch (const VerifierError& e) {
            if (e.node_id().empty()) {
                throw VerifierError(node.id, e.what());
            }
            throw;
        }
    }
    return out;
}

std::map<std::string, VerdictMap> parse_verdicts(std::string_view text, const std::string& source) {
    std::map<std::string, VerdictMap> out;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto where = source + ":" + std::to_string(line_no);
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw FormatError(where + ": invalid JSON");
        }
        try {
            auto [trace_id, v] = verdict_from_json(j);
            auto node = v.node_id;
            out[trace_id][node].push_back(std::move(v));
        } catch (const FormatError& e) {
            throw FormatError(where + ": " + e.what());
        }
    });
    return out;
}

}  // namespace vctrace
