#include "vctrace/pipeline.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/parallel.hpp"
#include "vctrace/text.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>

namespace vctrace {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

namespace {

// Calls fn(begin, end, name) for every "{identifier}" in text.
template <typename Fn>
void scan_placeholders(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        auto close = text.find('}', pos + 1);
        if (close == std::string_view::npos) {
            return;
        }
        auto name = text.substr(pos + 1, close - pos - 1);
        if (is_identifier(name)) {
            fn(pos, close + 1, std::string(name));
            pos = close + 1;
        } else {
            ++pos;
        }
    }
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text, std::string name) : text_(std::move(text)), name_(std::move(name)) {
    scan_placeholders(text_, [&](std::size_t, std::size_t, std::string n) { placeholders_.insert(std::move(n)); });
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return PromptTemplate(read_file(path), path.filename().string());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars) const {
    std::string out;
    std::size_t last = 0;
    scan_placeholders(text_, [&](std::size_t begin, std::size_t end, const std::string& n) {
        auto it = vars.find(n);
        if (it == vars.end()) {
            throw ConfigError("template " + name_ + ": no value for placeholder {" + n + "}");
        }
        out.append(text_, last, begin - last);
        out += it->second;
        last = end;
    });
    out.append(text_, last, std::string::npos);
    return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet t;
    t.report = PromptTemplate::load(dir / "report.txt");
    t.construct = PromptTemplate::load(dir / "construct.txt");
    t.one_step = PromptTemplate::load(dir / "one_step.txt");
    t.stub_report = PromptTemplate::load(dir / "stub_report.txt");
    t.stub_construct = PromptTemplate::load(dir / "stub_construct.txt");
    return t;
}

std::set<std::string> TemplateSet::prompt_variables() const {
    std::set<std::string> out;
    for (const auto* t : {&report, &construct, &one_step}) {
        out.insert(t->placeholders().begin(), t->placeholders().end());
    }
    return out;
}

StubProvider::StubProvider(PromptTemplate report, PromptTemplate construct)
    : report_(std::move(report)), construct_(std::move(construct)) {}

std::string StubProvider::generate(const GenerationRequest& request) const {
    try {
        if (request.stage == "report") {
            return report_.render(request.vars);
        }
        if (request.stage == "construct") {
            return construct_.render(request.vars);
        }
    } catch (const ConfigError& e) {
        throw PipelineError(request.stage, e.what());
    }
    throw PipelineError(request.stage, "stub provider has no template for this stage");
}

ReplayProvider::ReplayProvider(std::filesystem::path cache_dir) : dir_(std::move(cache_dir)) {
    if (!std::filesystem::is_directory(dir_)) {
        throw ConfigError("replay cache directory does not exist: " + dir_.string());
    }
}

std::string ReplayProvider::generate(const GenerationRequest& request) const {
    auto digest = sha256_hex(request.prompt);
    auto path = dir_ / (digest + ".txt");
    if (!std::filesystem::exists(path)) {
        throw PipelineError(request.stage, "replay cache miss for prompt digest " + digest);
    }
    try {
        return read_file(path);
    } catch (const IoError& e) {
        throw PipelineError(request.stage, e.what());
    }
}

HttpProvider::HttpProvider(std::string endpoint, std::chrono::seconds timeout, std::size_t max_concurrency)
    : timeout_(timeout), max_concurrency_(max_concurrency) {
    const std::string scheme = "http://";
    if (endpoint.rfind(scheme, 0) != 0) {
        throw ConfigError("provider endpoint must start with http://: " + endpoint);
    }
    auto slash = endpoint.find('/', scheme.size());
    host_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

std::string HttpProvider::generate(const GenerationRequest& request) const {
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    nlohmann::json body = {{"prompt", request.prompt}, {"stage", request.stage}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw PipelineError(request.stage, "provider request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw PipelineError(request.stage, "provider returned HTTP " + std::to_string(res->status));
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
        throw PipelineError(request.stage, "provider response lacks a string 'text' field");
    }
    return j.at("text").get<std::string>();
}

RecordingProvider::RecordingProvider(const GenerationProvider& inner, std::filesystem::path cache_dir)
    : inner_(inner), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
}

std::string RecordingProvider::generate(const GenerationRequest& request) const {
    auto text = inner_.generate(request);
    write_file_atomic(dir_ / (sha256_hex(request.prompt) + ".txt"), text);
    return text;
}

std::vector<PerturbationInput> parse_inputs(std::string_view text, const std::string& source) {
    std::vector<PerturbationInput> out;
    std::set<std::string> ids;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto where = source + ":" + std::to_string(line_no);
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw FormatError(where + ": invalid JSON");
        }
        PerturbationInput in;
        for (auto [key, field] : {std::pair{"perturbation", &in.perturbation}, std::pair{"context", &in.context}}) {
            if (!j.contains(key) || !j.at(key).is_string() || trim(j.at(key).get<std::string>()).empty()) {
                throw FormatError(where + ": field '" + key + "' must be a nonempty string");
            }
            *field = j.at(key).get<std::string>();
        }
        if (j.contains("id")) {
            if (!j.at("id").is_string() || j.at("id").get<std::string>().empty()) {
                throw FormatError(where + ": field 'id' must be a nonempty string");
            }
            in.id = j.at("id").get<std::string>();
        } else {
            in.id = "input-" + std::to_string(out.size() + 1);
        }
        if (!ids.insert(in.id).second) {
            throw FormatError(where + ": duplicate input id " + in.id);
        }
        out.push_back(std::move(in));
    });
    return out;
}

nlohmann::json Report::to_json() const {
    return {{"id", input.id},
            {"perturbation", input.perturbation},
            {"context", input.context},
            {"entities", entities},
            {"sections", sections},
            {"body", body},
            {"prompt_digest", prompt_digest}};
}

std::pair<std::vector<std::string>, std::map<std::string, std::string>> retrieve(const PerturbationInput& input,
                                                                                 const PipelineResources& res) {
    std::vector<std::string> names;
    std::vector<const LexEntry*> entries;
    if (res.lexicon) {
        std::set<std::string> seen;
        for (const auto& m : res.lexicon->extract_entities(input.perturbation + " " + input.context)) {
            if (!m.entity.entity_id || !seen.insert(*m.entity.entity_id).second) {
                continue;
            }
            const auto* e = res.lexicon->entry(*m.entity.entity_id);
            entries.push_back(e);
            names.push_back(e->canonical);
        }
    }
    std::map<std::string, std::string> sections;
    if (res.kg && !res.kg->nodes().empty()) {
        std::string text;
        std::set<std::string> seen_nodes;
        for (const auto& name : names) {
            auto hit = res.kg->lookup_node(name, *res.similarity);
            if (hit.method == NodeMatch::Similarity && hit.similarity < res.retrieval.kg_min_similarity) {
                continue;
            }
            if (seen_nodes.insert(hit.node->node_id).second) {
                text += res.kg->neighborhood_context(*hit.node, res.retrieval.max_neighbors);
            }
        }
        if (!text.empty()) {
            sections["kg"] = text;
        }
    }
    if (res.docs) {
        std::vector<std::string> genes;
        for (const auto* e : entries) {
            if (e->entity_type == EntityType::Gene || e->entity_type == EntityType::Protein) {
                auto ctx = res.docs->gene_context(e->canonical);
                if (!ctx.empty()) {
                    genes.push_back(std::move(ctx));
                }
            }
        }
        if (!genes.empty()) {
            sections["gene_db"] = join(genes, "\n\n");
        }
        const auto query = join(names, " ");
        for (auto source : {DocSource::Literature, DocSource::Encyclopedia}) {
            std::vector<std::string> blocks;
            for (const auto* d : res.docs->search_documents(names, source, res.retrieval.k_docs, *res.similarity)) {
                if (res.similarity->score(query, d->title + " " + d->body) <= 0.0) {
                    continue;
                }
                blocks.push_back("[" + d->doc_id + "] " + d->title + "\n" + d->body);
            }
            if (!blocks.empty()) {
                sections[std::string(to_string(source))] = join(blocks, "\n\n");
            }
        }
    }
    return {names, sections};
}

namespace {

std::string section_text(const std::map<std::string, std::string>& sections, std::string_view key) {
    auto it = sections.find(std::string(key));
    return it == sections.end() ? std::string() : it->second;
}

std::string retrieval_block(const std::map<std::string, std::string>& sections) {
    std::string out;
    for (auto key : kReportSections) {
        out += "## " + std::string(key) + "\n";
        auto text = section_text(sections, key);
        out += text.empty() ? "(none)\n" : text;
        if (!out.empty() && out.back() != '\n') {
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

// Input text safe inside an explain block and a quoted value.
std::string plain(std::string_view s) {
    std::string out;
    for (char c : s) {
        out += c == '<' ? '(' : c == '>' ? ')' : (c == '\n' || c == '\r' || c == '\t') ? ' ' : c;
    }
    return out;
}

std::string short_digest(std::string_view text) { return text.empty() ? "none" : sha256_hex(text).substr(0, 12); }

std::map<std::string, std::string> stub_vars(const PerturbationInput& input) {
    return {{"perturbation_text", plain(input.perturbation)},
            {"context_text", plain(input.context)},
            {"perturbation_q", quote_value(plain(input.perturbation))},
            {"context_q", quote_value(plain(input.context))}};
}

void require(const PipelineResources& res) {
    if (!res.provider || !res.templates || !res.similarity || !res.registry) {
        throw ConfigError("pipeline: provider, templates, similarity and schema must be configured");
    }
}

}  // namespace

Report generate_report(const PerturbationInput& input, const PipelineResources& res) {
    require(res);
    Report r;
    r.input = input;
    std::tie(r.entities, r.sections) = retrieve(input, res);
    std::map<std::string, std::string> vars = {{"perturbation", input.perturbation},
                                               {"context", input.context},
                                               {"entities", join(r.entities, ", ")}};
    for (auto key : kReportSections) {
        vars[std::string(key)] = section_text(r.sections, key);
    }
    GenerationRequest req{"report", res.templates->report.render(vars), stub_vars(input)};
    req.vars["entities"] = plain(join(r.entities, ", "));
    for (auto key : kReportSections) {
        req.vars[std::string(key) + "_digest"] = short_digest(section_text(r.sections, key));
    }
    r.prompt_digest = sha256_hex(req.prompt);
    r.body = res.provider->generate(req);
    return r;
}

std::string construct_explanation(const Report& report, const PipelineResources& res, bool include_sections) {
    require(res);
    std::map<std::string, std::string> vars = {{"perturbation", report.input.perturbation},
                                               {"context", report.input.context},
                                               {"report", report.body},
                                               {"action_space", res.registry->describe()},
                                               {"sections", include_sections ? retrieval_block(report.sections) : ""}};
    GenerationRequest req{"construct", res.templates->construct.render(vars), stub_vars(report.input)};
    req.vars["source_digest"] = short_digest(report.body);
    return res.provider->generate(req);
}

std::string construct_one_step(const PerturbationInput& input, const PipelineResources& res) {
    require(res);
    auto [entities, sections] = retrieve(input, res);
    auto block = retrieval_block(sections);
    std::map<std::string, std::string> vars = {{"perturbation", input.perturbation},
                                               {"context", input.context},
                                               {"retrieval", block},
                                               {"action_space", res.registry->describe()}};
    GenerationRequest req{"construct", res.templates->one_step.render(vars), stub_vars(input)};
    req.vars["source_digest"] = short_digest(block);
    return res.provider->generate(req);
}

namespace {

void run_one(InputOutcome& o, const PipelineResources& res, const VerifierContext& verifiers,
             const PipelineOptions& options) {
    std::string stage = options.one_step ? "construct" : "report";
    try {
        if (options.one_step) {
            o.raw_text = construct_one_step(o.input, res);
        } else {
            o.report = generate_report(o.input, res);
            stage = "construct";
            o.raw_text = construct_explanation(*o.report, res, options.include_sections);
        }
        stage = "parse";
        o.parsed = parse_trace(*o.raw_text, o.input.id, o.input.perturbation, o.input.context, *res.registry);
        if (!o.parsed->ok()) {
            return;
        }
        stage = "validate";
        o.structure = validate_graph(*o.parsed->trace, *res.registry);
        if (!o.structure->valid) {
            return;
        }
        stage = "verify";
        o.verdicts = verify_trace(*o.parsed->trace, verifiers);
        stage = "filter";
        auto [outcome, kept] = filter_trace(*o.parsed->trace, *o.verdicts, options.filter, *res.registry);
        o.filter = std::move(outcome);
        o.kept = std::move(kept);
    } catch (const InvariantError&) {
        throw;
    } catch (const PipelineError& e) {
        o.failed_stage = e.stage();
        o.error = e.what();
    } catch (const Error& e) {
        o.failed_stage = stage;
        o.error = e.what();
    }
}

}  // namespace

PipelineResult run_pipeline(const std::vector<PerturbationInput>& inputs, const PipelineResources& res,
                            const VerifierContext& verifiers, const PipelineOptions& options) {
    require(res);
    PipelineResult out;
    out.outcomes.resize(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out.outcomes[i].input = inputs[i];
    }
    auto jobs = std::max<std::size_t>(1, options.jobs);
    if (auto cap = res.provider->max_concurrency(); cap > 0) {
        jobs = std::min(jobs, cap);
    }
    parallel_for(inputs.size(), jobs, [&](std::size_t i) { run_one(out.outcomes[i], res, verifiers, options); });

    std::size_t n_reported = 0, n_constructed = 0, n_parsed = 0, n_valid = 0, n_verified = 0, n_kept = 0;
    std::size_t n_refined = 0;
    std::map<std::string, std::size_t> failures;
    std::vector<ReasoningTrace> valid_traces;
    std::map<std::string, VerdictMap> verdicts;
    std::vector<Verdict> all_verdicts;
    for (const auto& o : out.outcomes) {
        n_reported += (options.one_step ? o.raw_text.has_value() : o.report.has_value()) ? 1 : 0;
        n_constructed += o.raw_text ? 1 : 0;
        n_parsed += o.parsed && o.parsed->ok() ? 1 : 0;
        n_valid += o.structure && o.structure->valid ? 1 : 0;
        n_verified += o.verdicts ? 1 : 0;
        n_kept += o.kept ? 1 : 0;
        n_refined += o.filter && o.filter->decision == FilterDecision::Refined ? 1 : 0;
        if (!o.failed_stage.empty()) {
            ++failures[o.failed_stage];
        }
        if (o.verdicts) {
            valid_traces.push_back(*o.parsed->trace);
            verdicts[o.input.id] = *o.verdicts;
            for (const auto& [node, vs] : *o.verdicts) {
                all_verdicts.insert(all_verdicts.end(), vs.begin(), vs.end());
            }
        }
    }
    MetricsReport m;
    m.validity = {n_valid, n_constructed};
    if (res.lexicon) {
        m.verifiability = verifiability(valid_traces, *res.lexicon, *res.registry);
    }
    m.dti = dti_score(all_verdicts);
    m.de = de_score(valid_traces, verdicts);
    m.n_traces = valid_traces.size();

    nlohmann::json stages = nlohmann::json::array();
    auto stage = [&](const char* name, std::size_t n) { stages.push_back({{"stage", name}, {"count", n}}); };
    stage("input", inputs.size());
    stage("report", n_reported);
    stage("construct", n_constructed);
    stage("parse", n_parsed);
    stage("validate", n_valid);
    stage("verify", n_verified);
    stage("filter", n_kept);
    std::map<std::string, std::size_t> reasons;
    for (const auto& o : out.outcomes) {
        if (o.filter) {
            ++reasons[o.filter->reason];
        }
    }
    out.summary = {{"mode", options.one_step ? "one_step" : "two_stage"},
                   {"provider", std::string(res.provider->mode())},
                   {"tau", options.filter.tau},
                   {"stages", stages},
                   {"n_refined", n_refined},
                   {"failures", failures},
                   {"filter_reasons", reasons},
                   {"metrics", m.to_json()}};
    return out;
}

std::vector<nlohmann::json> PipelineResult::kept_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& o : outcomes) {
        if (o.kept) {
            out.push_back(to_json(*o.kept));
        }
    }
    return out;
}

std::vector<nlohmann::json> PipelineResult::reject_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& o : outcomes) {
        if (!o.failed_stage.empty()) {
            out.push_back({{"trace_id", o.input.id},
                           {"stage", o.failed_stage},
                           {"decision", "error"},
                           {"reason", "stage_error"},
                           {"details", {{"message", o.error}}}});
        } else if (o.parsed && !o.parsed->ok()) {
            auto errors = nlohmann::json::array();
            for (const auto& e : o.parsed->syntax_errors) {
                errors.push_back({{"line", e.line}, {"message", e.message}});
            }
            out.push_back({{"trace_id", o.input.id},
                           {"stage", "parse"},
                           {"decision", "invalid"},
                           {"reason", "syntax_error"},
                           {"details", {{"syntax_errors", errors}}}});
        } else if (o.structure && !o.structure->valid) {
            out.push_back({{"trace_id", o.input.id},
                           {"stage", "validate"},
                           {"decision", "invalid"},
                           {"reason", "structural_error"},
                           {"details", o.structure->to_json()}});
        } else if (o.filter && o.filter->decision == FilterDecision::Discarded) {
            out.push_back({{"trace_id", o.input.id},
                           {"stage", "filter"},
                           {"decision", std::string(to_string(o.filter->decision))},
                           {"reason", o.filter->reason},
                           {"details", o.filter->details()}});
        }
    }
    return out;
}

std::vector<nlohmann::json> PipelineResult::report_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& o : outcomes) {
        if (o.report) {
            out.push_back(o.report->to_json());
        }
    }
    return out;
}

std::vector<nlohmann::json> PipelineResult::raw_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& o : outcomes) {
        if (o.raw_text) {
            out.push_back({{"trace_id", o.input.id},
                           {"perturbation", o.input.perturbation},
                           {"context", o.input.context},
                           {"raw_text", *o.raw_text}});
        }
    }
    return out;
}

std::vector<nlohmann::json> PipelineResult::verdict_records() const {
    std::vector<nlohmann::json> out;
    for (const auto& o : outcomes) {
        if (!o.verdicts) {
            continue;
        }
        for (const auto& node : o.parsed->trace->nodes) {
            auto it = o.verdicts->find(node.id);
            if (it == o.verdicts->end()) {
                continue;
            }
            for (const auto& v : it->second) {
                out.push_back(to_json(v, o.input.id));
            }
        }
    }
    return out;
}

}  // namespace vctrace
