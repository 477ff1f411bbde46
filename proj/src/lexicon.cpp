#include "vctrace/lexicon.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace vctrace {

namespace {

constexpr std::array<std::pair<EntityType, std::string_view>, 8> kTypeNames = {{
    {EntityType::Compound, "compound"},
    {EntityType::Gene, "gene"},
    {EntityType::Protein, "protein"},
    {EntityType::CellLine, "cell_line"},
    {EntityType::Disease, "disease"},
    {EntityType::Pathway, "pathway"},
    {EntityType::Phenotype, "phenotype"},
    {EntityType::Compartment, "compartment"},
}};

}  // namespace

std::string_view to_string(EntityType t) {
    for (const auto& [type, name] : kTypeNames) {
        if (type == t) {
            return name;
        }
    }
    return "?";
}

std::optional<EntityType> parse_entity_type(std::string_view s) {
    for (const auto& [type, name] : kTypeNames) {
        if (name == s) {
            return type;
        }
    }
    return std::nullopt;
}

std::string_view to_string(MatchKind k) {
    switch (k) {
    case MatchKind::Exact:
        return "exact";
    case MatchKind::Synonym:
        return "synonym";
    case MatchKind::None:
        return "none";
    }
    return "none";
}

Lexicon::Lexicon(std::vector<LexEntry> entries) : entries_(std::move(entries)) {
    std::set<std::size_t> lengths;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.entity_id.empty()) {
            throw FormatError("lexicon: empty entity_id");
        }
        if (trim(e.canonical).empty()) {
            throw FormatError("lexicon: empty canonical name for " + e.entity_id);
        }
        if (!by_id_.emplace(e.entity_id, i).second) {
            throw FormatError("lexicon: duplicate entity_id " + e.entity_id);
        }
        auto add = [&](std::string_view surface, bool canonical) {
            auto key = fold(trim(surface));
            if (key.empty()) {
                return;
            }
            auto& bucket = surfaces_[key];
            for (const auto& s : bucket) {
                if (s.entry == i && s.canonical == canonical) {
                    return;
                }
            }
            bucket.push_back({i, canonical});
            lengths.insert(key.size());
        };
        add(e.canonical, true);
        for (const auto& syn : e.synonyms) {
            add(syn, false);
        }
    }
    surface_lengths_.assign(lengths.rbegin(), lengths.rend());
}

Lexicon Lexicon::from_tsv(std::string_view text, const std::string& source) {
    auto table = parse_tsv(text, source, {"entity_id", "entity_type", "canonical", "synonyms"});
    const auto c_id = table.column("entity_id");
    const auto c_type = table.column("entity_type");
    const auto c_can = table.column("canonical");
    const auto c_syn = table.column("synonyms");
    std::vector<LexEntry> entries;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto type = parse_entity_type(row[c_type]);
        if (!type) {
            throw FormatError(source + ":" + std::to_string(table.line_numbers[r]) + ": unknown entity type '" +
                              row[c_type] + "'");
        }
        LexEntry e;
        e.entity_id = row[c_id];
        e.entity_type = *type;
        e.canonical = row[c_can];
        if (!trim(row[c_syn]).empty()) {
            for (auto& s : split(row[c_syn], '|')) {
                if (!trim(s).empty()) {
                    e.synonyms.emplace_back(trim(s));
                }
            }
        }
        entries.push_back(std::move(e));
    }
    return Lexicon(std::move(entries));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

const LexEntry* Lexicon::entry(std::string_view entity_id) const {
    auto it = by_id_.find(entity_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

ResolvedEntity Lexicon::resolve(std::string_view mention, std::optional<EntityType> type_hint) const {
    ResolvedEntity out;
    out.matched_surface = std::string(mention);
    auto it = surfaces_.find(fold(trim(mention)));
    if (it == surfaces_.end()) {
        return out;
    }
    // Canonical matches take precedence over synonym matches.
    for (bool want_canonical : {true, false}) {
        std::vector<const LexEntry*> hits;
        for (const auto& s : it->second) {
            const auto& e = entries_[s.entry];
            if (s.canonical != want_canonical || (type_hint && e.entity_type != *type_hint)) {
                continue;
            }
            hits.push_back(&e);
        }
        if (hits.empty()) {
            continue;
        }
        auto best = *std::min_element(hits.begin(), hits.end(), [](const LexEntry* a, const LexEntry* b) {
            return a->entity_id < b->entity_id;
        });
        std::set<std::string> distinct;
        for (const auto* h : hits) {
            distinct.insert(h->entity_id);
        }
        out.entity_id = best->entity_id;
        out.entity_type = best->entity_type;
        out.match_kind = want_canonical ? MatchKind::Exact : MatchKind::Synonym;
        out.ambiguous = distinct.size() > 1;
        return out;
    }
    return out;
}

std::vector<EntityMention> Lexicon::extract_entities(std::string_view text) const {
    std::vector<EntityMention> out;
    const auto folded = fold(text);
    std::size_t i = 0;
    while (i < text.size()) {
        const bool starts_word = is_word_char(text[i]) && (i == 0 || !is_word_char(text[i - 1]));
        if (!starts_word) {
            ++i;
            continue;
        }
        bool matched = false;
        for (auto len : surface_lengths_) {
            if (i + len > text.size()) {
                continue;
            }
            auto end = i + len;
            if (end < text.size() && is_word_char(text[end]) && is_word_char(text[end - 1])) {
                continue;
            }
            std::string_view candidate(folded.data() + i, len);
            if (surfaces_.find(candidate) == surfaces_.end()) {
                continue;
            }
            EntityMention m;
            m.mention = std::string(text.substr(i, len));
            m.entity = resolve(m.mention);
            m.begin = i;
            m.end = end;
            out.push_back(std::move(m));
            i = end;
            matched = true;
            break;
        }
        if (!matched) {
            ++i;
        }
    }
    return out;
}

}  // namespace vctrace
