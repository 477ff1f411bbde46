#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

enum class EntityType { Compound, Gene, Protein, CellLine, Disease, Pathway, Phenotype, Compartment };

std::string_view to_string(EntityType t);
std::optional<EntityType> parse_entity_type(std::string_view s);

struct LexEntry {
    std::string entity_id;
    EntityType entity_type = EntityType::Gene;
    std::string canonical;
    std::vector<std::string> synonyms;
};

enum class MatchKind { Exact, Synonym, None };

std::string_view to_string(MatchKind k);

struct ResolvedEntity {
    std::optional<std::string> entity_id;  // absent iff match_kind == None
    std::optional<EntityType> entity_type;
    std::string matched_surface;
    MatchKind match_kind = MatchKind::None;
    bool ambiguous = false;  // two or more entities tied; smallest id chosen

    bool resolved() const { return match_kind != MatchKind::None; }
};

struct EntityMention {
    std::string mention;
    ResolvedEntity entity;
    std::size_t begin = 0;  // half-open byte span into the scanned text
    std::size_t end = 0;
};

/// Dictionary of biomedical entities with a case-folded surface index over
/// canonical names and synonyms. Immutable after construction.
class Lexicon {
public:
    Lexicon() = default;
    /// Throws FormatError on duplicate ids, empty canonical names or unknown types.
    explicit Lexicon(std::vector<LexEntry> entries);

    /// TSV columns: entity_id, entity_type, canonical, synonyms (pipe-separated).
    static Lexicon load(const std::filesystem::path& path);
    static Lexicon from_tsv(std::string_view text, const std::string& source);

    /// Case-insensitive match on canonical names first, then synonyms.
    ResolvedEntity resolve(std::string_view mention, std::optional<EntityType> type_hint = std::nullopt) const;

    /// Greedy longest match over word boundaries. Returned spans never overlap.
    std::vector<EntityMention> extract_entities(std::string_view text) const;

    const LexEntry* entry(std::string_view entity_id) const;
    const std::vector<LexEntry>& entries() const { return entries_; }

private:
    struct Surface {
        std::size_t entry;
        bool canonical;
    };

    std::vector<LexEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::map<std::string, std::vector<Surface>, std::less<>> surfaces_;  // folded surface -> entries
    std::vector<std::size_t> surface_lengths_;                           // distinct, descending
};

}  // namespace vctrace
