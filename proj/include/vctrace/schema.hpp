#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

enum class Category {
    SystemInitialization,
    Metabolic,
    Regulation,
    Functional,
    Interaction,
    Phenotype,
    Proteostasis,
};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

enum class ArgKind { Entity, Text, Number, Enum, EntityList };

std::string_view to_string(ArgKind k);
std::optional<ArgKind> parse_arg_kind(std::string_view s);

/// The fixed action catalog, in catalog order.
inline constexpr std::array<std::string_view, 20> kPrimitiveNames = {
    "set_context",
    "converts_substrate",
    "modulates_molecule_activity",
    "modulates_pathway_activity",
    "modulates_complex",
    "post_translational_modification",
    "regulates_expression",
    "regulates_translation",
    "chromatin_modification",
    "gain_of_function",
    "loss_of_function",
    "similar_to",
    "correlates_with",
    "participates_in",
    "binds_to",
    "cell_cell_interaction",
    "induces_phenotype",
    "alleviates_phenotype",
    "localizes_to",
    "degrades_or_stabilizes",
};

struct ArgSpec {
    std::string name;
    bool required = false;
    ArgKind kind = ArgKind::Text;
    std::vector<std::string> enum_values;  // lowercase; only for ArgKind::Enum

    bool allows(std::string_view enum_token) const;
};

/// Argument schema of one primitive. `args` is in canonical order: required
/// arguments alphabetically, then optional ones alphabetically.
struct ArgumentSchema {
    std::string primitive;
    Category category = Category::SystemInitialization;
    std::vector<ArgSpec> args;

    const ArgSpec* find(std::string_view arg) const;
    std::set<std::string> required() const;
    std::set<std::string> optional() const;
};

class SchemaRegistry {
public:
    /// Registry built from the schema file compiled into the library.
    static const SchemaRegistry& builtin();

    /// Parses the schema TSV (primitive, category, arg_name, required, kind,
    /// enum_values). Throws FormatError on malformed rows or an incomplete catalog.
    static SchemaRegistry from_tsv(std::string_view text, const std::string& source);
    static SchemaRegistry load(const std::filesystem::path& path);

    /// Throws CatalogMissError for names outside the catalog.
    const ArgumentSchema& schema_for(std::string_view primitive) const;
    const ArgumentSchema* find(std::string_view primitive) const;

    const std::vector<ArgumentSchema>& schemas() const { return schemas_; }

    /// Plain-text action-space description handed to the explanation constructor.
    std::string describe() const;

private:
    std::vector<ArgumentSchema> schemas_;  // catalog order
    std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace vctrace
