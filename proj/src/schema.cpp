#include "vctrace/schema.hpp"

#include "vctrace/error.hpp"
#include "vctrace/io.hpp"
#include "vctrace/text.hpp"

#include <algorithm>

namespace vctrace {

namespace {

constexpr std::array<std::pair<Category, std::string_view>, 7> kCategoryNames = {{
    {Category::SystemInitialization, "system_initialization"},
    {Category::Metabolic, "metabolic"},
    {Category::Regulation, "regulation"},
    {Category::Functional, "functional"},
    {Category::Interaction, "interaction"},
    {Category::Phenotype, "phenotype"},
    {Category::Proteostasis, "proteostasis"},
}};

constexpr std::array<std::pair<ArgKind, std::string_view>, 5> kKindNames = {{
    {ArgKind::Entity, "entity"},
    {ArgKind::Text, "text"},
    {ArgKind::Number, "number"},
    {ArgKind::Enum, "enum"},
    {ArgKind::EntityList, "entity_list"},
}};

const char* const kBuiltinSchema =
#include "builtin_schema.inc"
    ;

}  // namespace

std::string_view to_string(Category c) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (cat == c) {
            return name;
        }
    }
    return "?";
}

std::optional<Category> parse_category(std::string_view s) {
    for (const auto& [cat, name] : kCategoryNames) {
        if (name == s) {
            return cat;
        }
    }
    return std::nullopt;
}

std::string_view to_string(ArgKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) {
            return name;
        }
    }
    return "?";
}

std::optional<ArgKind> parse_arg_kind(std::string_view s) {
    for (const auto& [kind, name] : kKindNames) {
        if (name == s) {
            return kind;
        }
    }
    return std::nullopt;
}

bool ArgSpec::allows(std::string_view enum_token) const {
    auto folded = fold(enum_token);
    return std::find(enum_values.begin(), enum_values.end(), folded) != enum_values.end();
}

const ArgSpec* ArgumentSchema::find(std::string_view arg) const {
    for (const auto& a : args) {
        if (a.name == arg) {
            return &a;
        }
    }
    return nullptr;
}

std::set<std::string> ArgumentSchema::required() const {
    std::set<std::string> out;
    for (const auto& a : args) {
        if (a.required) {
            out.insert(a.name);
        }
    }
    return out;
}

std::set<std::string> ArgumentSchema::optional() const {
    std::set<std::string> out;
    for (const auto& a : args) {
        if (!a.required) {
            out.insert(a.name);
        }
    }
    return out;
}

SchemaRegistry SchemaRegistry::from_tsv(std::string_view text, const std::string& source) {
    auto table = parse_tsv(text, source, {"primitive", "category", "arg_name", "required", "kind", "enum_values"});
    const auto c_prim = table.column("primitive");
    const auto c_cat = table.column("category");
    const auto c_arg = table.column("arg_name");
    const auto c_req = table.column("required");
    const auto c_kind = table.column("kind");
    const auto c_enum = table.column("enum_values");

    std::map<std::string, ArgumentSchema, std::less<>> by_name;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto where = source + ":" + std::to_string(table.line_numbers[r]) + ": ";
        const auto& prim = row[c_prim];
        if (std::find(kPrimitiveNames.begin(), kPrimitiveNames.end(), prim) == kPrimitiveNames.end()) {
            throw FormatError(where + "primitive '" + prim + "' is not in the action catalog");
        }
        auto cat = parse_category(row[c_cat]);
        if (!cat) {
            throw FormatError(where + "unknown category '" + row[c_cat] + "'");
        }
        auto& schema = by_name[prim];
        if (schema.primitive.empty()) {
            schema.primitive = prim;
            schema.category = *cat;
        } else if (schema.category != *cat) {
            throw FormatError(where + "primitive '" + prim + "' listed under two categories");
        }

        ArgSpec spec;
        spec.name = row[c_arg];
        if (!is_identifier(spec.name) || spec.name == "id") {
            throw FormatError(where + "invalid argument name '" + spec.name + "'");
        }
        if (schema.find(spec.name)) {
            throw FormatError(where + "duplicate argument '" + spec.name + "' for " + prim);
        }
        if (row[c_req] != "0" && row[c_req] != "1") {
            throw FormatError(where + "required must be 0 or 1");
        }
        spec.required = row[c_req] == "1";
        auto kind = parse_arg_kind(row[c_kind]);
        if (!kind) {
            throw FormatError(where + "unknown kind '" + row[c_kind] + "'");
        }
        spec.kind = *kind;
        auto enum_field = trim(row[c_enum]);
        if (spec.kind == ArgKind::Enum) {
            if (enum_field.empty()) {
                throw FormatError(where + "enum argument '" + spec.name + "' has no values");
            }
            for (auto& v : split(enum_field, '|')) {
                spec.enum_values.push_back(fold(trim(v)));
            }
        } else if (!enum_field.empty()) {
            throw FormatError(where + "enum_values given for non-enum argument '" + spec.name + "'");
        }
        schema.args.push_back(std::move(spec));
    }

    SchemaRegistry reg;
    for (auto name : kPrimitiveNames) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw FormatError(source + ": no schema rows for primitive '" + std::string(name) + "'");
        }
        auto schema = std::move(it->second);
        std::stable_sort(schema.args.begin(), schema.args.end(), [](const ArgSpec& a, const ArgSpec& b) {
            if (a.required != b.required) {
                return a.required;
            }
            return a.name < b.name;
        });
        reg.index_.emplace(schema.primitive, reg.schemas_.size());
        reg.schemas_.push_back(std::move(schema));
    }
    return reg;
}

SchemaRegistry SchemaRegistry::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

const SchemaRegistry& SchemaRegistry::builtin() {
    static const SchemaRegistry reg = from_tsv(kBuiltinSchema, "<builtin action_schema.tsv>");
    return reg;
}

const ArgumentSchema* SchemaRegistry::find(std::string_view primitive) const {
    auto it = index_.find(primitive);
    return it == index_.end() ? nullptr : &schemas_[it->second];
}

const ArgumentSchema& SchemaRegistry::schema_for(std::string_view primitive) const {
    if (auto* s = find(primitive)) {
        return *s;
    }
    throw CatalogMissError("unknown action primitive '" + std::string(primitive) + "'");
}

std::string SchemaRegistry::describe() const {
    std::string out;
    std::optional<Category> current;
    for (const auto& s : schemas_) {
        if (!current || *current != s.category) {
            current = s.category;
            out += "[";
            out += to_string(s.category);
            out += "]\n";
        }
        out += "- " + s.primitive + "(id";
        for (const auto& a : s.args) {
            if (!a.required) {
                continue;
            }
            out += ", " + a.name;
        }
        std::vector<std::string> opt;
        for (const auto& a : s.args) {
            if (!a.required) {
                opt.push_back(a.name);
            }
        }
        if (!opt.empty()) {
            out += ", {" + join(opt, ", ") + "}";
        }
        out += ")";
        std::vector<std::string> notes;
        for (const auto& a : s.args) {
            if (a.kind == ArgKind::Enum) {
                notes.push_back(a.name + " in {" + join(a.enum_values, ", ") + "}");
            } else if (a.kind == ArgKind::EntityList) {
                notes.push_back(a.name + " is a list");
            } else if (a.kind == ArgKind::Number) {
                notes.push_back(a.name + " is a number");
            }
        }
        if (!notes.empty()) {
            out += "; " + join(notes, "; ");
        }
        out += "\n";
    }
    return out;
}

}  // namespace vctrace
