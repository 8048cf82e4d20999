#pragma once

// Flat key/value text with optional [sections]:
//
//   # comment
//   top_level_key = value
//   [bob]
//   mass = 390
//   [track]
//   s, kappa, inv_r_y, n        <- lines without '=' are kept verbatim as rows
//   0, 0, 0, 1
//
// Keys are addressed as "section.key"; top-level keys have no prefix.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bobsled::kv {

struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
    std::vector<std::string> rows;
};

class Document {
public:
    Document();

    static Document parse(std::string_view text, const std::string& origin = "<text>");
    static Document load(const std::filesystem::path& path);

    [[nodiscard]] bool has(std::string_view key) const;
    [[nodiscard]] std::optional<std::string> get(std::string_view key) const;
    [[nodiscard]] std::string require(std::string_view key) const;
    [[nodiscard]] double number(std::string_view key) const;
    [[nodiscard]] double number_or(std::string_view key, double fallback) const;
    [[nodiscard]] std::optional<double> maybe_number(std::string_view key) const;

    // Raw (non key/value) lines of a section; empty if the section is absent.
    [[nodiscard]] const std::vector<std::string>& rows(std::string_view section) const;
    [[nodiscard]] bool has_section(std::string_view section) const;

    void set(std::string_view key, std::string value);
    void set_number(std::string_view key, double value);
    void add_row(std::string_view section, std::string row);

    [[nodiscard]] std::string to_string() const;
    void save(const std::filesystem::path& path) const;

    [[nodiscard]] const std::string& origin() const { return origin_; }
    [[nodiscard]] const std::vector<Section>& sections() const { return sections_; }

private:
    Section* find_section(std::string_view name);
    const Section* find_section(std::string_view name) const;
    Section& section(std::string_view name);

    std::vector<Section> sections_;
    std::string origin_;
};

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

// Strict parse of a full token; throws DataError naming `context` on failure.
double parse_double(std::string_view token, std::string_view context);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace bobsled::kv
