#include "bobsled/kvtext.hpp"

#include "bobsled/common.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bobsled::kv {

namespace {

std::pair<std::string_view, std::string_view> split_key(std::string_view key) {
    auto dot = key.rfind('.');
    if (dot == std::string_view::npos) {
        return {std::string_view{}, key};
    }
    return {key.substr(0, dot), key.substr(dot + 1)};
}

}  // namespace

std::string trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, std::string_view context) {
    auto t = trim(token);
    if (!t.empty() && t.front() == '+') {
        t.erase(0, 1);
    }
    double value = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw DataError(std::string(context) + ": cannot parse number '" + std::string(token) + "'");
    }
    return value;
}

Document::Document() { sections_.push_back(Section{}); }

Document Document::parse(std::string_view text, const std::string& origin) {
    Document doc;
    doc.origin_ = origin;
    Section* current = &doc.sections_.front();
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
            }
            current = &doc.section(trim(std::string_view(line).substr(1, line.size() - 2)));
        } else if (auto eq = line.find('='); eq != std::string::npos) {
            auto key = trim(std::string_view(line).substr(0, eq));
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            }
            current->entries.emplace_back(key, trim(std::string_view(line).substr(eq + 1)));
        } else {
            current->rows.push_back(line);
        }
        if (end == text.size()) break;
    }
    return doc;
}

Document Document::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

Section* Document::find_section(std::string_view name) {
    auto it = std::find_if(sections_.begin(), sections_.end(),
                           [&](const Section& s) { return s.name == name; });
    return it == sections_.end() ? nullptr : &*it;
}

const Section* Document::find_section(std::string_view name) const {
    auto it = std::find_if(sections_.begin(), sections_.end(),
                           [&](const Section& s) { return s.name == name; });
    return it == sections_.end() ? nullptr : &*it;
}

Section& Document::section(std::string_view name) {
    if (auto* s = find_section(name)) {
        return *s;
    }
    sections_.push_back(Section{std::string(name), {}, {}});
    return sections_.back();
}

bool Document::has_section(std::string_view name) const { return find_section(name) != nullptr; }

std::optional<std::string> Document::get(std::string_view key) const {
    auto [sec, name] = split_key(key);
    const Section* s = find_section(sec);
    if (s == nullptr) {
        return std::nullopt;
    }
    // last assignment wins
    for (auto it = s->entries.rbegin(); it != s->entries.rend(); ++it) {
        if (it->first == name) {
            return it->second;
        }
    }
    return std::nullopt;
}

bool Document::has(std::string_view key) const { return get(key).has_value(); }

std::string Document::require(std::string_view key) const {
    auto v = get(key);
    if (!v) {
        throw ConfigError(origin_ + ": missing key '" + std::string(key) + "'");
    }
    return *v;
}

double Document::number(std::string_view key) const {
    auto text = require(key);
    try {
        return parse_double(text, std::string(key));
    } catch (const DataError& e) {
        throw ConfigError(origin_ + ": " + e.what());
    }
}

double Document::number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

std::optional<double> Document::maybe_number(std::string_view key) const {
    if (!has(key)) {
        return std::nullopt;
    }
    return number(key);
}

const std::vector<std::string>& Document::rows(std::string_view name) const {
    static const std::vector<std::string> empty;
    const Section* s = find_section(name);
    return s == nullptr ? empty : s->rows;
}

void Document::set(std::string_view key, std::string value) {
    auto [sec, name] = split_key(key);
    Section& s = section(sec);
    for (auto& e : s.entries) {
        if (e.first == name) {
            e.second = std::move(value);
            return;
        }
    }
    s.entries.emplace_back(std::string(name), std::move(value));
}

void Document::set_number(std::string_view key, double value) { set(key, format_double(value)); }

void Document::add_row(std::string_view name, std::string row) { section(name).rows.push_back(std::move(row)); }

std::string Document::to_string() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& s : sections_) {
        if (s.name.empty() && s.entries.empty() && s.rows.empty()) {
            continue;
        }
        if (!s.name.empty()) {
            if (!first) out << '\n';
            out << '[' << s.name << "]\n";
        }
        for (const auto& [k, v] : s.entries) {
            out << k << " = " << v << '\n';
        }
        for (const auto& r : s.rows) {
            out << r << '\n';
        }
        first = false;
    }
    return out.str();
}

void Document::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << to_string();
}

}  // namespace bobsled::kv
