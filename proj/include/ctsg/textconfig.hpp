#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctsg/error.hpp"

namespace ctsg {

/// Small TOML-like text format used for configs, manifests and constraint files.
///
///   # comment
///   key = 1.5
///   [section]
///   name = "text"
///   [[list]]          (each header opens a new table appended to "list")
///   flag = true
///
/// Values are kept as text; quoted strings are unescaped on parse.
struct TextValue {
    std::string text;
    bool quoted = false;
};

struct TextTable {
    std::string name;     // "" for the root table
    bool array_item = false;
    std::vector<std::pair<std::string, TextValue>> entries;

    const TextValue* find(std::string_view key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    bool has(std::string_view key) const { return find(key) != nullptr; }

    void set(std::string key, std::string value, bool quoted) {
        for (auto& [k, v] : entries) {
            if (k == key) {
                v = TextValue{std::move(value), quoted};
                return;
            }
        }
        entries.emplace_back(std::move(key), TextValue{std::move(value), quoted});
    }
    void set_string(std::string key, std::string value) { set(std::move(key), std::move(value), true); }
    void set_number(std::string key, double value);
    void set_int(std::string key, long long value) { set(std::move(key), std::to_string(value), false); }
    void set_bool(std::string key, bool value) { set(std::move(key), value ? "true" : "false", false); }

    std::string get_string(std::string_view key) const {
        const TextValue* v = find(key);
        if (!v) throw ConfigError(where() + "missing key '" + std::string(key) + "'");
        return v->text;
    }
    std::string get_string(std::string_view key, std::string fallback) const {
        const TextValue* v = find(key);
        return v ? v->text : std::move(fallback);
    }
    double get_number(std::string_view key) const;
    double get_number(std::string_view key, double fallback) const {
        return has(key) ? get_number(key) : fallback;
    }
    long long get_int(std::string_view key) const;
    long long get_int(std::string_view key, long long fallback) const { return has(key) ? get_int(key) : fallback; }
    bool get_bool(std::string_view key, bool fallback) const;

    std::string where() const { return name.empty() ? std::string() : "[" + name + "] "; }
};

class TextDocument {
public:
    TextDocument() { tables_.push_back(TextTable{}); }

    TextTable& root() { return tables_.front(); }
    const TextTable& root() const { return tables_.front(); }

    /// First (non-array) table with the given name, or nullptr.
    const TextTable* table(std::string_view name) const {
        for (const auto& t : tables_)
            if (!t.array_item && t.name == name) return &t;
        return nullptr;
    }
    TextTable& table_or_add(const std::string& name) {
        for (auto& t : tables_)
            if (!t.array_item && t.name == name) return t;
        tables_.push_back(TextTable{name, false, {}});
        return tables_.back();
    }
    TextTable& append_item(const std::string& name) {
        tables_.push_back(TextTable{name, true, {}});
        return tables_.back();
    }
    std::vector<const TextTable*> items(std::string_view name) const {
        std::vector<const TextTable*> out;
        for (const auto& t : tables_)
            if (t.array_item && t.name == name) out.push_back(&t);
        return out;
    }
    const std::vector<TextTable>& tables() const { return tables_; }

    static TextDocument parse(std::string_view text);
    static TextDocument load(const std::string& path);
    std::string str() const;
    void save(const std::string& path) const;

private:
    std::vector<TextTable> tables_;
};

/// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_double(std::string_view s, const std::string& context) {
    std::string tmp(s);
    // strtod accepts leading spaces and hex; we want a plain decimal token.
    if (tmp.empty()) throw ParseError(context + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.find_first_of("xX") != std::string::npos || std::isspace(static_cast<unsigned char>(tmp[0]))) {
        throw ParseError(context + ": not a number: '" + tmp + "'");
    }
    return v;
}

inline void TextTable::set_number(std::string key, double value) { set(std::move(key), format_double(value), false); }

inline double TextTable::get_number(std::string_view key) const {
    const TextValue* v = find(key);
    if (!v) throw ConfigError(where() + "missing key '" + std::string(key) + "'");
    try {
        return parse_double(v->text, where() + std::string(key));
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

inline long long TextTable::get_int(std::string_view key) const {
    const TextValue* v = find(key);
    if (!v) throw ConfigError(where() + "missing key '" + std::string(key) + "'");
    long long out = 0;
    const char* b = v->text.data();
    const char* e = b + v->text.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e) throw ConfigError(where() + "key '" + std::string(key) + "' is not an integer");
    return out;
}

inline bool TextTable::get_bool(std::string_view key, bool fallback) const {
    const TextValue* v = find(key);
    if (!v) return fallback;
    if (v->text == "true") return true;
    if (v->text == "false") return false;
    throw ConfigError(where() + "key '" + std::string(key) + "' is not a boolean");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

}  // namespace detail

inline TextDocument TextDocument::parse(std::string_view text) {
    TextDocument doc;
    std::size_t current = 0;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string at = "line " + std::to_string(lineno) + ": ";
        std::string_view line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.starts_with("[[")) {
            if (!line.ends_with("]]")) throw ParseError(at + "unterminated table header");
            doc.append_item(std::string(detail::trim(line.substr(2, line.size() - 4))));
            current = doc.tables_.size() - 1;
            continue;
        }
        if (line[0] == '[') {
            if (line.back() != ']') throw ParseError(at + "unterminated table header");
            TextTable* t = &doc.table_or_add(std::string(detail::trim(line.substr(1, line.size() - 2))));
            current = static_cast<std::size_t>(t - doc.tables_.data());
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(at + "expected key = value");
        std::string key(detail::trim(line.substr(0, eq)));
        if (key.empty()) throw ParseError(at + "empty key");
        std::string_view rest = detail::trim(line.substr(eq + 1));
        if (!rest.empty() && rest[0] == '"') {
            std::string value;
            std::size_t i = 1;
            bool closed = false;
            for (; i < rest.size(); ++i) {
                const char c = rest[i];
                if (c == '\\' && i + 1 < rest.size()) {
                    const char n = rest[++i];
                    value += n == 'n' ? '\n' : n == 't' ? '\t' : n;
                } else if (c == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    value += c;
                }
            }
            if (!closed) throw ParseError(at + "unterminated string");
            std::string_view tail = detail::trim(rest.substr(i));
            if (!tail.empty() && tail[0] != '#') throw ParseError(at + "trailing characters after string");
            doc.tables_[current].set(std::move(key), std::move(value), true);
        } else {
            const auto hash = rest.find('#');
            std::string_view v = detail::trim(rest.substr(0, hash));
            if (v.empty()) throw ParseError(at + "missing value");
            doc.tables_[current].set(std::move(key), std::string(v), false);
        }
    }
    return doc;
}

inline TextDocument TextDocument::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

inline std::string TextDocument::str() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& t : tables_) {
        if (t.name.empty() && !t.array_item) {
            if (t.entries.empty()) continue;
        } else {
            if (!first) os << '\n';
            os << (t.array_item ? "[[" : "[") << t.name << (t.array_item ? "]]" : "]") << '\n';
        }
        for (const auto& [k, v] : t.entries) os << k << " = " << (v.quoted ? detail::quote(v.text) : v.text) << '\n';
        first = false;
    }
    return os.str();
}

inline void TextDocument::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << str();
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace ctsg
