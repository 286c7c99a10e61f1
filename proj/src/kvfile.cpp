#include "kgbias/kvfile.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "kgbias/errors.hpp"

namespace kgbias {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

KvFile KvFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

KvFile KvFile::parse_text(const std::string& text, const std::string& origin) {
    KvFile kv;
    kv.origin_ = origin;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(lineno) +
                             ": expected 'key = value', got: " + stripped);
        }
        KvEntry entry;
        entry.key = trim(stripped.substr(0, eq));
        entry.value = trim(stripped.substr(eq + 1));
        entry.line = lineno;
        if (entry.key.empty()) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        kv.entries_.push_back(std::move(entry));
    }
    return kv;
}

const KvEntry* KvFile::find(const std::string& key) const {
    for (const auto& e : entries_) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

bool KvFile::has(const std::string& key) const { return find(key) != nullptr; }

const std::string& KvFile::get(const std::string& key) const {
    const KvEntry* e = find(key);
    if (!e) throw ParseError(origin_ + ": missing required key '" + key + "'");
    return e->value;
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
    const KvEntry* e = find(key);
    return e ? e->value : fallback;
}

std::int64_t KvFile::parse_int(const KvEntry& e) const {
    std::int64_t value = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError(origin_ + ":" + std::to_string(e.line) + ": key '" + e.key +
                         "' expects an integer, got: " + e.value);
    }
    return value;
}

double KvFile::parse_double(const KvEntry& e) const {
    double value = 0.0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ParseError(origin_ + ":" + std::to_string(e.line) + ": key '" + e.key +
                         "' expects a number, got: " + e.value);
    }
    return value;
}

std::int64_t KvFile::get_int(const std::string& key) const {
    const KvEntry* e = find(key);
    if (!e) throw ParseError(origin_ + ": missing required key '" + key + "'");
    return parse_int(*e);
}

std::int64_t KvFile::get_int_or(const std::string& key, std::int64_t fallback) const {
    const KvEntry* e = find(key);
    return e ? parse_int(*e) : fallback;
}

double KvFile::get_double(const std::string& key) const {
    const KvEntry* e = find(key);
    if (!e) throw ParseError(origin_ + ": missing required key '" + key + "'");
    return parse_double(*e);
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
    const KvEntry* e = find(key);
    return e ? parse_double(*e) : fallback;
}

std::vector<const KvEntry*> KvFile::all(const std::string& key) const {
    std::vector<const KvEntry*> out;
    for (const auto& e : entries_) {
        if (e.key == key) out.push_back(&e);
    }
    return out;
}

void KvFile::require_keys_in(const std::vector<std::string>& allowed) const {
    for (const auto& e : entries_) {
        if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
            throw ParseError(origin_ + ":" + std::to_string(e.line) + ": unknown key '" +
                             e.key + "'");
        }
    }
}

} // namespace kgbias
