#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kgbias {

// Parser for the "key = value" text files used by the train, probe and synth
// configs. Lines starting with '#' are comments, blank lines are skipped,
// keys may repeat (the synth format uses repeated "group" entries).
struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

class KvFile {
public:
    static KvFile parse_file(const std::string& path);
    static KvFile parse_text(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const;

    // First value for the key; ParseError if absent.
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;

    // All entries for a repeated key, in file order.
    std::vector<const KvEntry*> all(const std::string& key) const;

    const std::vector<KvEntry>& entries() const { return entries_; }
    const std::string& origin() const { return origin_; }

    // ParseError if any key is outside the allowed set (typo guard).
    void require_keys_in(const std::vector<std::string>& allowed) const;

private:
    const KvEntry* find(const std::string& key) const;
    std::int64_t parse_int(const KvEntry& e) const;
    double parse_double(const KvEntry& e) const;

    std::vector<KvEntry> entries_;
    std::string origin_;
};

} // namespace kgbias
