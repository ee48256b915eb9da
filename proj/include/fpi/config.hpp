#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpi/matrix.hpp"
#include "fpi/operators.hpp"
#include "fpi/vec.hpp"

namespace fpi {

// Plain-text key-value document with nested [section.subsection] headers.
// Vectors are comma-separated scalars; matrices separate rows with ';'.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key) const;
    Vec get_vec(const std::string& section, const std::string& key) const;
    Matrix get_matrix(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_double(const std::string& section, const std::string& key, double value);
    void set_vec(const std::string& section, const std::string& key, const Vec& v);
    void set_matrix(const std::string& section, const std::string& key, const Matrix& m);

    std::vector<std::string> sections() const;
    std::vector<std::string> keys(const std::string& section) const;

    // Rejects keys outside the allowed set for the section (typo guard).
    void require_known_keys(const std::string& section,
                            const std::vector<std::string>& allowed) const;

    std::string to_string() const;
    void write_file(const std::string& path) const;

private:
    // section -> ordered key/value pairs
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> data_;
};

// Operator serialization under [operator] (nested [operator.inner] for the
// rotated wrapper).  Supported kinds: translation, rotation_shift, affine,
// worst_case, rotated.
Config operator_to_config(const Operator& op);
Operator operator_from_config(const Config& cfg, const std::string& section = "operator");

// Compact command-line form, e.g. "worst-case:k=10,v_norm=1" or
// "translation:v=0,0,1" or "rotation-shift".
Operator operator_from_spec(const std::string& spec);

} // namespace fpi
