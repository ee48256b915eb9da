#include "fpi/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fpi {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error("config: bad section header at line " +
                                         std::to_string(lineno));
            section = trim(t.substr(1, t.size() - 2));
            cfg.data_[section]; // section may stay empty
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " +
                                     std::to_string(lineno));
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
        cfg.data_[section].push_back({key, value});
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    if (it == data_.end()) return false;
    for (const auto& kv : it->second)
        if (kv.first == key) return true;
    return false;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    if (it != data_.end())
        for (const auto& kv : it->second)
            if (kv.first == key) return kv.second;
    throw std::runtime_error("config: missing key [" + section + "] " + key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    return std::stod(get(section, key));
}

long Config::get_int(const std::string& section, const std::string& key) const {
    return std::stol(get(section, key));
}

Vec Config::get_vec(const std::string& section, const std::string& key) const {
    std::vector<std::string> parts = split(get(section, key), ',');
    Vec v(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) v[i] = std::stod(trim(parts[i]));
    return v;
}

Matrix Config::get_matrix(const std::string& section, const std::string& key) const {
    std::vector<std::string> rows = split(get(section, key), ';');
    std::vector<Vec> parsed;
    for (const std::string& r : rows) {
        std::vector<std::string> parts = split(r, ',');
        Vec row(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) row[i] = std::stod(trim(parts[i]));
        parsed.push_back(std::move(row));
    }
    Matrix m(parsed.size(), parsed.empty() ? 0 : parsed[0].size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (parsed[i].size() != m.cols()) throw std::runtime_error("config: ragged matrix rows");
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = parsed[i][j];
    }
    return m;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    for (auto& kv : data_[section])
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    data_[section].push_back({key, value});
}

void Config::set_double(const std::string& section, const std::string& key, double value) {
    set(section, key, fmt17(value));
}

void Config::set_vec(const std::string& section, const std::string& key, const Vec& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt17(v[i]);
    }
    set(section, key, s);
}

void Config::set_matrix(const std::string& section, const std::string& key, const Matrix& m) {
    std::string s;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i) s += ';';
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) s += ',';
            s += fmt17(m(i, j));
        }
    }
    set(section, key, s);
}

std::vector<std::string> Config::sections() const {
    std::vector<std::string> out;
    for (const auto& kv : data_) out.push_back(kv.first);
    return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
    std::vector<std::string> out;
    auto it = data_.find(section);
    if (it != data_.end())
        for (const auto& kv : it->second) out.push_back(kv.first);
    return out;
}

void Config::require_known_keys(const std::string& section,
                                const std::vector<std::string>& allowed) const {
    for (const std::string& k : keys(section))
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw std::runtime_error("config: unknown key [" + section + "] " + k);
}

std::string Config::to_string() const {
    std::ostringstream os;
    for (const auto& [section, kvs] : data_) {
        os << '[' << section << "]\n";
        for (const auto& [k, v] : kvs) os << k << " = " << v << '\n';
        os << '\n';
    }
    return os.str();
}

void Config::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("config: cannot open " + path + " for writing");
    out << to_string();
}

namespace {

void params_to_config(const std::string& kind, const OperatorParams& p, Config& cfg,
                      const std::string& section) {
    cfg.set(section, "kind", kind);
    for (const auto& [k, v] : p.scalars) cfg.set_double(section, k, v);
    for (const auto& [k, v] : p.vecs) cfg.set_vec(section, k, v);
    for (const auto& [k, v] : p.matrices) cfg.set_matrix(section, k, v);
    if (p.inner) params_to_config(p.inner_kind, *p.inner, cfg, section + ".inner");
}

} // namespace

Config operator_to_config(const Operator& op) {
    if (!op.params())
        throw std::invalid_argument("operator_to_config: operator kind '" + op.kind() +
                                    "' is not serializable");
    Config cfg;
    params_to_config(op.kind(), *op.params(), cfg, "operator");
    return cfg;
}

Operator operator_from_config(const Config& cfg, const std::string& section) {
    std::string kind = cfg.get(section, "kind");
    if (kind == "translation") {
        cfg.require_known_keys(section, {"kind", "v"});
        return make_translation(cfg.get_vec(section, "v"));
    }
    if (kind == "rotation_shift") {
        cfg.require_known_keys(section, {"kind"});
        return make_counterexample();
    }
    if (kind == "affine") {
        cfg.require_known_keys(section, {"kind", "A", "b"});
        return make_affine(cfg.get_matrix(section, "A"), cfg.get_vec(section, "b"));
    }
    if (kind == "worst_case") {
        cfg.require_known_keys(section, {"kind", "k", "v_norm", "alpha"});
        return make_worst_case(static_cast<std::size_t>(cfg.get_int(section, "k")),
                               cfg.get_double(section, "v_norm"),
                               cfg.get_double(section, "alpha"));
    }
    if (kind == "rotated") {
        cfg.require_known_keys(section, {"kind", "U", "x0"});
        Operator inner = operator_from_config(cfg, section + ".inner");
        return rotate_operator(inner, cfg.get_matrix(section, "U"), cfg.get_vec(section, "x0"));
    }
    throw std::runtime_error("operator_from_config: unknown kind " + kind);
}

Operator operator_from_spec(const std::string& spec) {
    std::string name = spec;
    std::string args;
    std::size_t colon = spec.find(':');
    if (colon != std::string::npos) {
        name = spec.substr(0, colon);
        args = spec.substr(colon + 1);
    }
    std::map<std::string, std::string> kv;
    if (!args.empty()) {
        // values may themselves contain commas (vectors), so split on
        // key= boundaries: a,b,c after "v=" belongs to v
        std::string cur_key;
        std::string cur_val;
        std::vector<std::string> parts = split(args, ',');
        for (const std::string& part : parts) {
            std::size_t eq = part.find('=');
            if (eq != std::string::npos) {
                if (!cur_key.empty()) kv[cur_key] = cur_val;
                cur_key = trim(part.substr(0, eq));
                cur_val = trim(part.substr(eq + 1));
            } else {
                if (cur_key.empty())
                    throw std::runtime_error("operator spec: stray value in " + spec);
                cur_val += ',' + trim(part);
            }
        }
        if (!cur_key.empty()) kv[cur_key] = cur_val;
    }
    auto get = [&](const std::string& key, const std::string& fallback) {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };
    auto parse_vec = [&](const std::string& text) {
        std::vector<std::string> parts = split(text, ',');
        Vec v(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i) v[i] = std::stod(trim(parts[i]));
        return v;
    };

    if (name == "rotation-shift" || name == "rotation_shift") return make_counterexample();
    if (name == "translation") {
        auto it = kv.find("v");
        if (it == kv.end()) throw std::runtime_error("operator spec: translation needs v=");
        return make_translation(parse_vec(it->second));
    }
    if (name == "worst-case" || name == "worst_case") {
        auto it = kv.find("k");
        if (it == kv.end()) throw std::runtime_error("operator spec: worst-case needs k=");
        std::size_t k = static_cast<std::size_t>(std::stol(it->second));
        double v_norm = std::stod(get("v_norm", "1"));
        double alpha = kv.count("alpha") ? std::stod(kv.at("alpha"))
                                         : worst_case_default_alpha(k, v_norm);
        return make_worst_case(k, v_norm, alpha);
    }
    if (name == "affine") {
        // seeded random nonexpansive instance
        std::size_t dim = static_cast<std::size_t>(std::stol(get("dim", "8")));
        std::uint64_t seed = static_cast<std::uint64_t>(std::stoull(get("seed", "1")));
        double target = std::stod(get("norm", "0.9"));
        std::size_t rank = static_cast<std::size_t>(std::stol(get("rank", "1")));
        return make_random_affine(dim, seed, target, rank);
    }
    throw std::runtime_error("operator spec: unknown operator " + name);
}

} // namespace fpi
