#pragma once

#include <map>
#include <string>
#include <vector>

#include "ntm/linalg.hpp"

namespace ntm {

/// Self-describing text checkpoint: a `meta` key/value section followed by
/// named row-major tensors. Values are written with 17 significant digits so
/// that doubles round-trip exactly.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Matrix>> tensors;  // insertion order preserved

    void set_meta(const std::string& key, const std::string& value) { meta[key] = value; }
    void set_meta_int(const std::string& key, long value);
    void set_meta_double(const std::string& key, double value);

    std::string meta_at(const std::string& key) const;
    long meta_int(const std::string& key) const;
    double meta_double(const std::string& key) const;
    bool has_meta(const std::string& key) const { return meta.count(key) > 0; }

    void add_tensor(const std::string& name, const Matrix& m);
    void add_vector(const std::string& name, const Vec& v);
    bool has_tensor(const std::string& name) const;
    const Matrix& tensor(const std::string& name) const;
    Vec vector(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

/// Formats a double with 17 significant digits (exact round-trip).
std::string format_double(double v);

}  // namespace ntm
