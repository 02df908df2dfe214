#include "ntm/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ntm {

namespace {
constexpr const char* kMagic = "ntm-checkpoint 1";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void Checkpoint::set_meta_int(const std::string& key, long value) {
    meta[key] = std::to_string(value);
}

void Checkpoint::set_meta_double(const std::string& key, double value) {
    meta[key] = format_double(value);
}

std::string Checkpoint::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("checkpoint: missing meta key " + key);
    return it->second;
}

long Checkpoint::meta_int(const std::string& key) const {
    return std::stol(meta_at(key));
}

double Checkpoint::meta_double(const std::string& key) const {
    return std::strtod(meta_at(key).c_str(), nullptr);
}

void Checkpoint::add_tensor(const std::string& name, const Matrix& m) {
    tensors.emplace_back(name, m);
}

void Checkpoint::add_vector(const std::string& name, const Vec& v) {
    Matrix m(1, v.size());
    m.data() = v;
    tensors.emplace_back(name, std::move(m));
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return true;
    return false;
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors)
        if (n == name) return m;
    throw std::runtime_error("checkpoint: missing tensor " + name);
}

Vec Checkpoint::vector(const std::string& name) const {
    const Matrix& m = tensor(name);
    if (m.rows() != 1) throw std::runtime_error("checkpoint: tensor " + name + " is not a vector");
    return m.data();
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << kMagic << '\n';
    out << "meta\n";
    for (const auto& [k, v] : meta) out << "  " << k << ' ' << v << '\n';
    out << "end\n";
    for (const auto& [name, m] : tensors) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const double* row = m.row(i);
            for (std::size_t j = 0; j < m.cols(); ++j) {
                if (j) out << ' ';
                out << format_double(row[j]);
            }
            out << '\n';
        }
        out << "end\n";
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ck;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream header(line);
        std::string kind;
        header >> kind;
        if (kind == "meta") {
            while (std::getline(in, line) && line != "end") {
                std::stringstream ss(line);
                std::string key, value;
                ss >> key;
                std::getline(ss, value);
                if (!value.empty() && value.front() == ' ') value.erase(0, 1);
                if (!key.empty()) ck.meta[key] = value;
            }
        } else if (kind == "tensor") {
            std::string name;
            std::size_t rows = 0, cols = 0;
            header >> name >> rows >> cols;
            if (name.empty()) throw std::runtime_error("checkpoint: unnamed tensor");
            Matrix m(rows, cols);
            for (std::size_t i = 0; i < rows; ++i) {
                if (!std::getline(in, line))
                    throw std::runtime_error("checkpoint: truncated tensor " + name);
                const char* p = line.c_str();
                char* next = nullptr;
                for (std::size_t j = 0; j < cols; ++j) {
                    double v = std::strtod(p, &next);
                    if (next == p)
                        throw std::runtime_error("checkpoint: short row in tensor " + name);
                    m(i, j) = v;
                    p = next;
                }
            }
            if (!std::getline(in, line) || line != "end")
                throw std::runtime_error("checkpoint: missing end for tensor " + name);
            ck.tensors.emplace_back(name, std::move(m));
        } else {
            throw std::runtime_error("checkpoint: unexpected section '" + kind + "'");
        }
    }
    return ck;
}

}  // namespace ntm
