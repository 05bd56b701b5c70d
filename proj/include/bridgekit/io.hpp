#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bridgekit/common.hpp"

namespace bridgekit {

// Stable numeric emission: 17 significant digits, LF line endings.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write csv: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(values[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_vectors_csv(const std::string& path, const std::vector<Vec>& rows, Eigen::Index dim) {
    std::vector<std::string> header;
    header.reserve(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) header.push_back("comp" + std::to_string(i));
    CsvWriter w(path, header);
    std::vector<double> vals(static_cast<std::size_t>(dim));
    for (const Vec& r : rows) {
        for (Eigen::Index i = 0; i < dim; ++i) vals[static_cast<std::size_t>(i)] = r[i];
        w.row(vals);
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write: " + path);
    f << content;
}

} // namespace bridgekit
