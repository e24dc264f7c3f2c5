#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "filab/errors.hpp"

namespace filab {

inline constexpr std::string_view kInfToken = "inf";

/// 17 significant digits; +inf is written as "inf".
inline std::string format_double(double x) {
    if (std::isinf(x)) return x > 0 ? std::string(kInfToken) : "-" + std::string(kInfToken);
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// "a;b;c" with format_double entries.
inline std::string format_list(std::span<const double> xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ";" : "") + format_double(xs[i]);
    return out;
}

inline std::string csv_escape(std::string_view cell) {
    if (cell.find_first_of(",\"\n") == std::string_view::npos) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Writes a schema-version line, a header row, then rows of matching width.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::string_view schema, std::vector<std::string> header)
        : out_(out), width_(header.size()) {
        if (header.empty()) throw InputError("CsvWriter: empty header");
        out_ << "# schema: " << schema << "\n";
        write(header);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw InputError("CsvWriter: row width does not match the header");
        write(cells);
    }

private:
    void write(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_escape(cells[i]);
        out_ << "\n";
    }

    std::ostream& out_;
    std::size_t width_;
};

} // namespace filab
