#include "cpaem/csv.hpp"

#include "cpaem/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cpaem {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<double> parse_fields(const std::string& line, const std::string& where) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::size_t a = pos, b = end;
        while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
        while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
        double v = 0.0;
        const char* first = line.data() + a;
        if (a < b && *first == '+') ++first;
        const auto res = std::from_chars(first, line.data() + b, v);
        if (a == b || res.ec != std::errc() || res.ptr != line.data() + b)
            throw InputError(where + ": cannot parse '" + line.substr(pos, end - pos) + "' as a number");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace

Vec parse_vector(const std::string& text) {
    const auto f = parse_fields(text, "vector");
    return Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
}

std::vector<Vec> read_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    std::vector<Vec> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (header && lineno == 1) continue;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = parse_fields(line, path + ":" + std::to_string(lineno));
        if (!rows.empty() && static_cast<Eigen::Index>(f.size()) != rows.front().size())
            throw InputError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
        rows.push_back(Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size())));
    }
    if (rows.empty()) throw InputError("data file '" + path + "' has no rows");
    return rows;
}

void write_csv(const std::string& path, const std::vector<Vec>& rows, const std::vector<std::string>& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    if (!header.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
    }
    for (const Vec& r : rows) {
        for (Eigen::Index i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
        out << '\n';
    }
    if (!out) throw InputError("write to '" + path + "' failed");
}

}  // namespace cpaem
