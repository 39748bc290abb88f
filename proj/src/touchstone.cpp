#include "cavsense/touchstone.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "cavsense/errors.hpp"

namespace cavsense {

namespace {

struct OptionLine {
    double unit_scale = 1e9;
    TouchstoneFormat format = TouchstoneFormat::MA;
};

std::string upper(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

std::optional<double> to_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

OptionLine parse_option_line(std::string_view body) {
    OptionLine opt;
    const auto tokens = split_ws(body);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string tok = upper(tokens[i]);
        if (tok == "HZ") {
            opt.unit_scale = 1.0;
        } else if (tok == "KHZ") {
            opt.unit_scale = 1e3;
        } else if (tok == "MHZ") {
            opt.unit_scale = 1e6;
        } else if (tok == "GHZ") {
            opt.unit_scale = 1e9;
        } else if (tok == "RI") {
            opt.format = TouchstoneFormat::RI;
        } else if (tok == "MA") {
            opt.format = TouchstoneFormat::MA;
        } else if (tok == "DB") {
            opt.format = TouchstoneFormat::DB;
        } else if (tok == "S") {
            // only scattering parameters are supported
        } else if (tok == "Y" || tok == "Z" || tok == "G" || tok == "H") {
            throw format_error("option line: parameter type " + tok + " is not supported (need S)");
        } else if (tok == "R") {
            if (i + 1 >= tokens.size()) throw format_error("option line: R without a value");
            const auto z0 = to_double(tokens[++i]);
            if (!z0) throw format_error("option line: bad reference impedance '" + std::string(tokens[i]) + "'");
            if (*z0 != 50.0) throw format_error("option line: only R 50 is supported");
        } else {
            throw format_error("option line: unrecognized token '" + std::string(tokens[i]) + "'");
        }
    }
    return opt;
}

cplx to_complex(double a, double b, TouchstoneFormat format) {
    switch (format) {
        case TouchstoneFormat::RI:
            return {a, b};
        case TouchstoneFormat::MA:
            return std::polar(a, b * std::numbers::pi / 180.0);
        case TouchstoneFormat::DB:
            return std::polar(std::pow(10.0, a / 20.0), b * std::numbers::pi / 180.0);
    }
    return {};
}

}  // namespace

SParameterRecord parse_touchstone(std::string_view text, std::string source) {
    std::optional<OptionLine> option;
    std::vector<double> freqs;
    std::vector<SParameterMatrix> mats;
    std::string header;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (const auto bang = line.find('!'); bang != std::string_view::npos) {
            if (!option && header.empty() && line.find_first_not_of(" \t") == bang) {
                header = line.substr(bang + 1);
                const auto a = header.find_first_not_of(" \t");
                const auto b = header.find_last_not_of(" \t\r");
                header = a == std::string::npos ? std::string() : header.substr(a, b - a + 1);
            }
            line = line.substr(0, bang);
        }
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos) continue;
        line = line.substr(first);

        if (line.front() == '#') {
            // Only the first option line counts.
            if (!option) option = parse_option_line(line.substr(1));
            continue;
        }
        if (!option) throw format_error("data before option line at line " + std::to_string(line_no));

        const auto tokens = split_ws(line);
        if (tokens.size() != 9) {
            throw parse_error(line_no, "expected 9 columns for a two-port data line, got " +
                                           std::to_string(tokens.size()));
        }
        std::array<double, 9> v{};
        for (std::size_t i = 0; i < 9; ++i) {
            const auto d = to_double(tokens[i]);
            if (!d) throw parse_error(line_no, "bad number '" + std::string(tokens[i]) + "'");
            v[i] = *d;
        }
        const double f = v[0] * option->unit_scale;
        if (!freqs.empty() && !(f > freqs.back())) {
            throw validation_error("frequencies not strictly increasing at line " + std::to_string(line_no));
        }
        freqs.push_back(f);
        SParameterMatrix m;
        m.s11 = to_complex(v[1], v[2], option->format);
        m.s21 = to_complex(v[3], v[4], option->format);
        m.s12 = to_complex(v[5], v[6], option->format);
        m.s22 = to_complex(v[7], v[8], option->format);
        mats.push_back(m);
    }
    if (!option) throw format_error("missing option line");
    return SParameterRecord(std::move(freqs), std::move(mats), header.empty() ? std::move(source) : std::move(header));
}

std::string write_touchstone(const SParameterRecord& record, TouchstoneFormat format) {
    if (format != TouchstoneFormat::RI) throw validation_error("Touchstone writer emits RI only");
    std::string out;
    out.reserve(record.size() * 190 + 64);
    if (!record.metadata().empty()) {
        std::string meta = record.metadata();
        std::ranges::replace(meta, '\n', ' ');
        std::ranges::replace(meta, '\r', ' ');
        out += "! " + meta + "\n";
    }
    out += "# Hz S RI R 50\n";
    char buf[32];
    auto put = [&](double x, char sep) {
        std::snprintf(buf, sizeof buf, "%.12e", x);
        out += buf;
        out += sep;
    };
    const auto f = record.frequencies();
    const auto m = record.matrices();
    for (std::size_t i = 0; i < record.size(); ++i) {
        put(f[i], ' ');
        put(m[i].s11.real(), ' ');
        put(m[i].s11.imag(), ' ');
        put(m[i].s21.real(), ' ');
        put(m[i].s21.imag(), ' ');
        put(m[i].s12.real(), ' ');
        put(m[i].s12.imag(), ' ');
        put(m[i].s22.real(), ' ');
        put(m[i].s22.imag(), '\n');
    }
    return out;
}

SParameterRecord read_touchstone_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_touchstone(ss.str(), path.filename().string());
}

void write_touchstone_file(const std::filesystem::path& path, const SParameterRecord& record) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out << write_touchstone(record);
    if (!out) throw io_error("write failed for " + path.string());
}

}  // namespace cavsense
