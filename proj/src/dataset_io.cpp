#include "cavsense/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cavsense/errors.hpp"
#include "cavsense/text.hpp"
#include "cavsense/touchstone.hpp"

namespace cavsense {

namespace {

constexpr std::string_view kHeader = "filename,fraction,provenance,parent_lo,parent_hi,seed";

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

double parse_double(std::string_view s, std::size_t line, std::string_view what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw parse_error(line, "bad " + std::string(what) + " '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw parse_error(line, "bad seed '" + std::string(s) + "'");
    }
    return v;
}

FixturePair read_fixtures(const std::filesystem::path& dir) {
    return {read_touchstone_file(dir / kFixtureLeftName), read_touchstone_file(dir / kFixtureRightName)};
}

}  // namespace

std::vector<std::string> sample_filenames(std::size_t count) {
    std::size_t width = 3;
    for (std::size_t n = 1000; n < count; n *= 10) ++width;
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string digits = std::to_string(i);
        digits.insert(0, width > digits.size() ? width - digits.size() : 0, '0');
        out.push_back("sample_" + digits + ".s2p");
    }
    return out;
}

std::string manifest_csv(std::span<const LabeledSample> samples, std::span<const std::string> filenames) {
    if (samples.size() != filenames.size()) throw validation_error("manifest: samples and filenames differ in count");
    std::string out(kHeader);
    out += '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        out += filenames[i] + "," + format_double(s.fraction) + "," + std::string(to_string(s.provenance)) + ",";
        if (s.parent_lo) out += format_double(*s.parent_lo);
        out += ",";
        if (s.parent_hi) out += format_double(*s.parent_hi);
        out += ",";
        if (s.seed) out += std::to_string(*s.seed);
        out += "\n";
    }
    return out;
}

std::vector<ManifestRow> parse_manifest(std::string_view text) {
    std::vector<ManifestRow> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kHeader) throw parse_error(line_no, "manifest header must be '" + std::string(kHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != 6) throw parse_error(line_no, "expected 6 columns, got " + std::to_string(cells.size()));
        ManifestRow row;
        row.filename = std::string(cells[0]);
        if (row.filename.empty() || row.filename.find('/') != std::string::npos) {
            throw parse_error(line_no, "bad filename '" + row.filename + "'");
        }
        row.fraction = parse_double(cells[1], line_no, "fraction");
        try {
            row.provenance = provenance_from_string(cells[2]);
        } catch (const error& e) {
            throw parse_error(line_no, e.what());
        }
        if (!cells[3].empty()) row.parent_lo = parse_double(cells[3], line_no, "parent_lo");
        if (!cells[4].empty()) row.parent_hi = parse_double(cells[4], line_no, "parent_hi");
        if (!cells[5].empty()) row.seed = parse_u64(cells[5], line_no);
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw parse_error(line_no, "empty manifest");
    return rows;
}

void write_dataset(const std::filesystem::path& dir, std::span<const LabeledSample> samples,
                   const std::optional<FixturePair>& fixtures) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    const auto names = sample_filenames(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) write_touchstone_file(dir / names[i], samples[i].record);
    write_text_file(dir / kManifestName, manifest_csv(samples, names));
    if (fixtures) {
        write_touchstone_file(dir / kFixtureLeftName, fixtures->left);
        write_touchstone_file(dir / kFixtureRightName, fixtures->right);
    }
}

Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    const auto rows = parse_manifest(read_text_file(dir / kManifestName));
    for (const auto& row : rows) {
        LabeledSample s{read_touchstone_file(dir / row.filename), row.fraction, row.provenance,
                        row.parent_lo, row.parent_hi, row.seed};
        s.validate();
        ds.samples.push_back(std::move(s));
        ds.filenames.push_back(row.filename);
    }
    if (std::filesystem::exists(dir / kFixtureLeftName) && std::filesystem::exists(dir / kFixtureRightName)) {
        ds.fixtures = read_fixtures(dir);
    }
    return ds;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw io_error("write failed: " + path.string());
}

}  // namespace cavsense
