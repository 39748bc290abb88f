#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cavsense/sparams.hpp"

namespace cavsense {

enum class TouchstoneFormat { RI, MA, DB };

// Parses a Touchstone v1.1 two-port (.s2p) document. The option line
// `# <GHz|MHz|kHz|Hz> S <RI|MA|DB> R 50` is mandatory; data lines carry
// f S11 S21 S12 S22 (Touchstone column order). The record's metadata is the
// first comment line before the option line, or `source` if there is none,
// so write/read cycles keep the header.
//
// Errors: format_error (option line), parse_error (data line, with line
// number), validation_error (non-monotonic frequencies, no data).
SParameterRecord parse_touchstone(std::string_view text, std::string source = {});

// Canonical output: `# Hz S RI R 50`, LF line endings, %.12e values.
std::string write_touchstone(const SParameterRecord& record,
                             TouchstoneFormat format = TouchstoneFormat::RI);

SParameterRecord read_touchstone_file(const std::filesystem::path& path);
void write_touchstone_file(const std::filesystem::path& path, const SParameterRecord& record);

}  // namespace cavsense
