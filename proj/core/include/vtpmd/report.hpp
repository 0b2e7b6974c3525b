#pragma once

#include <string>

#include "vtpmd/compress.hpp"
#include "vtpmd/lstsq.hpp"

namespace vtpmd {

// UTF-8 JSON with keys in the field order of the report types.
std::string compression_report_json(const CompressionReport& report);
std::string lstsq_report_json(const LstsqReport& report);

// Aligned text table for a serialized CompressionReport.
std::string render_report_table(const std::string& json_text);

}  // namespace vtpmd
