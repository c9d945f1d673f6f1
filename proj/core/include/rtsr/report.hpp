#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "rtsr/bench.hpp"

namespace rtsr {

enum class ReportFormat { csv, json, table };

ReportFormat report_format_from_string(const std::string& s);

/// Column order shared by every format.
const std::vector<std::string>& report_columns();

/// Throws UsageError for empty rows.
std::string format_report(const std::vector<ReportRow>& rows, ReportFormat format);

/// Writes to `path`, or to `out` when path is empty or "-". Empty rows throw before
/// anything is created.
void emit_report(const std::vector<ReportRow>& rows, ReportFormat format, const std::filesystem::path& path,
                 std::ostream& out);

std::vector<ReportRow> parse_csv_report(const std::string& text);
std::vector<ReportRow> parse_json_report(const std::string& text);

}  // namespace rtsr
