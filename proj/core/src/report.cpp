#include "rtsr/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rtsr/errors.hpp"

namespace rtsr {

using json = nlohmann::json;

namespace {

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double parse_number(const std::string& s, const std::string& column) {
    if (s.empty()) throw DataError("empty value in column " + column);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw DataError("bad number '" + s + "' in column " + column);
    return v;
}

std::vector<std::string> cells(const ReportRow& r, bool for_table) {
    auto num = [&](double v, int digits) { return for_table ? fixed(v, digits) : exact(v); };
    auto opt = [&](const std::optional<double>& v, int digits) {
        if (!v) return std::string(for_table ? "-" : "");
        return num(*v, digits);
    };
    return {r.model,
            std::to_string(r.qp),
            num(r.psnr_rgb, 3),
            num(r.psnr_y, 3),
            num(r.ssim_rgb, 4),
            num(r.ssim_y, 4),
            num(r.runtime.mean_ms, 3),
            num(r.runtime.p50_ms, 3),
            num(r.runtime.p95_ms, 3),
            num(r.params_m, 4),
            opt(r.delta_db, 3),
            opt(r.score, 2)};
}

ReportRow row_from_cells(const std::vector<std::string>& c) {
    const auto& cols = report_columns();
    if (c.size() != cols.size()) {
        throw DataError("report row has " + std::to_string(c.size()) + " fields, expected " + std::to_string(cols.size()));
    }
    ReportRow r;
    r.model = c[0];
    r.qp = static_cast<int>(parse_number(c[1], cols[1]));
    r.psnr_rgb = parse_number(c[2], cols[2]);
    r.psnr_y = parse_number(c[3], cols[3]);
    r.ssim_rgb = parse_number(c[4], cols[4]);
    r.ssim_y = parse_number(c[5], cols[5]);
    r.runtime = {parse_number(c[6], cols[6]), parse_number(c[7], cols[7]), parse_number(c[8], cols[8])};
    r.params_m = parse_number(c[9], cols[9]);
    if (!c[10].empty()) r.delta_db = parse_number(c[10], cols[10]);
    if (!c[11].empty()) r.score = parse_number(c[11], cols[11]);
    return r;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string to_csv(const std::vector<ReportRow>& rows) {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += csv_field(fields[i]);
        }
        out += "\r\n";
    };
    line(report_columns());
    for (const auto& r : rows) line(cells(r, false));
    return out;
}

// JSON has no infinities; non-finite values travel as strings.
json number_json(double v) { return std::isfinite(v) ? json(v) : json(exact(v)); }

double number_from_json(const json& j, const std::string& column) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_number(j.get<std::string>(), column);
    throw DataError("column " + column + " is not a number");
}

std::string to_json(const std::vector<ReportRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"model", r.model},
                       {"qp", r.qp},
                       {"psnr_rgb", number_json(r.psnr_rgb)},
                       {"psnr_y", number_json(r.psnr_y)},
                       {"ssim_rgb", number_json(r.ssim_rgb)},
                       {"ssim_y", number_json(r.ssim_y)},
                       {"runtime_mean_ms", number_json(r.runtime.mean_ms)},
                       {"runtime_p50_ms", number_json(r.runtime.p50_ms)},
                       {"runtime_p95_ms", number_json(r.runtime.p95_ms)},
                       {"params_m", number_json(r.params_m)},
                       {"delta_db", r.delta_db ? number_json(*r.delta_db) : json(nullptr)},
                       {"score", r.score ? number_json(*r.score) : json(nullptr)}});
    }
    return arr.dump(2) + "\n";
}

std::string to_table(const std::vector<ReportRow>& rows) {
    std::vector<std::vector<std::string>> grid{report_columns()};
    for (const auto& r : rows) grid.push_back(cells(r, true));
    std::vector<std::size_t> width(grid[0].size(), 0);
    for (const auto& g : grid)
        for (std::size_t i = 0; i < g.size(); ++i) width[i] = std::max(width[i], g[i].size());
    std::string out;
    for (const auto& g : grid) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::string pad(width[i] - g[i].size(), ' ');
            if (i) out += "  ";
            out += i == 0 ? g[i] + pad : pad + g[i];
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

}  // namespace

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{"model",          "qp",          "psnr_rgb",       "psnr_y",
                                               "ssim_rgb",       "ssim_y",      "runtime_mean_ms", "runtime_p50_ms",
                                               "runtime_p95_ms", "params_m",    "delta_db",        "score"};
    return cols;
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    if (s == "table") return ReportFormat::table;
    throw UsageError("unknown report format '" + s + "' (expected csv, json or table)");
}

std::string format_report(const std::vector<ReportRow>& rows, ReportFormat format) {
    if (rows.empty()) throw UsageError("no report rows to emit");
    switch (format) {
        case ReportFormat::csv: return to_csv(rows);
        case ReportFormat::json: return to_json(rows);
        case ReportFormat::table: return to_table(rows);
    }
    throw UsageError("unknown report format");
}

void emit_report(const std::vector<ReportRow>& rows, ReportFormat format, const std::filesystem::path& path,
                 std::ostream& out) {
    const std::string text = format_report(rows, format);
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write report to " + path.string());
    f << text;
    if (!f) throw DataError("cannot write report to " + path.string());
}

std::vector<ReportRow> parse_csv_report(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            rec.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                rec.push_back(std::move(field));
                records.push_back(std::move(rec));
            }
            rec.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted CSV field");
    if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
    }
    if (records.empty() || records[0] != report_columns()) throw DataError("CSV header does not match the report columns");
    std::vector<ReportRow> rows;
    for (std::size_t i = 1; i < records.size(); ++i) rows.push_back(row_from_cells(records[i]));
    return rows;
}

std::vector<ReportRow> parse_json_report(const std::string& text) {
    try {
        const json arr = json::parse(text);
        if (!arr.is_array()) throw DataError("JSON report must be an array");
        std::vector<ReportRow> rows;
        for (const auto& j : arr) {
            ReportRow r;
            r.model = j.at("model").get<std::string>();
            r.qp = j.at("qp").get<int>();
            r.psnr_rgb = number_from_json(j.at("psnr_rgb"), "psnr_rgb");
            r.psnr_y = number_from_json(j.at("psnr_y"), "psnr_y");
            r.ssim_rgb = number_from_json(j.at("ssim_rgb"), "ssim_rgb");
            r.ssim_y = number_from_json(j.at("ssim_y"), "ssim_y");
            r.runtime = {number_from_json(j.at("runtime_mean_ms"), "runtime_mean_ms"),
                         number_from_json(j.at("runtime_p50_ms"), "runtime_p50_ms"),
                         number_from_json(j.at("runtime_p95_ms"), "runtime_p95_ms")};
            r.params_m = number_from_json(j.at("params_m"), "params_m");
            if (!j.at("delta_db").is_null()) r.delta_db = number_from_json(j.at("delta_db"), "delta_db");
            if (!j.at("score").is_null()) r.score = number_from_json(j.at("score"), "score");
            rows.push_back(r);
        }
        return rows;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed JSON report: ") + e.what());
    }
}

}  // namespace rtsr
