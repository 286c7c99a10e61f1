#include "kgbias/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <sstream>

namespace kgbias {

BiasReport build_report(std::string title, std::vector<BiasScoreRow> rows,
                        std::int64_t min_count_threshold, std::int64_t top_k) {
    std::erase_if(rows, [min_count_threshold](const BiasScoreRow& row) {
        return row.count_a + row.count_b < min_count_threshold;
    });
    std::sort(rows.begin(), rows.end(), [](const BiasScoreRow& x, const BiasScoreRow& y) {
        if (x.bias != y.bias) return x.bias > y.bias;
        return x.label < y.label;
    });
    BiasReport report;
    report.title = std::move(title);
    report.rows = std::move(rows);
    report.min_count_threshold = min_count_threshold;
    report.top_k = top_k;
    return report;
}

namespace {

std::string render_markdown(const BiasReport& report) {
    std::ostringstream out;
    if (!report.title.empty()) out << "# " << report.title << "\n\n";
    out << "| target | b_p | count_a | count_b |\n";
    out << "| --- | --- | --- | --- |\n";
    std::int64_t emitted = 0;
    for (const BiasScoreRow& row : report.rows) {
        if (emitted == report.top_k) break;
        char bias[64];
        std::snprintf(bias, sizeof bias, "%.3f", row.bias);
        out << "| " << row.label << " | " << bias << " | " << row.count_a << " | "
            << row.count_b << " |\n";
        ++emitted;
    }
    return out.str();
}

std::string render_csv(const BiasReport& report) {
    std::ostringstream out;
    out << "target,b_p,count_a,count_b\n";
    std::int64_t emitted = 0;
    for (const BiasScoreRow& row : report.rows) {
        if (emitted == report.top_k) break;
        char bias[64];
        std::snprintf(bias, sizeof bias, "%.17g", row.bias);
        out << row.label << ',' << bias << ',' << row.count_a << ',' << row.count_b << '\n';
        ++emitted;
    }
    return out.str();
}

} // namespace

std::string render_report(const BiasReport& report, ReportFormat format) {
    return format == ReportFormat::Markdown ? render_markdown(report) : render_csv(report);
}

} // namespace kgbias
