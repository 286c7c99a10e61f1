#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgbias/bias_probe.hpp"

namespace kgbias {

// Ranked, threshold-filtered audit result. Rows are sorted by bias
// descending, ties broken by ascending label; every row passed the
// count_a + count_b >= min_count_threshold filter. top_k limits rendering,
// not the stored rows.
struct BiasReport {
    std::string title;
    std::vector<BiasScoreRow> rows;
    std::int64_t min_count_threshold = 20;
    std::int64_t top_k = 20;
};

BiasReport build_report(std::string title, std::vector<BiasScoreRow> rows,
                        std::int64_t min_count_threshold = 20, std::int64_t top_k = 20);

enum class ReportFormat { Markdown, Csv };

// Markdown: "| <label> | <bias %.3f> | <count_a> | <count_b> |" rows under a
// fixed header, at most top_k of them. Csv: the same rows, full precision,
// header "target,b_p,count_a,count_b".
std::string render_report(const BiasReport& report, ReportFormat format);

} // namespace kgbias
