#pragma once

#include <string>
#include <vector>

namespace sedw {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

// Minimal standalone line plot; one polyline per series plus axis labels.
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<Series>& series);

void write_series_csv(const std::string& path, const std::vector<Series>& series);

// Aggregates a training-log CSV (and optional scores CSV) into a summary
// table plus loss/lr/lambda/w plots in CSV and SVG form.
void write_report(const std::string& train_log_csv, const std::string& scores_csv,
                  const std::string& out_dir);

} // namespace sedw
