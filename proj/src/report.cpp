#include "sedw/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace sedw {

namespace {

const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::vector<Series>& series) {
    const double width = 720, height = 420;
    const double ml = 70, mr = 20, mt = 40, mb = 50;

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const Series& s : series) {
        for (double x : s.x) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
        }
        for (double y : s.y) {
            if (!std::isfinite(y)) continue;
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0;
        x_hi = 1;
    }
    if (!std::isfinite(y_lo)) {
        y_lo = 0;
        y_hi = 1;
    }
    if (x_hi == x_lo) x_hi = x_lo + 1;
    if (y_hi == y_lo) y_hi = y_lo + 1;

    auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb); };

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"16\">" << title << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
       << height - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
        const double fy = y_lo + (y_hi - y_lo) * i / 4.0;
        os << "<text x=\"" << sx(fx) << "\" y=\"" << height - mb + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << std::setprecision(4) << fx << "</text>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << sy(fy) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << std::setprecision(4) << fy << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        os << "<polyline fill=\"none\" stroke=\"" << kColors[si % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << width - mr - 10 << "\" y=\"" << mt + 16 * (si + 1)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
           << kColors[si % 6] << "\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
}

void write_series_csv(const std::string& path, const std::vector<Series>& series) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "iteration";
    for (const Series& s : series) os << ',' << s.name;
    os << '\n';
    const std::size_t n = series.empty() ? 0 : series[0].x.size();
    for (std::size_t i = 0; i < n; ++i) {
        os << series[0].x[i];
        for (const Series& s : series) os << ',' << std::setprecision(12) << s.y[i];
        os << '\n';
    }
}

void write_report(const std::string& train_log_csv, const std::string& scores_csv,
                  const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto rows = read_csv(train_log_csv);
    if (rows.size() < 2) throw std::runtime_error("training log is empty: " + train_log_csv);
    const auto& header = rows[0];
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("training log misses column " + name);
    };
    const std::size_t c_it = col("iteration"), c_lr = col("lr"), c_lambda = col("lambda"),
                      c_w = col("w"), c_lf = col("l_f"), c_lc = col("l_c"), c_lcon = col("l_con"),
                      c_linter = col("l_inter");

    auto series_of = [&](std::size_t c, const std::string& name) {
        Series s;
        s.name = name;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            s.x.push_back(std::stod(rows[r][c_it]));
            s.y.push_back(std::stod(rows[r][c]));
        }
        return s;
    };

    const Series lf = series_of(c_lf, "l_f"), lc = series_of(c_lc, "l_c"),
                 lcon = series_of(c_lcon, "l_con"), linter = series_of(c_linter, "l_inter");
    Series total;
    total.name = "total";
    total.x = lf.x;
    for (std::size_t i = 0; i < lf.y.size(); ++i)
        total.y.push_back(lf.y[i] + lc.y[i] + lcon.y[i] + linter.y[i]);

    write_series_csv((fs::path(out_dir) / "loss.csv").string(), {lf, lc, lcon, linter, total});
    write_line_plot_svg((fs::path(out_dir) / "loss.svg").string(), "loss components",
                        {lf, lc, lcon, linter, total});
    const Series lr = series_of(c_lr, "lr");
    write_series_csv((fs::path(out_dir) / "lr.csv").string(), {lr});
    write_line_plot_svg((fs::path(out_dir) / "lr.svg").string(), "learning rate", {lr});
    const Series lambda = series_of(c_lambda, "lambda");
    write_series_csv((fs::path(out_dir) / "lambda.csv").string(), {lambda});
    write_line_plot_svg((fs::path(out_dir) / "lambda.svg").string(), "confidence threshold",
                        {lambda});
    const Series w = series_of(c_w, "w");
    write_series_csv((fs::path(out_dir) / "w.csv").string(), {w});
    write_line_plot_svg((fs::path(out_dir) / "w.svg").string(), "consistency ramp weight", {w});

    std::ofstream os(fs::path(out_dir) / "summary.txt");
    os << "training iterations: " << rows.size() - 1 << '\n';
    os << std::fixed << std::setprecision(6);
    os << "final l_f:       " << lf.y.back() << '\n';
    os << "final l_c:       " << lc.y.back() << '\n';
    os << "final l_con:     " << lcon.y.back() << '\n';
    os << "final l_inter:   " << linter.y.back() << '\n';
    os << "final total:     " << total.y.back() << '\n';
    os << "lambda schedule: " << lambda.y.front() << " -> " << lambda.y.back() << '\n';
    os << "w schedule:      " << w.y.front() << " -> " << w.y.back() << '\n';
    os << "lr range:        " << *std::min_element(lr.y.begin(), lr.y.end()) << " .. "
       << *std::max_element(lr.y.begin(), lr.y.end()) << '\n';

    if (!scores_csv.empty()) {
        os << '\n' << "event-based scores (" << scores_csv << "):\n";
        for (const auto& row : read_csv(scores_csv)) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "  " : "") << row[i];
            os << '\n';
        }
    }
}

} // namespace sedw
