#pragma once

// Result tables (aligned text and TSV) and a minimal SVG line plot.

#include <string>
#include <vector>

namespace skpca {

std::string fmt_num(double v, int precision = 6);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string aligned() const;
    std::string tsv() const;
};

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool points_only = false;
};

std::string svg_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

}  // namespace skpca
