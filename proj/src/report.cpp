#include "skpca/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace skpca {

std::string fmt_num(double v, int precision) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string Table::aligned() const {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    auto line = [&](const std::vector<std::string>& r) {
        std::string s;
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) s += "  ";
            s += r[c];
            if (c + 1 < r.size()) s.append(width[c] - r[c].size(), ' ');
        }
        return s + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
}

std::string Table::tsv() const {
    auto line = [](const std::vector<std::string>& r) {
        std::string s;
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) s += '\t';
            s += r[c];
        }
        return s + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
}

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string svg_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
    constexpr double W = 520, H = 380, left = 60, right = 150, top = 40, bottom = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
    if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"380\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"520\" height=\"380\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt_num(W / 2 - 40, 1) + "\" y=\"22\" font-size=\"14\">" + escape(title) + "</text>\n";
    s += "<rect x=\"" + fmt_num(left, 1) + "\" y=\"" + fmt_num(top, 1) + "\" width=\"" + fmt_num(pw, 1) +
         "\" height=\"" + fmt_num(ph, 1) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0, yv = ymin + (ymax - ymin) * t / 4.0;
        s += "<text x=\"" + fmt_num(px(xv) - 12, 1) + "\" y=\"" + fmt_num(top + ph + 16, 1) + "\">" +
             fmt_num(xv, 3) + "</text>\n";
        s += "<text x=\"4\" y=\"" + fmt_num(py(yv) + 4, 1) + "\">" + fmt_num(yv, 3) + "</text>\n";
    }
    s += "<text x=\"" + fmt_num(left + pw / 2 - 30, 1) + "\" y=\"" + fmt_num(H - 10, 1) + "\">" +
         escape(x_label) + "</text>\n";
    s += "<text x=\"12\" y=\"" + fmt_num(top - 8, 1) + "\">" + escape(y_label) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        const char* color = kColors[k % std::size(kColors)];
        std::string pts;
        for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            if (sr.points_only) {
                s += "<circle cx=\"" + fmt_num(px(sr.x[i]), 2) + "\" cy=\"" + fmt_num(py(sr.y[i]), 2) +
                     "\" r=\"3\" fill=\"" + color + "\"/>\n";
            } else {
                pts += fmt_num(px(sr.x[i]), 2) + "," + fmt_num(py(sr.y[i]), 2) + " ";
            }
        }
        if (!pts.empty()) {
            s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
                 pts + "\"/>\n";
        }
        const double ly = top + 14 + 16 * static_cast<double>(k);
        s += "<rect x=\"" + fmt_num(W - right + 10, 1) + "\" y=\"" + fmt_num(ly - 8, 1) +
             "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
        s += "<text x=\"" + fmt_num(W - right + 24, 1) + "\" y=\"" + fmt_num(ly + 1, 1) + "\">" +
             escape(sr.name) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace skpca
