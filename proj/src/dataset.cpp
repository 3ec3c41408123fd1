#include "skpca/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace skpca {

namespace {

constexpr std::string_view kModule = "cli_io";

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t line_no, const std::filesystem::path& path) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    require(ec == std::errc() && ptr == last && std::isfinite(v), kModule,
            path.string() + ":" + std::to_string(line_no) + ": not a finite number: '" + field + "'");
    return v;
}

std::set<std::string> parse_selector(const std::string& selector) {
    std::set<std::string> out;
    for (auto& s : split_line(selector)) {
        if (!s.empty()) out.insert(s);
    }
    return out;
}

std::uint32_t read_be32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, kModule, what + ": truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
}

std::string read_payload(std::istream& in, std::size_t expected, const std::string& what) {
    std::string buf(expected, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(expected));
    require(static_cast<std::size_t>(in.gcount()) == expected, kModule,
            what + ": truncated payload (header declares " + std::to_string(expected) +
                " bytes, found " + std::to_string(in.gcount()) + ")");
    in.peek();
    require(in.eof(), kModule, what + ": payload longer than the header declares");
    return buf;
}

}  // namespace

LabeledRows read_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    require(in.good(), kModule, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), kModule, path.string() + ": empty file");
    const std::vector<std::string> header = split_line(line);

    Index label_pos = -1;
    LabeledRows out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (!label_column.empty() && header[c] == label_column) {
            label_pos = static_cast<Index>(c);
        } else {
            out.feature_names.push_back(header[c]);
        }
    }
    require(label_column.empty() || label_pos >= 0, kModule,
            path.string() + ": label column '" + label_column + "' not found in header");
    const auto width = static_cast<Index>(header.size());
    const Index dim = static_cast<Index>(out.feature_names.size());
    require(dim >= 1, kModule, path.string() + ": no feature columns");

    std::vector<double> values;
    std::size_t line_no = 1;
    Index n = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_line(line);
        require(static_cast<Index>(fields.size()) == width, kModule,
                path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(width) + " fields, found " + std::to_string(fields.size()));
        for (Index c = 0; c < width; ++c) {
            if (c == label_pos) {
                out.labels.push_back(fields[static_cast<std::size_t>(c)]);
            } else {
                values.push_back(parse_number(fields[static_cast<std::size_t>(c)], line_no, path));
            }
        }
        ++n;
    }
    out.rows = Eigen::Map<RowMatrix>(values.data(), n, dim);
    return out;
}

void write_csv(const std::filesystem::path& path, const LabeledRows& data,
               const std::string& label_column) {
    std::string s;
    for (std::size_t c = 0; c < data.feature_names.size(); ++c) {
        if (c) s += ',';
        s += data.feature_names[c];
    }
    const bool labelled = !label_column.empty();
    if (labelled) s += "," + label_column;
    s += '\n';
    char buf[32];
    for (Index i = 0; i < data.rows.rows(); ++i) {
        for (Index k = 0; k < data.rows.cols(); ++k) {
            if (k) s += ',';
            std::snprintf(buf, sizeof buf, "%.17g", data.rows(i, k));
            s += buf;
        }
        if (labelled) s += "," + data.labels[static_cast<std::size_t>(i)];
        s += '\n';
    }
    write_file_atomic(path, s);
}

LabeledRows read_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img(images, std::ios::binary);
    require(img.good(), kModule, "cannot open " + images.string());
    const std::string iname = images.string();
    const std::uint32_t imagic = read_be32(img, iname);
    require(imagic == 0x00000803, kModule, iname + ": bad magic for IDX images");
    const std::uint32_t count = read_be32(img, iname);
    const std::uint32_t rows = read_be32(img, iname);
    const std::uint32_t cols = read_be32(img, iname);
    const std::size_t dim = std::size_t{rows} * cols;
    require(dim >= 1, kModule, iname + ": zero-sized images");
    const std::string pixels = read_payload(img, std::size_t{count} * dim, iname);

    std::ifstream lab(labels, std::ios::binary);
    require(lab.good(), kModule, "cannot open " + labels.string());
    const std::string lname = labels.string();
    const std::uint32_t lmagic = read_be32(lab, lname);
    require(lmagic == 0x00000801, kModule, lname + ": bad magic for IDX labels");
    const std::uint32_t lcount = read_be32(lab, lname);
    require(lcount == count, kModule, "image count " + std::to_string(count) +
                                          " does not match label count " + std::to_string(lcount));
    const std::string bytes = read_payload(lab, lcount, lname);

    LabeledRows out;
    out.rows.resize(count, static_cast<Index>(dim));
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            out.rows(static_cast<Index>(i), static_cast<Index>(k)) =
                static_cast<unsigned char>(pixels[i * dim + k]) / 255.0;
        }
        out.labels.push_back(std::to_string(static_cast<unsigned char>(bytes[i])));
    }
    for (std::size_t k = 0; k < dim; ++k) out.feature_names.push_back("px" + std::to_string(k));
    return out;
}

DatasetPool make_pool(const LabeledRows& data, const std::string& inlier_label,
                      const std::string& outlier_label) {
    require(data.labels.size() == static_cast<std::size_t>(data.rows.rows()), kModule,
            "dataset has no label for every row");
    const std::set<std::string> in_set = parse_selector(inlier_label);
    const bool any_outlier = outlier_label == "*";
    const std::set<std::string> out_set = any_outlier ? std::set<std::string>{} : parse_selector(outlier_label);
    require(!in_set.empty(), kModule, "inlier label selector is empty");
    require(any_outlier || !out_set.empty(), kModule, "outlier label selector is empty");
    for (const auto& l : in_set) {
        require(!out_set.count(l), kModule, "label '" + l + "' is both inlier and outlier");
    }
    const std::set<std::string> present(data.labels.begin(), data.labels.end());
    for (const auto& l : in_set) {
        require(present.count(l), kModule, "unknown inlier label '" + l + "'");
    }
    for (const auto& l : out_set) {
        require(present.count(l), kModule, "unknown outlier label '" + l + "'");
    }

    std::vector<Index> in_rows, out_rows;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const auto& l = data.labels[i];
        if (in_set.count(l)) {
            in_rows.push_back(static_cast<Index>(i));
        } else if (any_outlier || out_set.count(l)) {
            out_rows.push_back(static_cast<Index>(i));
        }
    }
    const DataMatrix all = DataMatrix::make(data.rows, {}, 0);
    return {all.subset(in_rows, 0), all.subset(out_rows, 0)};
}

LabeledRows read_dataset(const DatasetSpec& spec) {
    return spec.format == DatasetSpec::Format::csv ? read_csv(spec.data, spec.label_column)
                                                   : read_idx(spec.data, spec.labels);
}

DatasetPool load_pool(const DatasetSpec& spec) {
    return make_pool(read_dataset(spec), spec.inlier_label, spec.outlier_label);
}

Split load_csv(const std::filesystem::path& path, const DatasetSpec& spec) {
    const LabeledRows rows = read_csv(path, spec.label_column);
    return draw_split(make_pool(rows, spec.inlier_label, spec.outlier_label), spec.counts, spec.seed);
}

Split load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const DatasetSpec& spec) {
    const LabeledRows rows = read_idx(images, labels);
    return draw_split(make_pool(rows, spec.inlier_label, spec.outlier_label), spec.counts, spec.seed);
}

}  // namespace skpca
