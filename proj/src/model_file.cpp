#include "skpca/io.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <sstream>

namespace skpca {

namespace {

constexpr std::string_view kModule = "cli_io";
constexpr std::string_view kMagic = "SKPCA";

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { buf_.append(s); }
    std::string& str() { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t{u8()} << (8 * k);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= std::uint64_t{u8()} << (8 * k);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    // Guards element counts against the remaining payload before allocating.
    std::uint64_t count(std::uint64_t min_bytes_each) {
        const std::uint64_t c = u64();
        require(min_bytes_each == 0 || c <= (data_.size() - pos_) / min_bytes_each, kModule,
                "corrupt model file (count exceeds payload)");
        return c;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        require(pos_ + n <= data_.size(), kModule, "corrupt model file (unexpected end of payload)");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view s) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_model(const DetectorModel& model, const std::string& metadata) {
    model.validate();
    const Index d = model.dim();
    ByteWriter w;
    w.bytes(kMagic);
    w.u8(kModelVersion);
    w.u8(model.potential_exact ? 1 : 0);
    w.f64(model.params.sigma_sq);
    w.u32(static_cast<std::uint32_t>(model.q));
    w.u32(static_cast<std::uint32_t>(d));
    w.u64(static_cast<std::uint64_t>(model.n_train));
    w.f64(model.threshold);
    w.f64(model.grand_mean);
    w.f64(model.potential_error_bound);

    w.u64(static_cast<std::uint64_t>(model.retained_count()));
    for (Index i = 0; i < model.retained_count(); ++i) {
        w.i64(model.retained_ids[static_cast<std::size_t>(i)]);
        w.u64(static_cast<std::uint64_t>(model.retained_index[static_cast<std::size_t>(i)]));
        w.f64(model.retained_row_means(i));
        for (Index k = 0; k < d; ++k) w.f64(model.retained_points(i, k));
    }

    w.u64(model.nonzero_coeffs());
    for (Index j = 0; j < model.q; ++j) {
        for (Index i = 0; i < model.retained_count(); ++i) {
            if (model.coeffs(i, j) == 0.0) continue;
            w.u32(static_cast<std::uint32_t>(i));
            w.u32(static_cast<std::uint32_t>(j));
            w.f64(model.coeffs(i, j));
        }
    }

    w.u64(static_cast<std::uint64_t>(model.potential_points.rows()));
    for (Index p = 0; p < model.potential_points.rows(); ++p) {
        w.f64(model.potential_weights(p));
        for (Index k = 0; k < d; ++k) w.f64(model.potential_points(p, k));
    }

    w.u32(static_cast<std::uint32_t>(model.dropped_columns.size()));
    for (Index c : model.dropped_columns) w.u32(static_cast<std::uint32_t>(c));

    w.u32(static_cast<std::uint32_t>(metadata.size()));
    w.bytes(metadata);
    w.u32(checksum(w.str()));
    return std::move(w.str());
}

DetectorModel decode_model(const std::string& bytes, std::string* metadata) {
    require(bytes.size() >= kMagic.size() + 2 + 4, kModule, "model file too short");
    require(std::string_view(bytes).substr(0, kMagic.size()) == kMagic, kModule,
            "not a model file (bad magic)");
    const std::string_view body = std::string_view(bytes).substr(0, bytes.size() - 4);
    ByteReader tail(std::string_view(bytes).substr(bytes.size() - 4));
    require(tail.u32() == checksum(body), kModule, "model file checksum mismatch (corrupt or truncated)");

    ByteReader r(body);
    r.bytes(kMagic.size());
    const std::uint8_t version = r.u8();
    require(version == kModelVersion, kModule,
            "unsupported model file version " + std::to_string(version) + " (expected " +
                std::to_string(kModelVersion) + ")");
    DetectorModel m;
    m.potential_exact = (r.u8() & 1) != 0;
    m.params.sigma_sq = r.f64();
    m.q = r.u32();
    const Index d = r.u32();
    m.n_train = static_cast<Index>(r.u64());
    m.threshold = r.f64();
    m.grand_mean = r.f64();
    m.potential_error_bound = r.f64();

    const auto rcount = static_cast<Index>(r.count(24 + 8 * static_cast<std::uint64_t>(d)));
    m.retained_points.resize(rcount, d);
    m.retained_row_means.resize(rcount);
    for (Index i = 0; i < rcount; ++i) {
        m.retained_ids.push_back(r.i64());
        m.retained_index.push_back(static_cast<Index>(r.u64()));
        m.retained_row_means(i) = r.f64();
        for (Index k = 0; k < d; ++k) m.retained_points(i, k) = r.f64();
    }

    m.coeffs = Matrix::Zero(rcount, m.q);
    const std::uint64_t nnz = r.count(16);
    for (std::uint64_t t = 0; t < nnz; ++t) {
        const Index i = r.u32();
        const Index j = r.u32();
        const double v = r.f64();
        require(i < rcount && j < m.q, kModule, "corrupt model file (coefficient index out of range)");
        m.coeffs(i, j) = v;
    }

    const auto pcount = static_cast<Index>(r.count(8 + 8 * static_cast<std::uint64_t>(d)));
    m.potential_points.resize(pcount, d);
    m.potential_weights.resize(pcount);
    for (Index p = 0; p < pcount; ++p) {
        m.potential_weights(p) = r.f64();
        for (Index k = 0; k < d; ++k) m.potential_points(p, k) = r.f64();
    }

    const std::uint32_t dropped = r.u32();
    for (std::uint32_t k = 0; k < dropped; ++k) m.dropped_columns.push_back(r.u32());

    const std::uint32_t meta_len = r.u32();
    const std::string_view meta = r.bytes(meta_len);
    if (metadata) *metadata = std::string(meta);
    require(r.done(), kModule, "corrupt model file (trailing bytes)");
    m.validate();
    return m;
}

void save_model(const DetectorModel& model, const std::filesystem::path& path,
                const std::string& metadata) {
    write_file_atomic(path, encode_model(model, metadata));
}

DetectorModel load_model(const std::filesystem::path& path, std::string* metadata) {
    return decode_model(read_file(path), metadata);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), kModule, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        require(out.good(), kModule, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, kModule, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), kModule, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace skpca
