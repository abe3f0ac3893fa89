#pragma once

// Artifact I/O: atomic file writes, shortest round-trip CSV formatting, and
// little-endian binary containers for corrector fields and space-time fields.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/macro.hpp"
#include "homog/rational.hpp"

namespace homog {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// shortest representation that round-trips exactly
inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw IoError("failed to format double");
    return std::string(buf, p);
}

// write-to-temp-then-rename so readers never observe partial files
inline void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string csv_line(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

// ---------------------------------------------------------------------------
// binary containers
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

inline void put_f64(std::string& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

inline void put_f64_span(std::string& out, std::span<const double> v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

class Cursor {
  public:
    Cursor(const std::string& bytes, const std::string& what) : bytes_(bytes), what_(what) {}

    void expect_magic(std::string_view magic) {
        if (bytes_.size() < pos_ + magic.size() ||
            std::string_view(bytes_).substr(pos_, magic.size()) != magic)
            throw IoError(what_ + ": bad or missing magic header");
        pos_ += magic.size();
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, bytes_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, bytes_.data() + pos_, 8);
        pos_ += 8;
        return v;
    }
    void f64_into(std::span<double> dst) {
        need(dst.size() * 8);
        std::memcpy(dst.data(), bytes_.data() + pos_, dst.size() * 8);
        pos_ += dst.size() * 8;
    }
    void expect_end() const {
        if (pos_ != bytes_.size()) throw IoError(what_ + ": trailing bytes");
    }

  private:
    void need(std::size_t n) const {
        if (bytes_.size() < pos_ + n) throw IoError(what_ + ": truncated file");
    }
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::string_view kCorrectorMagic = "HOMGCOR1";
inline constexpr std::string_view kFieldMagic = "HOMGFLD1";

inline std::string serialize_corrector(const CorrectorField& chi) {
    std::string out;
    out += kCorrectorMagic;
    detail::put_u32(out, static_cast<std::uint32_t>(chi.dim));
    detail::put_u32(out, static_cast<std::uint32_t>(chi.n_y));
    detail::put_u32(out, static_cast<std::uint32_t>(chi.n_s));
    detail::put_u32(out, static_cast<std::uint32_t>(chi.regime));
    for (int j = 0; j < chi.dim; ++j)
        detail::put_f64_span(out, std::span<const double>(chi.comp[static_cast<std::size_t>(j)]));
    return out;
}

inline void write_corrector(const std::filesystem::path& path, const CorrectorField& chi) {
    atomic_write(path, serialize_corrector(chi));
}

inline CorrectorField read_corrector(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    detail::Cursor c(bytes, path.string());
    c.expect_magic(kCorrectorMagic);
    CorrectorField chi;
    chi.dim = static_cast<int>(c.u32());
    chi.n_y = static_cast<int>(c.u32());
    chi.n_s = static_cast<int>(c.u32());
    const std::uint32_t reg = c.u32();
    if (chi.dim < 1 || chi.dim > 2 || chi.n_y < 2 || chi.n_s < 1 || reg > 2)
        throw IoError(path.string() + ": invalid corrector header");
    chi.regime = static_cast<Regime>(reg);
    const std::size_t per_comp = chi.nodes() * static_cast<std::size_t>(chi.n_s);
    chi.comp.assign(static_cast<std::size_t>(chi.dim), std::vector<double>(per_comp));
    for (int j = 0; j < chi.dim; ++j) c.f64_into(chi.comp[static_cast<std::size_t>(j)]);
    c.expect_end();
    return chi;
}

inline std::string serialize_field(const SpaceTimeField& u) {
    std::string out;
    out += kFieldMagic;
    detail::put_u32(out, static_cast<std::uint32_t>(u.dim));
    detail::put_u32(out, static_cast<std::uint32_t>(u.n_x));
    detail::put_u32(out, static_cast<std::uint32_t>(u.n_t));
    for (int d = 0; d < u.dim; ++d) {
        detail::put_f64(out, u.lo[d]);
        detail::put_f64(out, u.hi[d]);
    }
    detail::put_f64(out, u.T);
    detail::put_f64_span(out, std::span<const double>(u.data));
    return out;
}

inline void write_field(const std::filesystem::path& path, const SpaceTimeField& u) {
    atomic_write(path, serialize_field(u));
}

inline SpaceTimeField read_field(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    detail::Cursor c(bytes, path.string());
    c.expect_magic(kFieldMagic);
    SpaceTimeField u;
    u.dim = static_cast<int>(c.u32());
    u.n_x = static_cast<int>(c.u32());
    u.n_t = static_cast<int>(c.u32());
    if (u.dim < 1 || u.dim > 2 || u.n_x < 1 || u.n_t < 2)
        throw IoError(path.string() + ": invalid field header");
    for (int d = 0; d < u.dim; ++d) {
        u.lo[d] = c.f64();
        u.hi[d] = c.f64();
    }
    u.T = c.f64();
    u.data.resize(u.interior_size() * static_cast<std::size_t>(u.n_t));
    c.f64_into(u.data);
    c.expect_end();
    return u;
}

// raw little-endian f64 array (tabulated coefficient data files)
inline std::vector<double> read_f64_array(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() % 8 != 0)
        throw IoError(path.string() + ": size is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / 8);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace homog
