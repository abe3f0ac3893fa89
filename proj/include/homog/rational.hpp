#pragma once

// Exact rational arithmetic for the temporal scaling exponents. Regime
// classification compares r against q + 2 and must never be done in floating
// point: r = "5/2", q = "1/2" is exactly critical.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace homog {

class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t value) : num_(value) {}
    constexpr Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
        normalize();
    }

    // Accepts "3", "-3", "5/2", " 5 / 2 ".
    static Rational parse(const std::string& text) {
        std::size_t slash = text.find('/');
        try {
            if (slash == std::string::npos)
                return Rational(parse_int(text), 1);
            return Rational(parse_int(text.substr(0, slash)),
                            parse_int(text.substr(slash + 1)));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("not a rational number: '" + text + "'");
        }
    }

    constexpr std::int64_t num() const { return num_; }
    constexpr std::int64_t den() const { return den_; }
    constexpr double value() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    std::string str() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

    constexpr Rational operator+(const Rational& o) const {
        return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
    }
    constexpr Rational operator-(const Rational& o) const {
        return Rational(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
    }
    constexpr Rational operator*(const Rational& o) const {
        return Rational(num_ * o.num_, den_ * o.den_);
    }

    // Comparison by cross-multiplication in 128-bit to avoid overflow.
    constexpr bool operator==(const Rational& o) const {
        return static_cast<__int128>(num_) * o.den_ == static_cast<__int128>(o.num_) * den_;
    }
    constexpr bool operator!=(const Rational& o) const { return !(*this == o); }
    constexpr bool operator<(const Rational& o) const {
        return static_cast<__int128>(num_) * o.den_ < static_cast<__int128>(o.num_) * den_;
    }
    constexpr bool operator>(const Rational& o) const { return o < *this; }
    constexpr bool operator<=(const Rational& o) const { return !(o < *this); }
    constexpr bool operator>=(const Rational& o) const { return !(*this < o); }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;

    constexpr void normalize() {
        if (den_ == 0) throw std::invalid_argument("rational with zero denominator");
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    static std::int64_t parse_int(const std::string& text) {
        std::size_t used = 0;
        // trim
        std::size_t b = text.find_first_not_of(" \t");
        std::size_t e = text.find_last_not_of(" \t");
        if (b == std::string::npos) throw std::invalid_argument("empty");
        const std::string t = text.substr(b, e - b + 1);
        const long long v = std::stoll(t, &used);
        if (used != t.size()) throw std::invalid_argument("trailing junk");
        return v;
    }
};

// Temporal scaling regime of the coefficient oscillation relative to the
// capacity scaling: the cell problem is elliptic below the critical line
// r = q + 2, parabolic on it, and elliptic-with-time-averaged-coefficient
// above it.
enum class Regime { SubCritical, Critical, SuperCritical };

inline constexpr Regime classify_regime(const Rational& q, const Rational& r) {
    const Rational critical = q + Rational(2);
    if (r < critical) return Regime::SubCritical;
    if (r == critical) return Regime::Critical;
    return Regime::SuperCritical;
}

inline constexpr const char* regime_name(Regime g) {
    switch (g) {
        case Regime::SubCritical: return "subcritical";
        case Regime::Critical: return "critical";
        case Regime::SuperCritical: return "supercritical";
    }
    return "?";
}

inline Regime regime_from_name(const std::string& name) {
    if (name == "subcritical") return Regime::SubCritical;
    if (name == "critical") return Regime::Critical;
    if (name == "supercritical") return Regime::SuperCritical;
    throw std::invalid_argument("unknown regime name: '" + name + "'");
}

}  // namespace homog
