#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agentforest {

// Exact rational with canonical form: lowest terms, denominator > 0.
// Answers are compared by cross-multiplication so 0.5 == 1/2 exactly.
struct Rational {
    long long num = 0;
    long long den = 1;

    static Rational make(long long n, long long d) {
        if (d == 0) throw std::invalid_argument("rational: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        const long long g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
        Rational r;
        r.num = n;
        r.den = d;
        return r;
    }

    friend bool operator==(const Rational& a, const Rational& b) {
        return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }

    Rational operator+(const Rational& o) const {
        const __int128 n = static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den;
        const __int128 d = static_cast<__int128>(den) * o.den;
        constexpr __int128 lim = INT64_MAX;
        if (n > lim || n < -lim || d > lim) throw std::overflow_error("rational: overflow in addition");
        return make(static_cast<long long>(n), static_cast<long long>(d));
    }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    // Accepts "42", "-3", "1/2", "-3/6", "0.25"; rejects anything else.
    static std::optional<Rational> parse(std::string_view s) {
        size_t b = 0, e = s.size();
        while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
        while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
        s = s.substr(b, e - b);
        if (s.empty()) return std::nullopt;

        bool neg = false;
        size_t i = 0;
        if (s[0] == '+' || s[0] == '-') {
            neg = s[0] == '-';
            i = 1;
        }
        long long intpart = 0;
        size_t digits = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            if (digits >= 18) return std::nullopt;
            intpart = intpart * 10 + (s[i] - '0');
            ++digits;
            ++i;
        }
        if (digits == 0) return std::nullopt;

        if (i == s.size()) return make(neg ? -intpart : intpart, 1);

        if (s[i] == '.') {
            ++i;
            long long frac = 0, scale = 1;
            size_t fdigits = 0;
            while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
                if (digits + fdigits >= 18) return std::nullopt;
                frac = frac * 10 + (s[i] - '0');
                scale *= 10;
                ++fdigits;
                ++i;
            }
            if (fdigits == 0 || i != s.size()) return std::nullopt;
            const long long n = intpart * scale + frac;
            return make(neg ? -n : n, scale);
        }

        if (s[i] == '/') {
            ++i;
            bool dneg = false;
            if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
                dneg = s[i] == '-';
                ++i;
            }
            long long d = 0;
            size_t ddigits = 0;
            while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
                if (ddigits >= 18) return std::nullopt;
                d = d * 10 + (s[i] - '0');
                ++ddigits;
                ++i;
            }
            if (ddigits == 0 || i != s.size() || d == 0) return std::nullopt;
            return make(neg ? -intpart : intpart, dneg ? -d : d);
        }
        return std::nullopt;
    }
};

// Spec name for Rational::make: reduce to lowest terms with positive denominator.
inline Rational canonical_rational(long long num, long long den) { return Rational::make(num, den); }

}  // namespace agentforest
