#pragma once

// Tiny arithmetic grammar for boundary data and densities given as strings:
// +, -, *, /, ^ and parentheses over the real coordinates x1, y1, x2, y2, the
// complex shorthands z1 = x1 + i y1 and z2, the constants pi and i, and the
// functions abs2, re, im, pow, exp.  Evaluation is complex throughout; a
// compiled field must come out real at every evaluation point.

#include <cctype>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"

namespace cma {

class ExprError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

using CExpr = std::function<std::complex<double>(const Point&)>;

class ExprParser {
  public:
    explicit ExprParser(std::string src_) : src(std::move(src_)) {}

    CExpr parse() {
        CExpr e = expr();
        skip_ws();
        if (pos != src.size()) fail("trailing characters");
        return e;
    }

  private:
    std::string src;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ExprError("expression error at position " + std::to_string(pos) + ": " + what +
                        " in \"" + src + "\"");
    }

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    CExpr expr() {
        CExpr lhs = term();
        for (;;) {
            if (eat('+')) {
                CExpr rhs = term();
                lhs = [lhs, rhs](const Point& p) { return lhs(p) + rhs(p); };
            } else if (eat('-')) {
                CExpr rhs = term();
                lhs = [lhs, rhs](const Point& p) { return lhs(p) - rhs(p); };
            } else {
                return lhs;
            }
        }
    }

    CExpr term() {
        CExpr lhs = unary();
        for (;;) {
            if (eat('*')) {
                CExpr rhs = unary();
                lhs = [lhs, rhs](const Point& p) { return lhs(p) * rhs(p); };
            } else if (eat('/')) {
                CExpr rhs = unary();
                lhs = [lhs, rhs](const Point& p) { return lhs(p) / rhs(p); };
            } else {
                return lhs;
            }
        }
    }

    CExpr unary() {
        if (eat('-')) {
            CExpr e = unary();
            return [e](const Point& p) { return -e(p); };
        }
        if (eat('+')) return unary();
        return power();
    }

    CExpr power() {
        CExpr base = atom();
        if (eat('^')) {
            CExpr ex = unary();  // right associative, binds unary minus in the exponent
            return [base, ex](const Point& p) { return std::pow(base(p), ex(p)); };
        }
        return base;
    }

    CExpr atom() {
        skip_ws();
        if (pos >= src.size()) fail("unexpected end of input");
        char c = src[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return ident();
        if (eat('(')) {
            CExpr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        fail("unexpected character");
    }

    CExpr number() {
        std::size_t used = 0;
        double val;
        try {
            val = std::stod(src.substr(pos), &used);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos += used;
        return [val](const Point&) { return std::complex<double>(val, 0); };
    }

    CExpr ident() {
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        std::string name = src.substr(start, pos - start);

        if (name == "x1") return [](const Point& p) { return std::complex<double>(p[0], 0); };
        if (name == "y1") return [](const Point& p) { return std::complex<double>(p[1], 0); };
        if (name == "x2") return [](const Point& p) { return std::complex<double>(p[2], 0); };
        if (name == "y2") return [](const Point& p) { return std::complex<double>(p[3], 0); };
        if (name == "z1") return [](const Point& p) { return std::complex<double>(p[0], p[1]); };
        if (name == "z2") return [](const Point& p) { return std::complex<double>(p[2], p[3]); };
        if (name == "pi") return [](const Point&) { return std::complex<double>(M_PI, 0); };
        if (name == "i") return [](const Point&) { return std::complex<double>(0, 1); };

        if (!eat('(')) fail("unknown identifier '" + name + "'");
        std::vector<CExpr> args;
        if (peek() != ')') {
            args.push_back(expr());
            while (eat(',')) args.push_back(expr());
        }
        if (!eat(')')) fail("expected ')' after arguments");

        auto arity = [&](std::size_t k) {
            if (args.size() != k)
                fail("function '" + name + "' expects " + std::to_string(k) + " argument(s)");
        };
        if (name == "abs2") {
            arity(1);
            CExpr a = args[0];
            return [a](const Point& p) { return std::complex<double>(std::norm(a(p)), 0); };
        }
        if (name == "re") {
            arity(1);
            CExpr a = args[0];
            return [a](const Point& p) { return std::complex<double>(a(p).real(), 0); };
        }
        if (name == "im") {
            arity(1);
            CExpr a = args[0];
            return [a](const Point& p) { return std::complex<double>(a(p).imag(), 0); };
        }
        if (name == "pow") {
            arity(2);
            CExpr a = args[0], b = args[1];
            return [a, b](const Point& p) { return std::pow(a(p), b(p)); };
        }
        if (name == "exp") {
            arity(1);
            CExpr a = args[0];
            return [a](const Point& p) { return std::exp(a(p)); };
        }
        fail("unknown function '" + name + "'");
    }
};

}  // namespace detail

// Compile an expression string into a real-valued field function.  The
// expression may pass through complex intermediates (z1, i, exp, ...) but
// must land on the real axis wherever it is evaluated.
inline RealFn compile_expression(const std::string& src) {
    detail::CExpr e = detail::ExprParser(src).parse();
    return [e, src](const Point& p) {
        std::complex<double> w = e(p);
        if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
            throw ExprError("expression \"" + src + "\" evaluated to a non-finite value");
        if (std::fabs(w.imag()) > 1e-9 * (1.0 + std::fabs(w.real())))
            throw ExprError("expression \"" + src + "\" has a nonzero imaginary part");
        return w.real();
    };
}

}  // namespace cma
