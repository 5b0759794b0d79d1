#pragma once

// Small dense Hermitian matrices (n <= 3) with exact-ish determinants,
// eigenvalues and the perturbation lower bound
//
//   det(M + beta I) >= sum_{k=0}^{n} beta^k det(M)^{(n-k)/n}
//
// valid for M >= 0, beta >= 0 (with 0^0 = 1, so the k = n term is beta^n).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cma {

using Complex = std::complex<double>;

struct HermitianError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class HermitianForm {
  public:
    explicit HermitianForm(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, Complex{0, 0}) {
        if (n < 1 || n > 3) throw HermitianError("HermitianForm: order must be 1, 2 or 3");
    }

    int n;
    std::vector<Complex> a;  // row-major

    Complex& at(int j, int k) { return a[static_cast<std::size_t>(j) * n + k]; }
    const Complex& at(int j, int k) const { return a[static_cast<std::size_t>(j) * n + k]; }

    // Enforce H = H^* exactly: average with the conjugate transpose and drop
    // imaginary parts on the diagonal.
    void symmetrize() {
        for (int j = 0; j < n; ++j) {
            at(j, j) = Complex{at(j, j).real(), 0.0};
            for (int k = j + 1; k < n; ++k) {
                Complex m = 0.5 * (at(j, k) + std::conj(at(k, j)));
                at(j, k) = m;
                at(k, j) = std::conj(m);
            }
        }
    }

    static HermitianForm identity(int n) {
        HermitianForm I(n);
        for (int j = 0; j < n; ++j) I.at(j, j) = 1.0;
        return I;
    }

    HermitianForm& operator+=(const HermitianForm& o) {
        if (n != o.n) throw HermitianError("HermitianForm: size mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    HermitianForm& operator*=(double s) {
        for (auto& x : a) x *= s;
        return *this;
    }
    friend HermitianForm operator+(HermitianForm x, const HermitianForm& y) { return x += y; }
    friend HermitianForm operator*(double s, HermitianForm x) { return x *= s; }

    // Shift by beta * I.
    HermitianForm shifted(double beta) const {
        HermitianForm out = *this;
        for (int j = 0; j < n; ++j) out.at(j, j) += beta;
        return out;
    }

    // Determinant of a Hermitian matrix is real; cofactor expansion keeps the
    // imaginary dust at machine zero for n <= 3.
    double det() const {
        switch (n) {
            case 1:
                return at(0, 0).real();
            case 2:
                return at(0, 0).real() * at(1, 1).real() - std::norm(at(0, 1));
            default: {
                Complex d = at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1))
                          - at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0))
                          + at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
                return d.real();
            }
        }
    }

    double trace() const {
        double t = 0;
        for (int j = 0; j < n; ++j) t += at(j, j).real();
        return t;
    }

    // Ascending eigenvalues.  Closed form for n <= 2; cyclic complex Jacobi
    // sweeps for n = 3 (plenty for 3x3 at double precision).
    std::array<double, 3> eigenvalues() const {
        std::array<double, 3> ev{0, 0, 0};
        if (n == 1) {
            ev[0] = at(0, 0).real();
            return ev;
        }
        if (n == 2) {
            double p = at(0, 0).real(), q = at(1, 1).real();
            double mean = 0.5 * (p + q);
            double rad = std::sqrt(0.25 * (p - q) * (p - q) + std::norm(at(0, 1)));
            ev[0] = mean - rad;
            ev[1] = mean + rad;
            return ev;
        }
        HermitianForm m = *this;
        for (int sweep = 0; sweep < 60; ++sweep) {
            double off = 0;
            for (int j = 0; j < 3; ++j)
                for (int k = j + 1; k < 3; ++k) off += std::norm(m.at(j, k));
            if (off < 1e-30) break;
            for (int j = 0; j < 3; ++j) {
                for (int k = j + 1; k < 3; ++k) {
                    Complex ajk = m.at(j, k);
                    double abs_ajk = std::abs(ajk);
                    if (abs_ajk < 1e-300) continue;
                    // Unitary 2x2 rotation annihilating the (j,k) entry.
                    double ajj = m.at(j, j).real(), akk = m.at(k, k).real();
                    double tau = (akk - ajj) / (2.0 * abs_ajk);
                    double t = (tau >= 0 ? 1.0 : -1.0) /
                               (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                    double c = 1.0 / std::sqrt(1.0 + t * t);
                    Complex phase = ajk / abs_ajk;
                    Complex s = t * c * phase;
                    // Apply R^* M R with R acting on columns j, k.
                    for (int r = 0; r < 3; ++r) {
                        Complex mrj = m.at(r, j), mrk = m.at(r, k);
                        m.at(r, j) = c * mrj - std::conj(s) * mrk;
                        m.at(r, k) = s * mrj + c * mrk;
                    }
                    for (int r = 0; r < 3; ++r) {
                        Complex mjr = m.at(j, r), mkr = m.at(k, r);
                        m.at(j, r) = c * mjr - s * mkr;
                        m.at(k, r) = std::conj(s) * mjr + c * mkr;
                    }
                    m.symmetrize();
                }
            }
        }
        for (int j = 0; j < 3; ++j) ev[j] = m.at(j, j).real();
        std::sort(ev.begin(), ev.end());
        return ev;
    }

    double min_eigenvalue() const { return eigenvalues()[0]; }

    bool is_psd(double tol = 0.0) const { return min_eigenvalue() >= -tol; }

    // Hermitian quadratic form v^* H v (real for Hermitian H).
    double quad(const std::array<Complex, 3>& v) const {
        Complex s{0, 0};
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s += std::conj(v[j]) * at(j, k) * v[k];
        return s.real();
    }
};

// Lower bound for det(M + beta I) when M >= 0, beta >= 0:
//   sum_{k=0}^{n} beta^k det(M)^{(n-k)/n},  with 0^0 = 1.
inline double det_perturb_lower_bound(int n, double det_m, double beta) {
    if (n < 1) throw HermitianError("det_perturb_lower_bound: order must be >= 1");
    if (beta < 0) throw HermitianError("det_perturb_lower_bound: beta must be >= 0");
    if (det_m < -1e-10)
        throw HermitianError("det_perturb_lower_bound: determinant of a PSD matrix cannot be "
                             + std::to_string(det_m));
    if (det_m < 0) det_m = 0;  // PSD determinant; clamp FP dust
    double sum = 0;
    for (int k = 0; k <= n; ++k) {
        double bpow = (k == 0) ? 1.0 : std::pow(beta, k);
        double e = static_cast<double>(n - k) / n;
        double dpow = (n - k == 0) ? 1.0 : std::pow(det_m, e);
        sum += bpow * dpow;
    }
    return sum;
}

}  // namespace cma
