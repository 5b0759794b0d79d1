#pragma once

// Randomized stress suite for the determinant perturbation bound
//   det(M + beta I) >= sum_{k=0}^n beta^k (det M)^{(n-k)/n},  M PSD, beta >= 0,
// shared by the `lemmas` subcommand, the acceptance runner, and the unit
// tests.  Matrices are drawn as G G^* from a counter-based splitmix64 stream,
// so the suite is reproducible for a given seed.

#include <cstdint>
#include <limits>
#include <vector>

#include "hermitian.hpp"
#include "sampling.hpp"

namespace cma {

struct DetPerturbRow {
    int n = 0;
    long trials = 0;
    // min over trials of (det(M+bI) - bound) / (1 + |det(M+bI)|)
    double worst_rel_slack = std::numeric_limits<double>::infinity();
    double worst_beta = 0;
    double worst_det = 0;
    // max |det(M+bI) - bound| over the forced M = 0 draws
    double max_equality_gap = 0;
    long equality_trials = 0;
};

struct DetPerturbSuite {
    std::vector<DetPerturbRow> rows;
    long total_trials = 0;

    bool pass(double tol = 1e-9) const {
        for (const auto& r : rows)
            if (!(r.worst_rel_slack >= -tol) || !(r.max_equality_gap <= tol)) return false;
        return !rows.empty();
    }
};

inline DetPerturbSuite run_det_perturb_suite(long trials_per_order,
                                             std::uint64_t seed = global_seed()) {
    DetPerturbSuite suite;
    for (int n = 1; n <= 3; ++n) {
        DetPerturbRow row;
        row.n = n;
        std::uint64_t state = detail::splitmix64(seed ^ (0x4c656d6d61ULL + n));
        auto u01 = [&] {
            state = detail::splitmix64(state);
            return static_cast<double>(state >> 11) * 0x1.0p-53;
        };
        for (long t = 0; t < trials_per_order; ++t) {
            HermitianForm m(n);
            bool force_zero = (t % 5 == 0);
            if (!force_zero) {
                HermitianForm gmat(n);
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        gmat.at(j, k) = Complex{2 * u01() - 1, 2 * u01() - 1};
                // M = s G G^*, with s spread over four decades to cover both
                // the near-degenerate and the dominant-determinant regimes.
                double s = std::pow(10.0, 4 * u01() - 2);
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        Complex acc{0, 0};
                        for (int l = 0; l < n; ++l)
                            acc += gmat.at(j, l) * std::conj(gmat.at(k, l));
                        m.at(j, k) = s * acc;
                    }
                m.symmetrize();
            }
            double beta = (t % 7 == 0) ? 0.0 : 10.0 * u01();
            double lhs = m.shifted(beta).det();
            double bound = det_perturb_lower_bound(n, m.det(), beta);
            double slack = (lhs - bound) / (1.0 + std::fabs(lhs));
            if (slack < row.worst_rel_slack) {
                row.worst_rel_slack = slack;
                row.worst_beta = beta;
                row.worst_det = m.det();
            }
            if (force_zero) {
                row.max_equality_gap = std::max(row.max_equality_gap, std::fabs(lhs - bound));
                ++row.equality_trials;
            }
            ++row.trials;
        }
        suite.total_trials += row.trials;
        suite.rows.push_back(row);
    }
    return suite;
}

}  // namespace cma
