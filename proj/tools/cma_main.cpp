// cma — drive the Monge–Ampère laboratory from JSON configs.
//
// Subcommands: solve, check-domain, regularity, extract-rho, lemmas.
// Exit codes: 0 all checks pass, 1 a diagnostic check failed, 2 the solver
// did not converge, 3 the configuration (or an input precondition) is bad.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cma/domains.hpp"
#include "cma/expr.hpp"
#include "cma/grid.hpp"
#include "cma/lemma_suite.hpp"
#include "cma/modulus.hpp"
#include "cma/psh.hpp"
#include "cma/regularity.hpp"
#include "cma/reports.hpp"
#include "cma/solver.hpp"

namespace {

using cma::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    return cfg;
}

void reject_unknown_keys(const json& cfg) {
    static const char* known[] = {"domain",     "domain_params", "phi",     "f",
                                  "h",          "frame_radius",  "tol_res", "max_sweeps",
                                  "threads",    "order",         "outdir",  "omega",
                                  "overrides",  "zeta"};
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown config key '" + it.key() + "'");
    }
}

cma::RealFn parse_scalar_fn(const json& v, const std::string& key) {
    if (v.is_number()) {
        double c = v.get<double>();
        return [c](const cma::Point&) { return c; };
    }
    if (v.is_string()) return cma::compile_expression(v.get<std::string>());
    throw ConfigError("config key '" + key + "' must be a number or an expression string");
}

cma::Point parse_point(const json& v, const std::string& key) {
    if (!v.is_array() || v.size() > 4) throw ConfigError("'" + key + "' must be an array of at most 4 coordinates");
    cma::Point p{0, 0, 0, 0};
    for (std::size_t d = 0; d < v.size(); ++d) p[d] = v[d].get<double>();
    return p;
}

struct Setup {
    cma::DomainDef dom;
    cma::GridPtr grid;
    std::optional<cma::ScalarField> rho;  // plain-sampled candidate, if shipped
    cma::DirichletData data;              // only when the command takes phi/f
    cma::SolveConfig scfg;
    std::string outdir = ".";
    double h = 0;
};

Setup build_setup(const json& cfg, bool need_data, bool need_rho, int threads_flag,
                  const std::string& outdir_flag) {
    reject_unknown_keys(cfg);
    if (!cfg.contains("domain")) throw ConfigError("config key 'domain' is required");
    if (!cfg.contains("h")) throw ConfigError("config key 'h' is required");

    cma::DomainParams params;
    if (cfg.contains("domain_params")) {
        const json& dp = cfg["domain_params"];
        if (!dp.is_object()) throw ConfigError("'domain_params' must be an object");
        params.n = dp.value("n", params.n);
        params.radius = dp.value("radius", params.radius);
        if (dp.contains("center")) params.center = parse_point(dp["center"], "center");
        if (dp.contains("semiaxes")) {
            const json& sa = dp["semiaxes"];
            if (!sa.is_array() || sa.size() != 2) throw ConfigError("'semiaxes' must have 2 entries");
            params.semiaxes = {sa[0].get<double>(), sa[1].get<double>()};
        }
        params.egg_exponent = dp.value("egg_exponent", params.egg_exponent);
    }

    Setup s{cma::domain_by_name(cfg["domain"].get<std::string>(), params), nullptr,
            std::nullopt, {}, {}, ".", 0};
    s.h = cfg["h"].get<double>();
    s.grid = s.dom.grid(s.h);

    if (s.dom.rho) s.rho = cma::ScalarField::sample(s.grid, *s.dom.rho);
    if (need_rho && !s.rho)
        throw ConfigError("domain '" + s.dom.name +
                          "' ships no uniformly strictly psh defining candidate, which this "
                          "command needs for the sub/supersolution bracket");

    if (need_data) {
        if (!cfg.contains("phi") || !cfg.contains("f"))
            throw ConfigError("config keys 'phi' and 'f' are required");
        s.data.phi = parse_scalar_fn(cfg["phi"], "phi");
        s.data.f = parse_scalar_fn(cfg["f"], "f");
    }

    s.scfg.frame_radius = cfg.value("frame_radius", 1);
    s.scfg.tol_res = cfg.value("tol_res", 1e-6);
    s.scfg.max_sweeps = cfg.value("max_sweeps", 500);
    s.scfg.threads = threads_flag > 0 ? threads_flag : cfg.value("threads", 1);
    std::string order = cfg.value("order", "lexicographic");
    if (order == "lexicographic") s.scfg.order = cma::SweepOrder::Lexicographic;
    else if (order == "red-black") s.scfg.order = cma::SweepOrder::RedBlack;
    else throw ConfigError("'order' must be \"lexicographic\" or \"red-black\"");
    if (s.scfg.threads > 1) s.scfg.order = cma::SweepOrder::RedBlack;  // lex sweeps are serial

    s.outdir = !outdir_flag.empty() ? outdir_flag : cfg.value("outdir", ".");
    std::filesystem::create_directories(s.outdir);
    return s;
}

void write_report(const Setup& s, const std::string& file, const json& report) {
    std::ofstream out(s.outdir + "/" + file);
    out << report.dump(2) << "\n";
    if (!out) throw ConfigError("cannot write " + s.outdir + "/" + file);
}

void write_field(const Setup& s, const std::string& file, const cma::ScalarField& u) {
    std::ofstream out(s.outdir + "/" + file);
    cma::write_field_csv(out, u);
    if (!out) throw ConfigError("cannot write " + s.outdir + "/" + file);
}

// ---------------------------------------------------------------------------

int cmd_solve(const json& cfg, int threads_flag, const std::string& outdir_flag) {
    Setup s = build_setup(cfg, true, true, threads_flag, outdir_flag);
    std::ofstream rlog(s.outdir + "/residual.csv");
    s.scfg.sweep_log = &rlog;

    cma::SolveResult res = cma::solve(s.grid, s.data, *s.rho, s.scfg);
    write_field(s, "u.csv", res.u);

    json rep = cma::make_report("solve", s.dom.name);
    std::ostringstream det;
    det << "converged after " << res.sweeps << " sweep(s), last update " << res.final_update;
    cma::add_check(rep, cma::make_check("residual_below_tolerance", true, nullptr,
                                        res.final_residual, s.scfg.tol_res, det.str()));
    rep["constants"] = {{"h", s.h},
                        {"n", s.grid->n},
                        {"K_sub", res.K_sub},
                        {"K_super", res.K_super},
                        {"sweeps", res.sweeps},
                        {"final_update", res.final_update},
                        {"final_residual", res.final_residual}};
    rep["outputs"] = {{"u_csv", "u.csv"}, {"residual_csv", "residual.csv"}};
    write_report(s, "run.json", rep);
    std::printf("solve: %s converged in %d sweep(s), residual %.3g (tol %.3g)\n",
                s.dom.name.c_str(), res.sweeps, res.final_residual, s.scfg.tol_res);
    return 0;
}

int cmd_check_domain(const json& cfg, int threads_flag, const std::string& outdir_flag) {
    Setup s = build_setup(cfg, false, false, threads_flag, outdir_flag);
    const cma::GridDomain& g = *s.grid;
    json rep = cma::make_report("check-domain", s.dom.name);

    bool usp_clean = false;
    if (s.rho) {
        cma::PshReport pr = cma::uniformly_strictly_psh_report(*s.rho, 1e-8);
        usp_clean = pr.clean();
        std::ostringstream det;
        det << "min eigenvalue of H_C(rho) - I over " << pr.nodes_checked << " interior nodes; "
            << pr.violating_node_count << " violation(s)";
        cma::add_check(rep, cma::make_check("uniformly_strictly_psh", usp_clean,
                                            cma::node_coords(g, pr.worst_node),
                                            pr.worst_eigenvalue, 1e-8, det.str()));
        json viol = json::array();
        std::size_t cap = std::min<std::size_t>(pr.violating_nodes.size(), 200);
        for (std::size_t i = 0; i < cap; ++i)
            viol.push_back(cma::node_coords(g, pr.violating_nodes[i]));
        rep["outputs"]["usp_violations"] = viol;
    } else {
        cma::add_check(rep, cma::make_check(
                                "uniformly_strictly_psh", false, nullptr, 0, 0,
                                "no candidate defining function is shipped for this domain"));
    }

    // Barrier spot checks: the shipped candidate must produce a strong
    // barrier at every boundary point; we probe a config-supplied point plus
    // a deterministic spread of boundary anchors.
    std::vector<cma::Point> zetas;
    if (cfg.contains("zeta")) zetas.push_back(parse_point(cfg["zeta"], "zeta"));
    if (!g.boundary_list.empty())
        for (std::size_t frac : {0u, 1u, 2u}) {
            std::int64_t node = g.boundary_list[frac * g.boundary_list.size() / 3];
            zetas.push_back(g.anchor(node));
        }
    if (s.dom.barrier_candidate) {
        cma::ScalarField cand = cma::ScalarField::sample_anchored(s.grid, *s.dom.barrier_candidate);
        for (const cma::Point& zeta : zetas) {
            cma::ScalarField v = cma::barrier(cand, zeta);
            cma::BarrierReport br = cma::verify_barrier(v, zeta, 4 * g.h);
            json zc = json::array();
            for (int d = 0; d < g.dims; ++d) zc.push_back(zeta[d]);
            std::ostringstream det;
            det << "value " << br.value_at_zeta << " at nearest node (dist " << br.nearest_node_dist
                << "), sup away " << br.sup_away << ", min Hessian eigenvalue "
                << br.worst_eigenvalue;
            cma::add_check(rep, cma::make_check("barrier", br.pass(), zc, br.worst_eigenvalue,
                                                0, det.str()));
        }
    } else {
        cma::add_check(rep, cma::make_check("barrier", false, nullptr, 0, 0,
                                            "no barrier candidate for this domain"));
    }

    if (usp_clean) {
        cma::ScalarField psi = cma::ScalarField::sample(
            s.grid, [&](const cma::Point& p) { return -cma::norm2(p, g.dims); });
        try {
            double K = cma::find_psh_K(psi, *s.rho, 1 << 20);
            cma::add_check(rep, cma::make_check("psh_K_finder", true, nullptr, K, 0,
                                                "smallest K with -|z|^2 + K rho psh"));
            rep["constants"]["K"] = K;
        } catch (const cma::GridError& e) {
            cma::add_check(rep, cma::make_check("psh_K_finder", false, nullptr, 0, 0, e.what()));
        }
    }

    rep["constants"]["h"] = s.h;
    rep["constants"]["n"] = g.n;
    write_report(s, "domain_report.json", rep);
    bool passed = rep["passed"].get<bool>();
    std::printf("check-domain: %s %s\n", s.dom.name.c_str(), passed ? "passed" : "FAILED");
    return passed ? 0 : 1;
}

std::optional<cma::ModulusOfContinuity> parse_omega(const json& cfg) {
    if (!cfg.contains("omega")) return std::nullopt;
    std::string kind = cfg["omega"].get<std::string>();
    if (kind == "identity") return cma::identity_modulus();
    if (kind.rfind("holder:", 0) == 0) {
        double eps = std::stod(kind.substr(7));
        return cma::holder_modulus(eps);
    }
    throw ConfigError("'omega' must be \"identity\" or \"holder:<eps>\"");
}

int cmd_regularity(const json& cfg, int threads_flag, const std::string& outdir_flag) {
    Setup s = build_setup(cfg, true, true, threads_flag, outdir_flag);
    const cma::GridDomain& g = *s.grid;
    std::optional<cma::ModulusOfContinuity> omega = parse_omega(cfg);

    cma::SolveResult res = cma::solve(s.grid, s.data, *s.rho, s.scfg);
    write_field(s, "u.csv", res.u);

    json rep = cma::make_report("regularity", s.dom.name);
    rep["constants"] = {{"h", s.h}, {"n", g.n}, {"sweeps", res.sweeps},
                        {"K_sub", res.K_sub}, {"K_super", res.K_super}};

    // Empirical modulus of the computed solution (concave hull), plus the
    // Hölder exponent fit; neither needs the declared omega.
    cma::HolderFit fit = cma::holder_fit(res.u);
    rep["constants"]["holder_eps"] = fit.eps;
    rep["constants"]["holder_C"] = fit.C;
    rep["constants"]["holder_residual"] = fit.residual;
    std::vector<double> radii = cma::default_radius_grid(res.u);
    cma::ModulusOfContinuity hull =
        cma::least_concave_majorant(cma::empirical_modulus(res.u, radii));
    {
        std::ofstream mout(s.outdir + "/modulus.csv");
        cma::write_modulus_csv(mout, hull);
    }
    rep["outputs"] = {{"u_csv", "u.csv"}, {"modulus_csv", "modulus.csv"}};

    if (!omega) {
        std::fprintf(stderr,
                     "warning: regularity verification skipped: the config declares no modulus "
                     "of continuity for f (key \"omega\")\n");
        cma::add_check(rep, cma::make_check("modulus_metadata", true, nullptr, 0, 0,
                                            "skipped: no omega declared for f"));
        write_report(s, "regularity_report.json", rep);
        std::printf("regularity: %s skipped (no omega), holder eps %.4f\n", s.dom.name.c_str(),
                    fit.eps);
        return 0;
    }

    try {
        cma::RegularityConstants consts = cma::compute_constants(res, s.data, *s.rho, *omega);
        cma::add_check(rep, cma::make_check(
                                "boundary_sandwich", true, nullptr, consts.K, 0,
                                "phi + K rho <= u <= phi - K rho on the closure (slack 10h)"));

        if (cfg.contains("overrides")) {
            const json& ov = cfg["overrides"];
            if (!ov.is_object()) throw ConfigError("'overrides' must be an object");
            if (ov.contains("C_f")) {
                consts.C_f = ov["C_f"].get<double>();
                consts.Kp = 1.01 * consts.C_f * cma::detail::max_closure_norm_sq(g);
            }
        }
        rep["constants"]["K"] = consts.K;
        rep["constants"]["K1"] = consts.K1;
        rep["constants"]["Kp"] = consts.Kp;
        rep["constants"]["c_f"] = consts.c_f;
        rep["constants"]["C_f"] = consts.C_f;

        std::vector<cma::Point> taus = {{g.h, 0, 0, 0}, {-g.h, 0, 0, 0}};
        if (g.n == 2) {
            taus.push_back({0, 0, g.h, 0});
            taus.push_back({0, 0, -g.h, 0});
        }
        cma::Step3Report s3 = cma::verify_step3(res.u, s.data, *s.rho, *omega, taus, consts);
        cma::add_check(rep, cma::make_check(
                                "density_chain_coefficients", s3.coefficients_ok, nullptr,
                                consts.C_f, 0,
                                "C_f dominates (n choose k)^{1/k} A_n^{-1/n} c_f for every k"));
        for (const auto& tr : s3.taus) {
            json tc = json::array();
            for (int d = 0; d < g.dims; ++d) tc.push_back(tr.tau[d]);
            std::ostringstream det;
            det << "density_ok=" << tr.density_ok << " chain_ok=" << tr.chain_ok
                << " membership_ok=" << tr.membership_ok << " rim_ok=" << tr.rim_ok
                << "; worst density gap " << tr.worst_density_gap << ", chain gap "
                << tr.worst_chain_gap << ", rim excess " << tr.worst_rim_excess << " over "
                << tr.checked_nodes << " node(s)";
            cma::add_check(rep, cma::make_check("translation_competitor", tr.pass(), tc,
                                                tr.worst_density_gap, s3.tol, det.str()));
        }

        cma::GlobalModulusReport gm = cma::verify_global_modulus(res.u, consts, *omega);
        std::ostringstream det;
        det << "sup |u(x)-u(y)| / omega(|x-y|) over " << gm.pairs
            << " pair(s) against (K1+Kp)(1+10h)";
        cma::add_check(rep, cma::make_check("global_modulus", gm.pass, nullptr, gm.max_ratio,
                                            gm.bound, det.str()));
    } catch (const cma::GridError& e) {
        // The sandwich / step estimates are diagnostics, not plumbing: report
        // the violation and exit 1 rather than aborting.
        cma::add_check(rep, cma::make_check("regularity_pipeline", false, nullptr, 0, 0, e.what()));
    }

    write_report(s, "regularity_report.json", rep);
    bool passed = rep["passed"].get<bool>();
    std::printf("regularity: %s %s (K1 %s, holder eps %.4f)\n", s.dom.name.c_str(),
                passed ? "passed" : "FAILED",
                rep["constants"].contains("K1") ? rep["constants"]["K1"].dump().c_str() : "n/a",
                fit.eps);
    return passed ? 0 : 1;
}

int cmd_extract_rho(const json& cfg, int threads_flag, const std::string& outdir_flag) {
    Setup s = build_setup(cfg, false, true, threads_flag, outdir_flag);
    const cma::GridDomain& g = *s.grid;

    auto [rho_new, er] = cma::defining_function_from_solution(s.grid, *s.rho, s.scfg);
    write_field(s, "rho_new.csv", rho_new);

    json rep = cma::make_report("extract-rho", s.dom.name);
    cma::add_check(rep, cma::make_check("interior_negative", er.interior_negative, nullptr,
                                        er.worst_interior, 0,
                                        "max of rho_new over Interior nodes (want < 0)"));
    cma::add_check(rep, cma::make_check("boundary_zero", er.boundary_small, nullptr,
                                        er.worst_boundary, 10 * g.h,
                                        "max |rho_new| over Boundary nodes"));
    cma::add_check(rep, cma::make_check("plurisubharmonic", er.psh_ok,
                                        cma::node_coords(g, er.psh.worst_node),
                                        er.psh.worst_eigenvalue, 10 * g.h,
                                        "rho_new - |z|^2 psh on deep interior nodes"));
    rep["constants"] = {{"h", s.h}, {"n", g.n}, {"sweeps", er.sweeps}};
    rep["outputs"] = {{"rho_new_csv", "rho_new.csv"}};
    write_report(s, "rho_report.json", rep);
    bool passed = rep["passed"].get<bool>();
    std::printf("extract-rho: %s %s (worst interior %.3g, worst boundary %.3g)\n",
                s.dom.name.c_str(), passed ? "passed" : "FAILED", er.worst_interior,
                er.worst_boundary);
    return passed ? 0 : 1;
}

int cmd_lemmas(long trials) {
    cma::DetPerturbSuite suite = cma::run_det_perturb_suite(trials);
    std::printf("det(M + beta I) >= sum_k beta^k (det M)^((n-k)/n)  for PSD M, beta >= 0\n\n");
    std::printf("%-3s %8s %14s %14s\n", "n", "trials", "worst slack", "equality gap");
    for (const auto& r : suite.rows)
        std::printf("%-3d %8ld %14.3e %14.3e\n", r.n, r.trials, r.worst_rel_slack,
                    r.max_equality_gap);

    std::printf("\nspot checks (n = 2):\n");
    cma::HermitianForm id2 = cma::HermitianForm::identity(2);
    cma::HermitianForm zero2(2);
    cma::HermitianForm diag14(2);
    diag14.at(0, 0) = 1.0;
    diag14.at(1, 1) = 4.0;
    struct Row {
        const char* label;
        const cma::HermitianForm* m;
        double beta;
    } rows[] = {{"identity, beta=1", &id2, 1.0},
                {"zero,     beta=2", &zero2, 2.0},
                {"diag(1,4), beta=0", &diag14, 0.0}};
    for (const Row& r : rows) {
        double lhs = r.m->shifted(r.beta).det();
        double bound = cma::det_perturb_lower_bound(2, r.m->det(), r.beta);
        std::printf("  %-18s det(M+bI) = %g, bound = %g\n", r.label, lhs, bound);
    }

    bool ok = suite.pass();
    std::printf("\n%s (%ld trials)\n", ok ? "all inequalities hold" : "INEQUALITY VIOLATED",
                suite.total_trials);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for the Dirichlet problem of the complex "
                 "Monge-Ampere equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string outdir_flag;
    int threads_flag = 0;
    long lemma_trials = 3400;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON config file")->required();
        sub->add_option("--threads", threads_flag, "override the config's thread count");
        sub->add_option("--outdir", outdir_flag, "override the config's output directory");
    };
    CLI::App* c_solve = app.add_subcommand("solve", "solve the Dirichlet problem");
    CLI::App* c_check = app.add_subcommand("check-domain", "defining-function diagnostics");
    CLI::App* c_reg = app.add_subcommand("regularity", "modulus-of-continuity verification");
    CLI::App* c_rho = app.add_subcommand("extract-rho", "defining function from the solution");
    CLI::App* c_lem = app.add_subcommand("lemmas", "determinant inequality stress suite");
    add_common(c_solve);
    add_common(c_check);
    add_common(c_reg);
    add_common(c_rho);
    c_lem->add_option("--trials", lemma_trials, "trials per matrix order")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (c_lem->parsed()) return cmd_lemmas(lemma_trials);
        json cfg = load_config(config_path);
        if (c_solve->parsed()) return cmd_solve(cfg, threads_flag, outdir_flag);
        if (c_check->parsed()) return cmd_check_domain(cfg, threads_flag, outdir_flag);
        if (c_reg->parsed()) return cmd_regularity(cfg, threads_flag, outdir_flag);
        if (c_rho->parsed()) return cmd_extract_rho(cfg, threads_flag, outdir_flag);
    } catch (const cma::SolveError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 3;  // unreachable: require_subcommand(1)
}
