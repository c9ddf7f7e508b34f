//! End-to-end acceptance checks: oracle suites, benchmark stability
//! certifications with independent replay, simulation cross-checks, and the
//! SDPA interchange round trip. Each test prints one `pass` line; failures
//! panic with a matching `fail:` message.
//!
//! The tests share expensive artifacts (the delayed reaction–diffusion
//! certification) through lazily initialized statics; the harness runs them
//! single-threaded per process core, in name order.

use std::sync::OnceLock;
use std::time::Instant;

use pie_core::converters::{dde_dpde_to_pie, dpde_to_pie};
use pie_core::lpi_stability::{
    auto_assembler, expand_witness, replay_residual, LpiAssembler, LpiError,
};
use pie_core::pde_models::{
    coupled_to_dde_dpde, dde_dpde_example, heat_example, rewrite_boundary_delay, wave_example,
};
use pie_core::pi_algebra::ZFunction;
use pie_core::pie_system::PieSystem;
use pie_core::polykernel::{Poly, PolyMatrix, Var};
use pie_core::sdp_backend::{export_sdpa, import_sdpa, solve, SdpProblem, SdpResult, SdpStatus};
use pie_core::selftest;
use pie_core::simulator::{
    pie_initial_from_primary, simulate_dpde, simulate_pie, SimConfig, SimError,
};

/// One feasible stability probe: rate `alpha` certified with cone degree `d`.
struct Probe {
    alpha: f64,
    d: u32,
    m1: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    problem: SdpProblem,
    result: SdpResult,
    asm: LpiAssembler,
    solve_secs: f64,
}

/// Try degrees `1..=d_max` until the feasibility SDP at rate `alpha` has a
/// witness; returns the first success.
fn probe_feasible(g: &PieSystem, eps: f64, d_max: u32, alpha: f64) -> Result<Probe, String> {
    let mut last = String::from("no degree attempted");
    for d in 1..=d_max {
        let asm = match auto_assembler(g, eps, d) {
            Ok(a) => a,
            Err(e) => {
                last = format!("degree {d}: assembler: {e}");
                continue;
            }
        };
        let rp = match asm.problem_at(alpha) {
            Ok(rp) => rp,
            Err(LpiError::DegreeInsufficient { location, tried }) => {
                last = format!("degree {d}: coverage failure at {location} (degree {tried})");
                continue;
            }
            Err(e) => return Err(format!("degree {d}: {e}")),
        };
        let t = Instant::now();
        let r = solve(&rp.problem, 1e-8).map_err(|e| format!("degree {d}: solver: {e}"))?;
        let solve_secs = t.elapsed().as_secs_f64();
        if r.status == SdpStatus::Feasible {
            let m1 = expand_witness(&r.block_values[0], &rp.keep1, asm.p1.dim());
            let m2 = expand_witness(&r.block_values[1], &rp.keep2, asm.p2.dim());
            return Ok(Probe {
                alpha,
                d,
                m1,
                m2,
                problem: rp.problem,
                result: r,
                asm,
                solve_secs,
            });
        }
        last = format!("degree {d}: {:?} after {solve_secs:.1}s", r.status);
    }
    Err(last)
}

/// Status of the feasibility SDP at rate `alpha` for one fixed degree.
fn probe_status(g: &PieSystem, eps: f64, d: u32, alpha: f64) -> Result<(SdpStatus, f64), String> {
    let asm = auto_assembler(g, eps, d).map_err(|e| format!("assembler: {e}"))?;
    let rp = match asm.problem_at(alpha) {
        Ok(rp) => rp,
        Err(LpiError::DegreeInsufficient { .. }) => return Ok((SdpStatus::Unknown, 0.0)),
        Err(e) => return Err(e.to_string()),
    };
    let t = Instant::now();
    let r = solve(&rp.problem, 1e-8).map_err(|e| format!("solver: {e}"))?;
    Ok((r.status, t.elapsed().as_secs_f64()))
}

/// Independent certificate replay: recompose `P`, replay the operator
/// equality coefficient-by-coefficient, and check the Gram eigenvalue floors.
fn replay(g: &PieSystem, p: &Probe, label: &str) {
    let (resid, f1, f2) =
        replay_residual(g, &p.asm, p.alpha, &p.m1, &p.m2).expect("replay must assemble");
    assert!(
        resid < 1e-7,
        "certificate replay fail for {label}: operator residual {resid:.3e} >= 1e-7"
    );
    assert!(
        f1 >= -1e-8 && f2 >= -1e-8,
        "certificate replay fail for {label}: eigenvalue floors {f1:.3e}/{f2:.3e} < -1e-8"
    );
}

fn heat_pie(tau: f64) -> PieSystem {
    let s = dpde_to_pie(&heat_example(1.9, tau)).expect("heat conversion");
    PieSystem::autonomous(s.t.clone(), s.a.clone())
}

fn wave_pie(mu: f64, tau: f64) -> PieSystem {
    let exp = rewrite_boundary_delay(&wave_example(mu, tau)).expect("boundary rewrite");
    let pair = coupled_to_dde_dpde(&exp.one_d).expect("coupled split");
    dde_dpde_to_pie(&pair).expect("wave conversion")
}

fn coupled_pie(tau: f64) -> PieSystem {
    dde_dpde_to_pie(&dde_dpde_example(tau)).expect("coupled conversion")
}

/// Delayed reaction–diffusion benchmark rows: `(τ, reported decay rate)`.
/// The gate certifies 90% of each reported rate.
const HEAT_ROWS: &[(f64, f64)] = &[
    (0.1, 0.1112),
    (0.3, 0.1442),
    (0.5, 0.1386),
    (0.7, 0.0953),
    (0.8, 0.0842),
    (0.9, 0.0532),
    (1.0, 0.0312),
];

/// Shared certification of the τ = 0.5 benchmark row (used again by the
/// simulation cross-check and the SDPA round trip).
fn heat_05() -> &'static (PieSystem, Probe) {
    static CACHE: OnceLock<(PieSystem, Probe)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let g = heat_pie(0.5);
        let target = 0.9 * 0.1386;
        let p = probe_feasible(&g, 1e-2, 4, target).expect("τ=0.5 benchmark row must certify");
        (g, p)
    })
}

#[test]
fn a01_operator_algebra_oracle() {
    let t = Instant::now();
    selftest::algebra_suite(300, 1e-7)
        .unwrap_or_else(|e| panic!("acceptance 01 operator-algebra oracle: fail: {e}"));
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 60.0, "acceptance 01 operator-algebra oracle: fail: took {secs:.1}s >= 60s");
    println!("acceptance 01 operator-algebra oracle: pass ({secs:.1}s, 300 cases)");
}

#[test]
fn a02_reconstruction_map_identities() {
    let t = Instant::now();
    selftest::tmap_suite(25)
        .unwrap_or_else(|e| panic!("acceptance 02 reconstruction-map identities: fail: {e}"));
    let secs = t.elapsed().as_secs_f64();
    assert!(
        secs < 30.0,
        "acceptance 02 reconstruction-map identities: fail: took {secs:.1}s >= 30s"
    );
    println!("acceptance 02 reconstruction-map identities: pass ({secs:.1}s, 25 systems)");
}

#[test]
fn a03_dual_construction_consistency() {
    let t = Instant::now();
    selftest::interconnect_suite(10)
        .unwrap_or_else(|e| panic!("acceptance 03 dual construction: fail: {e}"));
    println!(
        "acceptance 03 dual construction: pass ({:.1}s, benchmark + 10 random systems)",
        t.elapsed().as_secs_f64()
    );
}

#[test]
fn a04_delayed_reaction_diffusion_benchmark() {
    let mut lines = Vec::new();
    for &(tau, rate) in HEAT_ROWS {
        let target = 0.9 * rate;
        let (g, p);
        let pref;
        if tau == 0.5 {
            let c = heat_05();
            pref = c;
            g = &pref.0;
            p = &pref.1;
        } else {
            let gg = heat_pie(tau);
            let pp = probe_feasible(&gg, 1e-2, 4, target).unwrap_or_else(|e| {
                panic!("acceptance 04 benchmark rates: fail: τ={tau}, α={target:.4}: {e}")
            });
            let leaked: &'static (PieSystem, Probe) = Box::leak(Box::new((gg, pp)));
            g = &leaked.0;
            p = &leaked.1;
        }
        assert!(
            p.solve_secs < 120.0,
            "acceptance 04 benchmark rates: fail: τ={tau} probe took {:.1}s >= 120s",
            p.solve_secs
        );
        replay(g, p, &format!("τ={tau}"));
        lines.push(format!("τ={tau}: α={:.4} (degree {}, {:.1}s)", p.alpha, p.d, p.solve_secs));
    }
    println!("acceptance 04 benchmark decay rates: pass [{}]", lines.join("; "));
}

#[test]
fn a05_critical_delay_frontier() {
    let g_ok = heat_pie(1.03);
    let p = probe_feasible(&g_ok, 1e-2, 4, 0.0)
        .unwrap_or_else(|e| panic!("acceptance 05 critical delay: fail: τ=1.03: {e}"));
    replay(&g_ok, &p, "τ=1.03");
    let g_bad = heat_pie(1.10);
    let mut notes = Vec::new();
    for d in 1..=3u32 {
        let (st, secs) = probe_status(&g_bad, 1e-2, d, 0.0)
            .unwrap_or_else(|e| panic!("acceptance 05 critical delay: fail: τ=1.10 d={d}: {e}"));
        assert!(
            st != SdpStatus::Feasible,
            "acceptance 05 critical delay: fail: τ=1.10 unexpectedly certified at degree {d}"
        );
        notes.push(format!("d={d}: {st:?} ({secs:.1}s)"));
    }
    println!(
        "acceptance 05 critical delay: pass [τ=1.03 certified (degree {}, {:.1}s); τ=1.10 no certificate: {}]",
        p.d,
        p.solve_secs,
        notes.join(", ")
    );
}

#[test]
fn a06_boundary_delay_wave() {
    let g_ok = wave_pie(0.45, 1.0);
    let p = probe_feasible(&g_ok, 1e-3, 3, 0.0)
        .unwrap_or_else(|e| panic!("acceptance 06 boundary-delay wave: fail: μ=0.45: {e}"));
    replay(&g_ok, &p, "μ=0.45");
    let g_bad = wave_pie(0.55, 1.0);
    let mut notes = Vec::new();
    for d in 1..=3u32 {
        let (st, secs) = probe_status(&g_bad, 1e-3, d, 0.0).unwrap_or_else(|e| {
            panic!("acceptance 06 boundary-delay wave: fail: μ=0.55 d={d}: {e}")
        });
        assert!(
            st != SdpStatus::Feasible,
            "acceptance 06 boundary-delay wave: fail: μ=0.55 unexpectedly certified at degree {d}"
        );
        notes.push(format!("d={d}: {st:?} ({secs:.1}s)"));
    }
    println!(
        "acceptance 06 boundary-delay wave: pass [μ=0.45 certified (degree {}, {:.1}s); μ=0.55 no certificate: {}]",
        p.d,
        p.solve_secs,
        notes.join(", ")
    );
}

#[test]
fn a07_coupled_finite_distributed() {
    let g_ok = coupled_pie(0.10);
    let p = probe_feasible(&g_ok, 1e-2, 3, 0.0)
        .unwrap_or_else(|e| panic!("acceptance 07 coupled system: fail: τ=0.10: {e}"));
    replay(&g_ok, &p, "coupled τ=0.10");
    // The larger delay sits past the benchmark's stable range; the outcome is
    // recorded without gating it.
    let g_b = coupled_pie(0.20);
    let rec = match probe_status(&g_b, 1e-2, 2, 0.0) {
        Ok((st, secs)) => format!("{st:?} ({secs:.1}s)"),
        Err(e) => format!("error: {e}"),
    };
    println!(
        "acceptance 07 coupled system: pass [τ=0.10 certified (degree {}, {:.1}s); τ=0.20 recorded: {}]",
        p.d, p.solve_secs, rec
    );
}

#[test]
fn a08_certificate_replay() {
    // Replays run inline where each certificate is produced (tests 04–07);
    // this check replays the shared benchmark row once more end to end.
    let (g, p) = heat_05();
    replay(g, p, "τ=0.5 (standalone)");
    println!("acceptance 08 certificate replay: pass (operator residual < 1e-7, floors >= -1e-8)");
}

/// Initial profile `x·(b−x)` per state, satisfying the benchmark's boundary
/// conditions; also used as the constant history.
fn heat_initial() -> PolyMatrix {
    let sys = heat_example(1.9, 0.5);
    let p = Poly::monomial(Var::X, 1, sys.domain.b).add(&Poly::monomial(Var::X, 2, -1.0));
    let mut m = PolyMatrix::zeros(1, 1, sys.domain);
    m.set(0, 0, p);
    m
}

#[test]
fn a09_simulation_cross_checks() {
    let sys = heat_example(1.9, 0.5);
    let u0 = heat_initial();
    let cfg = SimConfig { n_x: 48, n_s: 64, dt: 2e-3, t_end: 5.0 };
    let direct = simulate_dpde(&sys, &u0, &cfg).expect("collocation run");

    let (g, p) = heat_05();
    // Primary-state profile (state and constant history) lifted to the
    // fundamental side by least squares.
    let mut z = ZFunction::zero(&g.vs);
    z.set_comp(2, u0.clone());
    let mut hist = PolyMatrix::zeros(1, 1, sys.domain);
    hist.set(0, 0, u0.get(0, 0).clone());
    z.set_comp(3, hist);
    let v0 = pie_initial_from_primary(g, &z, 8).expect("fundamental initial state");
    let reform = simulate_pie(g, &v0, &cfg).expect("reformulated run");

    // The reconstructed norm ‖Tv‖ is the full mixed-space norm, matching the
    // collocation run's combined state-plus-history norm.
    let n = direct.t.len().min(reform.t.len());
    let mut worst = 0.0f64;
    for i in 0..n {
        let a = direct.combined[i];
        let b = reform.primary[i];
        let rel = (a - b).abs() / a.abs().max(1e-12);
        worst = worst.max(rel);
    }
    assert!(
        worst <= 0.01,
        "acceptance 09 simulation cross-checks: fail: trace mismatch {worst:.3e} > 1%"
    );

    // Certified rates are lower bounds on the observed decay.
    let fitted = direct.decay_rate;
    assert!(
        fitted >= 0.8 * p.alpha,
        "acceptance 09 simulation cross-checks: fail: fitted decay {fitted:.4} < 0.8·α = {:.4}",
        0.8 * p.alpha
    );

    // Past the stability frontier the collocation run must grow.
    let unstable = heat_example(1.9, 1.2);
    let growth = match simulate_dpde(&unstable, &u0, &SimConfig { t_end: 12.0, ..cfg.clone() }) {
        Err(SimError::BlowupDetected { .. }) => f64::NEG_INFINITY,
        Ok(tr) => tr.decay_rate,
        Err(e) => panic!("acceptance 09 simulation cross-checks: fail: unstable run: {e}"),
    };
    assert!(
        growth < 0.0,
        "acceptance 09 simulation cross-checks: fail: τ=1.2 run decayed (rate {growth:.4})"
    );

    println!(
        "acceptance 09 simulation cross-checks: pass [trace mismatch {:.2e}; fitted decay {fitted:.4} >= 0.8·{:.4}; τ=1.2 grows]",
        worst, p.alpha
    );
}

#[test]
fn a10_sdpa_round_trip() {
    let (_, p) = heat_05();
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("benchmark.dat-s");
    export_sdpa(&p.problem, &path).expect("export");
    let back = import_sdpa(&path).expect("import");
    let r2 = solve(&back, 1e-8).expect("solve imported");
    assert!(
        r2.status == p.result.status,
        "acceptance 10 SDPA round trip: fail: status {:?} != {:?}",
        r2.status,
        p.result.status
    );
    let dres = (r2.max_residual - p.result.max_residual).abs();
    let deig = (r2.min_eigenvalue - p.result.min_eigenvalue).abs();
    assert!(
        dres <= 1e-9 && deig <= 1e-9,
        "acceptance 10 SDPA round trip: fail: residual drift {dres:.2e} / eigenvalue drift {deig:.2e} > 1e-9"
    );
    println!(
        "acceptance 10 SDPA round trip: pass (status {:?}, residual drift {dres:.1e}, eigenvalue drift {deig:.1e})",
        r2.status
    );
}
