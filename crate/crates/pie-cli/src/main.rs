//! `piecert` — declare delayed PDE/ODE systems, convert them to their
//! mass-matrix (integral) form, certify exponential stability, export the
//! underlying semidefinite feasibility problem, simulate, and run the
//! self-test oracle suites.
//!
//! Exit codes: 0 success/certified, 2 no certificate, 3 ill-posed input,
//! 4 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use pie_core::converters::{dde_dpde_to_pie, dde_to_pie, dpde_to_pie};
use pie_core::lpi_stability::{
    auto_assembler, certify, CertifyConfig, CertifyOutcome, StabilityCertificate,
};
use pie_core::pde_models::{
    coupled_to_dde_dpde, dde_dpde_example, heat_example, rewrite_boundary_delay,
    wave_example, Dde, DdeDelay, Dpde2,
};
use pie_core::pie_system::PieSystem;
use pie_core::polykernel::{Domain, Poly, PolyMatrix, Var};
use pie_core::sdp_backend::export_sdpa;
use pie_core::simulator::{pie_initial_from_primary, simulate_dpde, SimConfig};

const EXIT_NO_CERTIFICATE: u8 = 2;
const EXIT_ILL_POSED: u8 = 3;
const EXIT_SOLVER_FAILURE: u8 = 4;

#[derive(Parser)]
#[command(name = "piecert", version, about = "Stability certification for delayed PDE systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a system declaration to its mass-matrix form (JSON out).
    Convert {
        /// Declaration file (JSON).
        decl: PathBuf,
        /// Output path (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Certify exponential stability and emit a certificate report.
    Analyze {
        decl: PathBuf,
        #[command(flatten)]
        opts: AnalyzeOpts,
        /// Write the full certificate report (JSON) here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Export the feasibility problem at a fixed decay rate in SDPA format.
    ExportSdp {
        decl: PathBuf,
        /// Decay rate α at which to assemble the problem.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Cone degree.
        #[arg(long, default_value_t = 1)]
        degree: u32,
        /// Strict-positivity shift ε.
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Output path.
        path: PathBuf,
    },
    /// Integrate the system numerically and emit a CSV norm trace.
    Simulate {
        decl: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Output CSV path (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle suites.
    Selftest {
        /// One of: algebra, tmap, interconnect, replay, all.
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Args)]
struct AnalyzeOpts {
    /// Strict-positivity shift ε.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Cone degree for the candidate operator.
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Upper end of the decay-rate bisection.
    #[arg(long, default_value_t = 10.0)]
    alpha_max: f64,
    /// Rescale the spatial domain to [0, 1] before analysis (constant
    /// coefficients only).
    #[arg(long)]
    scale_domain: bool,
}

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

/// A matrix entry: either a constant or a polynomial in `x` given by its
/// coefficients in ascending powers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Poly {
        coeffs: Vec<f64>,
        #[serde(default)]
        vars: Vec<String>,
    },
}

impl Entry {
    fn to_poly(&self) -> Result<Poly, String> {
        match self {
            Entry::Num(v) => Ok(Poly::constant(*v)),
            Entry::Poly { coeffs, vars } => {
                if !vars.is_empty() && vars != &["x".to_string()] {
                    return Err(format!("unsupported polynomial variables {vars:?} (only \"x\")"));
                }
                let mut p = Poly::constant(0.0);
                for (k, c) in coeffs.iter().enumerate() {
                    p = p.add(&Poly::monomial(Var::X, k as u32, *c));
                }
                Ok(p)
            }
        }
    }
}

fn entry_matrix(
    rows: usize,
    cols: usize,
    data: &[Vec<Entry>],
    domain: Domain,
    what: &str,
) -> Result<PolyMatrix, String> {
    if data.len() != rows || data.iter().any(|r| r.len() != cols) {
        return Err(format!("{what}: expected a {rows}x{cols} matrix"));
    }
    let mut m = PolyMatrix::zeros(rows, cols, domain);
    for (i, row) in data.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m.set(i, j, e.to_poly().map_err(|err| format!("{what}[{i}][{j}]: {err}"))?);
        }
    }
    Ok(m)
}

/// Top-level system declaration. Explicit matrices are supported for the
/// `dpde2` and `dde` kinds; the coupled and boundary-delay kinds are declared
/// through named presets with parameters.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Declaration {
    Dpde2(Dpde2Decl),
    Dde(DdeDecl),
    Coupled(CoupledDecl),
    BoundaryDelay(BoundaryDecl),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Dpde2Decl {
    Preset {
        preset: String,
        #[serde(default = "one")]
        r: f64,
        tau: f64,
    },
    Explicit {
        n: usize,
        domain: [f64; 2],
        tau: f64,
        a: Vec<Vec<Entry>>,
        a_d: Vec<Vec<Entry>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        initial: Option<Vec<Vec<Entry>>>,
    },
}

#[derive(Debug, Deserialize)]
struct DdeDecl {
    n: usize,
    a: Vec<Vec<f64>>,
    delays: Vec<DdeDelayDecl>,
}

#[derive(Debug, Deserialize)]
struct DdeDelayDecl {
    tau: f64,
    a_j: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct CoupledDecl {
    preset: String,
    tau: f64,
}

#[derive(Debug, Deserialize)]
struct BoundaryDecl {
    preset: String,
    mu: f64,
    tau: f64,
}

fn one() -> f64 {
    1.0
}

/// A declaration resolved to model objects, keeping the pieces each command
/// needs (the original delayed PDE for direct simulation, the mass-matrix
/// system for everything else).
struct Resolved {
    label: String,
    pie: PieSystem,
    dpde: Option<Dpde2>,
    initial: Option<PolyMatrix>,
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn resolve(decl: &Declaration, scale_domain: bool) -> Result<Resolved, String> {
    match decl {
        Declaration::Dpde2(d) => {
            let (mut sys, initial) = match d {
                Dpde2Decl::Preset { preset, r, tau } => match preset.as_str() {
                    "delayed-reaction-diffusion" => (heat_example(*r, *tau), None),
                    other => return Err(format!("unknown dpde2 preset {other:?}")),
                },
                Dpde2Decl::Explicit { n, domain, tau, a, a_d, b, initial } => {
                    let dom = if domain[0] < domain[1] {
                        Domain::new(domain[0], domain[1])
                    } else {
                        return Err(format!("domain must satisfy a < b, got {domain:?}"));
                    };
                    let sys = Dpde2 {
                        n: *n,
                        domain: dom,
                        a: entry_matrix(*n, 3 * n, a, dom, "interior coefficients")?,
                        a_d: entry_matrix(*n, 3 * n, a_d, dom, "delayed coefficients")?,
                        b: b.clone(),
                        tau: *tau,
                    };
                    let init = initial
                        .as_ref()
                        .map(|u0| entry_matrix(*n, 1, u0, dom, "initial state"))
                        .transpose()?;
                    (sys, init)
                }
            };
            if scale_domain {
                sys = scale_dpde2(&sys)?;
            }
            sys.validate().map_err(|e| e.to_string())?;
            let s = dpde_to_pie(&sys).map_err(|e| e.to_string())?;
            Ok(Resolved {
                label: format!("delayed PDE, {} states, τ = {}", sys.n, sys.tau),
                pie: PieSystem::autonomous(s.t.clone(), s.a.clone()),
                dpde: Some(sys),
                initial,
            })
        }
        Declaration::Dde(d) => {
            let mut sys = Dde::zero(d.n, 0, 0);
            if d.a.len() != d.n || d.a.iter().any(|r| r.len() != d.n) {
                return Err(format!("dynamics matrix must be {0}x{0}", d.n));
            }
            sys.a = d.a.clone();
            for dd in &d.delays {
                sys.delays.push(DdeDelay {
                    tau: dd.tau,
                    a_j: dd.a_j.clone(),
                    c_zj: vec![vec![0.0; d.n]; 0],
                });
            }
            sys.n_z = 0;
            sys.validate().map_err(|e| e.to_string())?;
            let s = dde_to_pie(&sys).map_err(|e| e.to_string())?;
            Ok(Resolved {
                label: format!("DDE, {} states, {} delays", d.n, d.delays.len()),
                pie: PieSystem::autonomous(s.t.clone(), s.a.clone()),
                dpde: None,
                initial: None,
            })
        }
        Declaration::Coupled(d) => {
            let pair = match d.preset.as_str() {
                "reaction-diffusion-boundary-feedback" => dde_dpde_example(d.tau),
                other => return Err(format!("unknown coupled preset {other:?}")),
            };
            let g = dde_dpde_to_pie(&pair).map_err(|e| e.to_string())?;
            Ok(Resolved {
                label: format!("coupled DDE–PDE preset {:?}, τ = {}", d.preset, d.tau),
                pie: g,
                dpde: None,
                initial: None,
            })
        }
        Declaration::BoundaryDelay(d) => {
            let sys = match d.preset.as_str() {
                "damped-wave" => wave_example(d.mu, d.tau),
                other => return Err(format!("unknown boundary_delay preset {other:?}")),
            };
            let exp = rewrite_boundary_delay(&sys).map_err(|e| e.to_string())?;
            let pair = coupled_to_dde_dpde(&exp.one_d).map_err(|e| e.to_string())?;
            let g = dde_dpde_to_pie(&pair).map_err(|e| e.to_string())?;
            Ok(Resolved {
                label: format!(
                    "boundary-delay preset {:?}, μ = {}, τ = {}",
                    d.preset, d.mu, d.tau
                ),
                pie: g,
                dpde: None,
                initial: None,
            })
        }
    }
}

/// Rescale a delayed PDE with constant coefficients from `[a, b]` to `[0, 1]`:
/// derivatives pick up powers of the domain length.
fn scale_dpde2(sys: &Dpde2) -> Result<Dpde2, String> {
    let l = sys.domain.len();
    let unit = Domain::new(0.0, 1.0);
    let rescale = |src: &PolyMatrix, what: &str| -> Result<PolyMatrix, String> {
        let mut m = PolyMatrix::zeros(sys.n, 3 * sys.n, unit);
        for i in 0..sys.n {
            for j in 0..3 * sys.n {
                let p = src.get(i, j);
                if p.diff(Var::X).terms().next().is_some() {
                    return Err(format!(
                        "--scale-domain requires constant {what} (entry [{i}][{j}] depends on x)"
                    ));
                }
                let mut pt = [0.0; pie_core::polykernel::NVARS];
                pt[0] = sys.domain.a;
                let v = p.eval(&pt);
                let factor = match j / sys.n {
                    0 => 1.0,
                    1 => 1.0 / l,
                    _ => 1.0 / (l * l),
                };
                m.set(i, j, Poly::constant(v * factor));
            }
        }
        Ok(m)
    };
    let a = rescale(&sys.a, "interior coefficients")?;
    let a_d = rescale(&sys.a_d, "delayed coefficients")?;
    let mut b = sys.b.clone();
    for row in &mut b {
        for li in 0..sys.n {
            row[sys.n + li] /= l;
            row[3 * sys.n + li] /= l;
        }
    }
    Ok(Dpde2 { n: sys.n, domain: unit, a, a_d, b, tau: sys.tau })
}

fn load_declaration(path: &PathBuf) -> Result<Declaration, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid declaration: {e}"))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Report<'a> {
    system: &'a str,
    eps: f64,
    degree: u32,
    degree_rhs_x: u32,
    degree_rhs_s: u32,
    alpha: f64,
    beta: f64,
    zeta: f64,
    lpi_residual: f64,
    m1_eig_floor: f64,
    m2_eig_floor: f64,
    solver_iterations: usize,
    bisection: &'a [(f64, bool)],
    certificate: &'a StabilityCertificate,
}

fn cmd_analyze(decl_path: &PathBuf, opts: &AnalyzeOpts, out: Option<&PathBuf>) -> ExitCode {
    let decl = match load_declaration(decl_path) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let resolved = match resolve(&decl, opts.scale_domain) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let cfg = CertifyConfig {
        eps: opts.eps,
        degree: opts.degree,
        alpha_max: opts.alpha_max,
        ..CertifyConfig::default()
    };
    println!("system: {}", resolved.label);
    match certify(&resolved.pie, &cfg) {
        Ok(CertifyOutcome::Certified(cert)) => {
            println!("certified decay rate α = {:.6}", cert.alpha);
            println!(
                "  ε = {:.1e}, cone degree {}, right-hand degrees ({}, {})",
                cert.eps, cert.degree, cert.degree_rhs_x, cert.degree_rhs_s
            );
            println!("  transient bound β = {:.4} (ζ = {:.4})", cert.beta, cert.zeta);
            println!(
                "  replay: residual {:.3e}, witness floors {:.3e} / {:.3e}, {} solver iterations",
                cert.lpi_residual, cert.m1_eig_floor, cert.m2_eig_floor, cert.solver_iterations
            );
            println!("  bisection history:");
            for (a, ok) in &cert.bisection {
                println!("    α = {a:.6}: {}", if *ok { "feasible" } else { "infeasible" });
            }
            if let Some(path) = out {
                let report = Report {
                    system: &resolved.label,
                    eps: cert.eps,
                    degree: cert.degree,
                    degree_rhs_x: cert.degree_rhs_x,
                    degree_rhs_s: cert.degree_rhs_s,
                    alpha: cert.alpha,
                    beta: cert.beta,
                    zeta: cert.zeta,
                    lpi_residual: cert.lpi_residual,
                    m1_eig_floor: cert.m1_eig_floor,
                    m2_eig_floor: cert.m2_eig_floor,
                    solver_iterations: cert.solver_iterations,
                    bisection: &cert.bisection,
                    certificate: &cert,
                };
                if let Err(e) = std::fs::write(
                    path,
                    serde_json::to_string_pretty(&report).expect("report serializes"),
                ) {
                    return fail(EXIT_SOLVER_FAILURE, &format!("cannot write report: {e}"));
                }
                println!("report written to {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Ok(CertifyOutcome::NoCertificate { probes }) => {
            println!("no certificate found (not a proof of instability); probe history:");
            for (a, ok) in &probes {
                println!("  α = {a:.6}: {}", if *ok { "feasible" } else { "infeasible" });
            }
            ExitCode::from(EXIT_NO_CERTIFICATE)
        }
        Err(e) => fail(EXIT_SOLVER_FAILURE, &format!("certification failed: {e}")),
    }
}

fn cmd_convert(decl_path: &PathBuf, out: Option<&PathBuf>) -> ExitCode {
    let decl = match load_declaration(decl_path) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let resolved = match resolve(&decl, false) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let json = serde_json::to_string_pretty(&resolved.pie).expect("system serializes");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                return fail(EXIT_SOLVER_FAILURE, &format!("cannot write output: {e}"));
            }
            println!("mass-matrix system written to {}", path.display());
            ExitCode::SUCCESS
        }
        None => {
            println!("{json}");
            ExitCode::SUCCESS
        }
    }
}

fn cmd_export_sdp(
    decl_path: &PathBuf,
    alpha: f64,
    degree: u32,
    eps: f64,
    path: &PathBuf,
) -> ExitCode {
    let decl = match load_declaration(decl_path) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let resolved = match resolve(&decl, false) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let asm = match auto_assembler(&resolved.pie, eps, degree) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_SOLVER_FAILURE, &format!("assembly failed: {e}")),
    };
    let rp = match asm.problem_at(alpha) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_SOLVER_FAILURE, &format!("assembly failed: {e}")),
    };
    match export_sdpa(&rp.problem, path) {
        Ok(()) => {
            println!(
                "feasibility problem at α = {alpha} written to {} ({} constraints)",
                path.display(),
                rp.problem.constraints.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_SOLVER_FAILURE, &format!("export failed: {e}")),
    }
}

fn cmd_simulate(decl_path: &PathBuf, t_end: f64, dt: f64, out: Option<&PathBuf>) -> ExitCode {
    let decl = match load_declaration(decl_path) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let resolved = match resolve(&decl, false) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_ILL_POSED, &e),
    };
    let cfg = SimConfig { dt, t_end, ..SimConfig::default() };
    let trace = if let Some(sys) = &resolved.dpde {
        // Direct method-of-lines run on the declared PDE.
        let u0 = match &resolved.initial {
            Some(u0) => u0.clone(),
            None => default_initial(sys),
        };
        match simulate_dpde(sys, &u0, &cfg) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_SOLVER_FAILURE, &format!("simulation failed: {e}")),
        }
    } else {
        // Mass-matrix integration from a generic smooth initial profile.
        let g = &resolved.pie;
        let z = pie_core::selftest::rand_state(
            &mut pie_core::selftest::Rng64::new(42),
            &g.vs,
            2,
        );
        let v0 = match pie_initial_from_primary(g, &z, 6) {
            Ok(v) => v,
            Err(e) => return fail(EXIT_SOLVER_FAILURE, &format!("initial data failed: {e}")),
        };
        match pie_core::simulator::simulate_pie(g, &v0, &cfg) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_SOLVER_FAILURE, &format!("simulation failed: {e}")),
        }
    };
    println!(
        "simulated {} over horizon {t_end}; fitted decay rate {:.4}",
        resolved.label, trace.decay_rate
    );
    let csv = trace.to_csv();
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, csv) {
                return fail(EXIT_SOLVER_FAILURE, &format!("cannot write trace: {e}"));
            }
            println!("trace written to {}", path.display());
            ExitCode::SUCCESS
        }
        None => {
            print!("{csv}");
            ExitCode::SUCCESS
        }
    }
}

/// Smooth default initial profile `(x−a)(b−x)` per state (satisfies zero
/// boundary values; other boundary conditions are approximated for smoke
/// runs).
fn default_initial(sys: &Dpde2) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(sys.n, 1, sys.domain);
    let x = Poly::monomial(Var::X, 1, 1.0);
    let p = x
        .add(&Poly::constant(-sys.domain.a))
        .mul(&Poly::constant(sys.domain.b).add(&x.scale(-1.0)), 24)
        .expect("degree within cap");
    for k in 0..sys.n {
        m.set(k, 0, p.clone());
    }
    m
}

fn cmd_selftest(suite: &str) -> ExitCode {
    use pie_core::selftest::{algebra_suite, interconnect_suite, replay_suite, tmap_suite};
    let run = |name: &str, r: Result<(), String>| -> bool {
        match r {
            Ok(()) => {
                println!("suite {name}: pass");
                true
            }
            Err(e) => {
                println!("suite {name}: FAIL — {e}");
                false
            }
        }
    };
    let mut ok = true;
    let all = suite == "all";
    if all || suite == "algebra" {
        ok &= run("algebra", algebra_suite(300, 1e-7));
    }
    if all || suite == "tmap" {
        ok &= run("tmap", tmap_suite(25));
    }
    if all || suite == "interconnect" {
        ok &= run("interconnect", interconnect_suite(10));
    }
    if all || suite == "replay" {
        ok &= run("replay", replay_suite());
    }
    if !all && !["algebra", "tmap", "interconnect", "replay"].contains(&suite) {
        return fail(EXIT_ILL_POSED, &format!("unknown suite {suite:?}"));
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER_FAILURE)
    }
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Convert { decl, out } => cmd_convert(&decl, out.as_ref()),
        Cmd::Analyze { decl, opts, out } => cmd_analyze(&decl, &opts, out.as_ref()),
        Cmd::ExportSdp { decl, alpha, degree, eps, path } => {
            cmd_export_sdp(&decl, alpha, degree, eps, &path)
        }
        Cmd::Simulate { decl, t_end, dt, out } => cmd_simulate(&decl, t_end, dt, out.as_ref()),
        Cmd::Selftest { suite } => cmd_selftest(&suite),
    }
}
