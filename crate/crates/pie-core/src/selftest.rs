//! Self-contained oracle suites: randomized cross-checks runnable both from
//! the test harness and from the command-line front end.
//!
//! Each suite returns `Ok(())` or a description of the first failure. The
//! suites deliberately avoid the code paths they validate: operator algebra
//! is checked against direct quadrature, reconstruction maps against symbolic
//! differentiation, interconnection against independent direct assembly, and
//! certificates against coefficient replay.

use crate::converters::{
    build_t1, build_t2, dpde_to_pie, pde1d_to_pie, transport2d_to_pie,
};
use crate::lpi_stability::{certify, CertifyConfig, CertifyOutcome};
use crate::pde_models::{expand_delay_dynamics, heat_example, Dpde2};
use crate::pi_algebra::{PartKind, PiOperator, ZFunction, ZSpace};
use crate::pie_system::{pie_interconnect, PieSystem};
use crate::polykernel::{Domain, Poly, PolyMatrix, Var, NVARS};

/// Minimal deterministic PRNG (xorshift64*), so the suites need no external
/// randomness source and reproduce exactly.
pub struct Rng64(u64);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64(seed.max(1))
    }

    fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in `[-1, 1]`.
    pub fn coeff(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Uniform in `[lo, hi]`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.coeff() + 1.0) * 0.5 * (hi - lo)
    }
}

/// Random polynomial over tensor monomials of the given variables, each
/// variable up to degree `deg`.
fn rand_poly(rng: &mut Rng64, vars: &[Var], deg: u32) -> Poly {
    let mut p = Poly::constant(rng.coeff());
    let mut terms = vec![Poly::constant(1.0)];
    for &v in vars {
        let mut next = Vec::new();
        for t in &terms {
            for d in 0..=deg {
                next.push(t.mul(&Poly::monomial(v, d, 1.0), 24).expect("small degree"));
            }
        }
        terms = next;
    }
    for t in terms.iter().skip(1) {
        p = p.add(&t.scale(rng.coeff()));
    }
    p
}

fn axis_vars(kind: PartKind, out: Var, int: Var) -> Vec<Var> {
    match kind {
        PartKind::Mult | PartKind::Embed => vec![out],
        PartKind::Low | PartKind::Up => vec![out, int],
        PartKind::FullInt => vec![int],
        PartKind::None => Vec::new(),
    }
}

/// Random PI operator between the given spaces with kernel degree ≤ `deg`
/// per variable, populating every admissible part of every block.
pub fn rand_operator(rng: &mut Rng64, dom: &ZSpace, cod: &ZSpace, deg: u32) -> PiOperator {
    let mut op = PiOperator::zero(dom, cod);
    for ci in 0..4 {
        for cj in 0..4 {
            let (rows, cols) = (cod.comp_dim(ci), dom.comp_dim(cj));
            if rows == 0 || cols == 0 {
                continue;
            }
            let (nx, ns) = {
                let blk = op.block(ci, cj);
                (blk.nx_parts(), blk.ns_parts())
            };
            for px in 0..nx {
                for ps in 0..ns {
                    let (xk, sk) = {
                        let blk = op.block(ci, cj);
                        (blk.x_kind(px), blk.s_kind(ps))
                    };
                    let mut vars = axis_vars(xk, Var::X, Var::Theta);
                    vars.extend(axis_vars(sk, Var::S, Var::Nu));
                    let mut m = PolyMatrix::zeros(rows, cols, dom.domain);
                    for i in 0..rows {
                        for j in 0..cols {
                            m.set(i, j, rand_poly(rng, &vars, deg));
                        }
                    }
                    op.set_part(ci, cj, px, ps, m).expect("part shape admissible");
                }
            }
        }
    }
    op
}

/// Random polynomial state in the given space (per-variable degree ≤ `deg`).
pub fn rand_state(rng: &mut Rng64, space: &ZSpace, deg: u32) -> ZFunction {
    let mut z = ZFunction::zero(space);
    for c in 0..4 {
        let dim = space.comp_dim(c);
        if dim == 0 {
            continue;
        }
        let vars: &[Var] = match c {
            0 => &[],
            1 => &[Var::S],
            2 => &[Var::X],
            _ => &[Var::S, Var::X],
        };
        let mut m = PolyMatrix::zeros(dim, 1, space.domain);
        for i in 0..dim {
            m.set(i, 0, rand_poly(rng, vars, deg));
        }
        z.set_comp(c, m);
    }
    z
}

fn rand_space(rng: &mut Rng64, dom: Domain) -> ZSpace {
    loop {
        let s = ZSpace::new(rng.below(3), rng.below(3), rng.below(3), rng.below(2), dom);
        if s.comp_dim(0) + s.comp_dim(1) + s.comp_dim(2) + s.comp_dim(3) > 0 {
            return s;
        }
    }
}

fn zfun_diff(a: &ZFunction, b: &ZFunction) -> f64 {
    (0..4).map(|c| a.comp(c).max_coeff_diff(b.comp(c))).fold(0.0, f64::max)
}

fn zfun_scale(a: &ZFunction) -> f64 {
    let mut s: f64 = 0.0;
    for c in 0..4 {
        let m = a.comp(c);
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                for t in m.get(i, j).terms() {
                    s = s.max(t.1.abs());
                }
            }
        }
    }
    s
}

/// Randomized operator-algebra suite: composition associativity at the level
/// of application, adjoint pairing under the inner product, linearity of
/// addition, and agreement of exact application with direct Gauss–Legendre
/// quadrature of the kernels.
pub fn algebra_suite(cases: usize, tol: f64) -> Result<(), String> {
    let mut rng = Rng64::new(0x5EED_0001);
    let dom = Domain::new(-0.5, 1.3);
    for case in 0..cases {
        let d1 = rand_space(&mut rng, dom);
        let d2 = rand_space(&mut rng, dom);
        let d3 = rand_space(&mut rng, dom);
        let a = rand_operator(&mut rng, &d2, &d3, 2);
        let b = rand_operator(&mut rng, &d1, &d2, 2);
        let u = rand_state(&mut rng, &d1, 3);

        let bu = b.apply(&u).map_err(|e| format!("case {case}: apply failed: {e}"))?;
        let ab = a.compose(&b).map_err(|e| format!("case {case}: compose failed: {e}"))?;
        let y_chain = a.apply(&bu).map_err(|e| format!("case {case}: {e}"))?;
        let y_comp = ab.apply(&u).map_err(|e| format!("case {case}: {e}"))?;
        let scale = 1.0 + zfun_scale(&y_chain);
        let d = zfun_diff(&y_chain, &y_comp);
        if d > tol * scale {
            return Err(format!("case {case}: compose/apply mismatch {d:.3e} (scale {scale:.3e})"));
        }

        // Quadrature oracle on the composed operator at random points.
        let s = rng.range(0.0, 1.0);
        let x = rng.range(dom.a, dom.b);
        for ci in 0..4 {
            if d3.comp_dim(ci) == 0 {
                continue;
            }
            let num = ab
                .apply_at_quadrature(&u, ci, s, x, 20)
                .map_err(|e| format!("case {case}: quadrature failed: {e}"))?;
            let mut pt = [0.0; NVARS];
            pt[0] = x;
            pt[2] = s;
            let exact = y_comp.comp(ci).eval(&pt);
            for (i, (n, e)) in num.iter().zip(&exact).enumerate() {
                if (n - e).abs() > tol * scale {
                    return Err(format!(
                        "case {case}: quadrature mismatch comp {ci} row {i}: {n:.6e} vs {e:.6e}"
                    ));
                }
            }
        }

        // Adjoint pairing ⟨v, A w⟩ = ⟨A* v, w⟩.
        let v = rand_state(&mut rng, &d3, 3);
        let lhs = v.inner(&a.apply(&bu).unwrap()).map_err(|e| format!("case {case}: {e}"))?;
        let rhs = a
            .adjoint()
            .apply(&v)
            .and_then(|av| av.inner(&bu))
            .map_err(|e| format!("case {case}: {e}"))?;
        let pair_scale = 1.0 + lhs.abs().max(rhs.abs());
        if (lhs - rhs).abs() > tol * pair_scale {
            return Err(format!("case {case}: adjoint pairing mismatch {lhs:.6e} vs {rhs:.6e}"));
        }

        // Linearity of addition.
        let a2 = rand_operator(&mut rng, &d2, &d3, 2);
        let sum = a.add(&a2).map_err(|e| format!("case {case}: {e}"))?;
        let y_sum = sum.apply(&bu).unwrap();
        let y_parts = {
            let mut y = a.apply(&bu).unwrap();
            let y2 = a2.apply(&bu).unwrap();
            for c in 0..4 {
                let m = y.comp(c).add(y2.comp(c)).unwrap();
                y.set_comp(c, m);
            }
            y
        };
        let d = zfun_diff(&y_sum, &y_parts);
        if d > tol * (1.0 + zfun_scale(&y_sum)) {
            return Err(format!("case {case}: addition linearity mismatch {d:.3e}"));
        }
    }
    Ok(())
}

/// Reconstruction-map suite: for random well-posed boundary matrices the map
/// from the second derivative back to the state inverts differentiation
/// exactly and satisfies the boundary conditions, both for the 1D map and for
/// its history-axis lift.
pub fn tmap_suite(cases: usize) -> Result<(), String> {
    let mut rng = Rng64::new(0x5EED_0002);
    let dom = Domain::new(0.0, 2.0);
    let mut done = 0;
    let mut attempts = 0;
    while done < cases {
        attempts += 1;
        if attempts > 50 * cases {
            return Err("could not sample enough well-posed boundary matrices".into());
        }
        let n = 1 + done % 3;
        let b: Vec<Vec<f64>> =
            (0..2 * n).map(|_| (0..4 * n).map(|_| rng.coeff()).collect()).collect();
        let fm = match build_t1(&b, n, dom) {
            Ok(fm) if fm.cond < 1e6 => fm,
            _ => continue,
        };
        done += 1;

        // 1D identity: u = T v ⟹ u_xx = v and B·Λu = 0 on polynomial input.
        let space = ZSpace::new(0, 0, n, 0, dom);
        let v = rand_state(&mut rng, &space, 5);
        let u = fm.t.apply(&v).map_err(|e| format!("case {done}: {e}"))?;
        let udd = u.comp(2).diff(Var::X).diff(Var::X);
        let d = udd.max_coeff_diff(v.comp(2));
        if d > 1e-10 * (1.0 + zfun_scale(&v)) {
            return Err(format!("case {done}: ∂x²∘T ≠ I, coefficient gap {d:.3e}"));
        }
        let resid = bc_residual(&b, n, u.comp(2), dom, &[0.0]);
        if resid > 1e-10 * (1.0 + zfun_scale(&u)) {
            return Err(format!("case {done}: 1D boundary residual {resid:.3e}"));
        }

        // History-axis lift: same identities pointwise in s.
        let t2 = build_t2(&fm).map_err(|e| format!("case {done}: lift failed: {e}"))?;
        let space3 = ZSpace::new(0, 0, 0, n, dom);
        let v3 = rand_state(&mut rng, &space3, 3);
        let u3 = t2.apply(&v3).map_err(|e| format!("case {done}: {e}"))?;
        let udd3 = u3.comp(3).diff(Var::X).diff(Var::X);
        let d3 = udd3.max_coeff_diff(v3.comp(3));
        if d3 > 1e-10 * (1.0 + zfun_scale(&v3)) {
            return Err(format!("case {done}: lifted ∂x²∘T ≠ I, gap {d3:.3e}"));
        }
        let resid3 = bc_residual(&b, n, u3.comp(3), dom, &[0.0, 0.37, 1.0]);
        if resid3 > 1e-10 * (1.0 + zfun_scale(&u3)) {
            return Err(format!("case {done}: lifted boundary residual {resid3:.3e}"));
        }
    }
    Ok(())
}

/// `max_r |B·[u(a); u_x(a); u(b); u_x(b)]|` of a polynomial column `u`,
/// sampled at the given `s` values.
fn bc_residual(b: &[Vec<f64>], n: usize, u: &PolyMatrix, dom: Domain, s_samples: &[f64]) -> f64 {
    let ux = u.diff(Var::X);
    let mut worst: f64 = 0.0;
    for &s in s_samples {
        let at = |m: &PolyMatrix, x: f64| -> Vec<f64> {
            let mut pt = [0.0; NVARS];
            pt[0] = x;
            pt[2] = s;
            m.eval(&pt)
        };
        let (ua, uxa) = (at(u, dom.a), at(&ux, dom.a));
        let (ub, uxb) = (at(u, dom.b), at(&ux, dom.b));
        for row in b {
            let mut r = 0.0;
            for l in 0..n {
                r += row[l] * ua[l]
                    + row[n + l] * uxa[l]
                    + row[2 * n + l] * ub[l]
                    + row[3 * n + l] * uxb[l];
            }
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Random delayed reaction–diffusion-type system with polynomial coefficients
/// and a well-posed boundary matrix.
fn rand_dpde2(rng: &mut Rng64) -> Dpde2 {
    let dom = Domain::new(0.0, 1.5);
    loop {
        let n = 1 + rng.below(2);
        let mut a = PolyMatrix::zeros(n, 3 * n, dom);
        let mut a_d = PolyMatrix::zeros(n, 3 * n, dom);
        for i in 0..n {
            for j in 0..3 * n {
                a.set(i, j, rand_poly(rng, &[Var::X], 2));
                a_d.set(i, j, rand_poly(rng, &[Var::X], 1));
            }
        }
        let b: Vec<Vec<f64>> =
            (0..2 * n).map(|_| (0..4 * n).map(|_| rng.coeff()).collect()).collect();
        let sys = Dpde2 { n, domain: dom, a, a_d, b: b.clone(), tau: rng.range(0.2, 1.0) };
        if let Ok(fm) = build_t1(&b, n, dom) {
            if fm.cond < 1e6 {
                return sys;
            }
        }
    }
}

/// Dual-construction suite: direct one-shot assembly of the delayed PDE's
/// mass-matrix form equals the feedback interconnection of the delay-free
/// interior part and the 2D transport channel, coefficient-wise.
pub fn interconnect_suite(n_random: usize) -> Result<(), String> {
    let mut rng = Rng64::new(0x5EED_0003);
    let check = |sys: &Dpde2, label: &str| -> Result<(), String> {
        let direct = dpde_to_pie(sys).map_err(|e| format!("{label}: direct assembly: {e}"))?;
        let exp =
            expand_delay_dynamics(sys).map_err(|e| format!("{label}: expansion: {e}"))?;
        let g1 = pde1d_to_pie(&exp).map_err(|e| format!("{label}: interior part: {e}"))?;
        let g2 = transport2d_to_pie(&exp).map_err(|e| format!("{label}: transport part: {e}"))?;
        let closed =
            pie_interconnect(&g1, &g2).map_err(|e| format!("{label}: interconnection: {e}"))?;
        let dt = direct.t.max_coeff_diff(&closed.t);
        let da = direct.a.max_coeff_diff(&closed.a);
        if dt > 1e-10 || da > 1e-10 {
            return Err(format!("{label}: dual construction gap T {dt:.3e} / A {da:.3e}"));
        }
        Ok(())
    };
    check(&heat_example(1.9, 0.7), "reaction-diffusion example")?;
    for i in 0..n_random {
        check(&rand_dpde2(&mut rng), &format!("random system {i}"))?;
    }
    Ok(())
}

/// Certificate-replay suite: certify a delay-free diffusion system whose
/// decay rate is known analytically, then re-verify the reported residuals.
pub fn replay_suite() -> Result<(), String> {
    // Diffusion with zero boundary values on [0,1], in mass-matrix form:
    // the true decay rate is π².
    let dom = Domain::new(0.0, 1.0);
    let vs = ZSpace::new(0, 0, 1, 0, dom);
    let x = Poly::monomial(Var::X, 1, 1.0);
    let th = Poly::monomial(Var::Theta, 1, 1.0);
    let corr = x
        .mul(&Poly::constant(1.0).add(&th.scale(-1.0)), 24)
        .expect("degree within cap")
        .scale(-1.0);
    let mut t = PiOperator::zero(&vs, &vs);
    let mut kl = PolyMatrix::zeros(1, 1, dom);
    kl.set(0, 0, x.add(&th.scale(-1.0)).add(&corr));
    t.set_part(2, 2, 1, 0, kl).map_err(|e| e.to_string())?;
    let mut ku = PolyMatrix::zeros(1, 1, dom);
    ku.set(0, 0, corr);
    t.set_part(2, 2, 2, 0, ku).map_err(|e| e.to_string())?;
    let mut a = PiOperator::zero(&vs, &vs);
    let mut ka = PolyMatrix::zeros(1, 1, dom);
    ka.set(0, 0, Poly::constant(1.0));
    a.set_part(2, 2, 0, 0, ka).map_err(|e| e.to_string())?;
    let g = PieSystem::autonomous(t, a);

    let cfg = CertifyConfig {
        eps: 1e-2,
        degree: 1,
        alpha_max: 8.0,
        alpha_rel_tol: 0.05,
        max_bisect: 8,
        sdp_tol: 1e-8,
    };
    match certify(&g, &cfg).map_err(|e| e.to_string())? {
        CertifyOutcome::Certified(cert) => {
            if cert.alpha < 1.0 {
                return Err(format!("diffusion certificate too weak: α = {}", cert.alpha));
            }
            if cert.lpi_residual > 1e-7 {
                return Err(format!("replayed residual too large: {:.3e}", cert.lpi_residual));
            }
            if cert.m1_eig_floor < -1e-8 || cert.m2_eig_floor < -1e-8 {
                return Err(format!(
                    "witness eigenvalue floors violated: {:.3e} / {:.3e}",
                    cert.m1_eig_floor, cert.m2_eig_floor
                ));
            }
            Ok(())
        }
        CertifyOutcome::NoCertificate { probes } => {
            Err(format!("no certificate for stable diffusion system; probes {probes:?}"))
        }
    }
}
