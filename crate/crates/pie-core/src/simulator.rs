//! Method-of-lines integration of delayed PDE systems and of their integral
//! (mass-matrix) reformulations.
//!
//! This module is a non-certifying cross-check: it integrates the original
//! delayed PDE by Chebyshev collocation in space and an aligned history ring
//! buffer in the delay channel, and integrates the reformulated system by a
//! spectral Galerkin method built from the exact operator inner products.
//! Both produce norm traces and a fitted decay rate that can be compared
//! against certified bounds.

use ndarray::{Array1, Array2};
use ndarray_linalg::error::LinalgError;
use ndarray_linalg::{Factorize, FactorizeInto, Solve};

use crate::pde_models::Dpde2;
use crate::pi_algebra::{PiError, ZFunction};
use crate::pie_system::PieSystem;
use crate::polykernel::{Domain, Poly, PolyMatrix, Var, NVARS};

/// Errors from the time integrators.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// The requested time step is too coarse to resolve the delay history
    /// grid (alignment requires at least `n_s` steps per delay).
    #[error("time step {dt} exceeds the history bound {bound} (delay {tau}, {n_s} history steps)")]
    CflViolation { dt: f64, bound: f64, tau: f64, n_s: usize },
    /// The trajectory norm exceeded the blow-up threshold.
    #[error("trajectory norm {norm:.3e} exceeded 1e12 at t = {t}")]
    BlowupDetected { t: f64, norm: f64 },
    /// The discretized mass-matrix pencil could not be factorized.
    #[error("discretized mass-matrix pencil is singular")]
    SingularMass,
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pi(#[from] PiError),
}

impl From<LinalgError> for SimError {
    fn from(_: LinalgError) -> Self {
        SimError::SingularMass
    }
}

/// Discretization and horizon parameters shared by both integrators.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of Chebyshev collocation intervals in `x` (grid has `n_x + 1`
    /// points). Also caps the Galerkin degree of the reformulated integrator.
    pub n_x: usize,
    /// Number of history steps per delay; the time step is locked to
    /// `tau / n` with `n ≥ n_s` so delayed samples land on grid points.
    pub n_s: usize,
    /// Requested time step (shrunk automatically for history alignment).
    pub dt: f64,
    /// Integration horizon.
    pub t_end: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_x: 64, n_s: 128, dt: 1e-3, t_end: 5.0 }
    }
}

/// Norm traces of one simulation, with a decay rate fitted over the trailing
/// half of the horizon.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub t: Vec<f64>,
    /// Primary-state norm: `‖u(t)‖` for the delayed PDE, `‖Tv(t)‖` for the
    /// reformulated system.
    pub primary: Vec<f64>,
    /// Secondary norm: history norm `‖φ(t)‖` for the delayed PDE, `‖v(t)‖`
    /// for the reformulated system.
    pub secondary: Vec<f64>,
    /// `√(primary² + secondary²)`.
    pub combined: Vec<f64>,
    /// Least-squares exponential decay rate of the combined norm over the
    /// trailing half of the horizon (positive = decaying).
    pub decay_rate: f64,
}

impl SimTrace {
    fn finish(t: Vec<f64>, primary: Vec<f64>, secondary: Vec<f64>) -> SimTrace {
        let combined: Vec<f64> =
            primary.iter().zip(&secondary).map(|(a, b)| a.hypot(*b)).collect();
        let decay_rate = fit_decay(&t, &combined);
        SimTrace { t, primary, secondary, combined, decay_rate }
    }

    /// Serialize as CSV with header `t,u,phi,combined`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,phi,combined\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.t[i], self.primary[i], self.secondary[i], self.combined[i]
            ));
        }
        out
    }
}

/// Slope of the least-squares line through `(t, ln ‖·‖)` over the trailing
/// half of the horizon, negated so decay is positive.
fn fit_decay(t: &[f64], norm: &[f64]) -> f64 {
    let start = t.len() / 2;
    let pts: Vec<(f64, f64)> = t[start..]
        .iter()
        .zip(&norm[start..])
        .filter(|(_, n)| **n > 1e-300)
        .map(|(t, n)| (*t, n.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(p, q), (t, y)| (p + (t - mt) * (y - my), q + (t - mt) * (t - mt)));
    if den <= 0.0 { 0.0 } else { -(num / den) }
}

// ---------------------------------------------------------------------------
// Chebyshev collocation for the delayed PDE
// ---------------------------------------------------------------------------

/// Chebyshev–Gauss–Lobatto points on `dom`, ordered from `b` down to `a`,
/// with the first-derivative collocation matrix.
fn cheb(n: usize, dom: Domain) -> (Vec<f64>, Array2<f64>) {
    let half = 0.5 * (dom.b - dom.a);
    let mid = 0.5 * (dom.a + dom.b);
    let xs: Vec<f64> = (0..=n)
        .map(|j| mid + half * (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = Array2::zeros((n + 1, n + 1));
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[[i, j]] = c(i) / c(j) * sign / (xs[i] - xs[j]);
            }
        }
    }
    for i in 0..=n {
        let row_sum: f64 = (0..=n).filter(|j| *j != i).map(|j| d[[i, j]]).sum();
        d[[i, i]] = -row_sum;
    }
    (xs, d)
}

/// Clenshaw–Curtis quadrature weights for the point set of [`cheb`].
fn cheb_weights(n: usize, dom: Domain) -> Vec<f64> {
    let half = 0.5 * (dom.b - dom.a);
    let mut w = vec![0.0; n + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = std::f64::consts::PI * j as f64 / n as f64;
        let mut sum = 1.0;
        for k in 1..=(n / 2) {
            let bk = if 2 * k == n { 1.0 } else { 2.0 };
            sum -= bk / ((4 * k * k - 1) as f64) * (2.0 * k as f64 * theta).cos();
        }
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        *wj = half * cj * sum / n as f64;
    }
    w
}

/// Integrate the delayed PDE `u_t = A(x)·[u;u_x;u_xx] + A_d(x)·[…](t−τ)` with
/// boundary conditions `B·[u(a);u_x(a);u(b);u_x(b)] = 0` from initial state
/// `u0` (an `n × 1` polynomial column in `x`, also used as the constant
/// history profile). Spatial discretization is Chebyshev collocation with the
/// boundary rows replaced by the boundary conditions; time stepping is the
/// implicit trapezoidal rule with the delayed term read from an aligned
/// history ring buffer.
pub fn simulate_dpde(sys: &Dpde2, u0: &PolyMatrix, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    sys.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
    if u0.rows() != sys.n || u0.cols() != 1 {
        return Err(SimError::Invalid(format!(
            "initial state must be {}x1, got {}x{}",
            sys.n,
            u0.rows(),
            u0.cols()
        )));
    }
    if cfg.dt <= 0.0 || cfg.t_end <= 0.0 || cfg.n_x < 4 || cfg.n_s < 1 {
        return Err(SimError::Invalid("need dt > 0, t_end > 0, n_x ≥ 4, n_s ≥ 1".into()));
    }
    let has_delay = !sys.a_d.is_zero();
    let bound = sys.tau / cfg.n_s as f64;
    if has_delay && cfg.dt > bound + 1e-12 * bound {
        return Err(SimError::CflViolation { dt: cfg.dt, bound, tau: sys.tau, n_s: cfg.n_s });
    }
    // Align the step so the delay is an exact number of steps.
    let (m_delay, dt) = if has_delay {
        let m = (sys.tau / cfg.dt).ceil().max(cfg.n_s as f64) as usize;
        (m, sys.tau / m as f64)
    } else {
        (0, cfg.dt)
    };

    let n = sys.n;
    let nx = cfg.n_x;
    let np = nx + 1;
    let dim = n * np;
    let (xs, d1) = cheb(nx, sys.domain);
    let d2 = d1.dot(&d1);
    let w = cheb_weights(nx, sys.domain);

    // Interior operators from the polynomial coefficient matrices.
    let build = |coef: &PolyMatrix| -> Array2<f64> {
        let mut l = Array2::zeros((dim, dim));
        for k in 0..n {
            for ll in 0..n {
                for (blk, dmat) in [(0, None), (1, Some(&d1)), (2, Some(&d2))] {
                    let p = coef.get(k, blk * n + ll);
                    for j in 0..np {
                        let mut pt = [0.0; NVARS];
                        pt[0] = xs[j];
                        let a = p.eval(&pt);
                        if a == 0.0 {
                            continue;
                        }
                        match dmat {
                            None => l[[k * np + j, ll * np + j]] += a,
                            Some(dm) => {
                                for q in 0..np {
                                    l[[k * np + j, ll * np + q]] += a * dm[[j, q]];
                                }
                            }
                        }
                    }
                }
            }
        }
        l
    };
    let l0 = build(&sys.a);
    let ld = build(&sys.a_d);

    // Boundary rows: with the descending point ordering, index 0 is x = b and
    // index nx is x = a. Row k of the boundary matrix replaces the x = a
    // collocation row of state k; row n + k replaces the x = b row.
    let mut bc = Array2::zeros((2 * n, dim));
    for r in 0..2 * n {
        for l in 0..n {
            bc[[r, l * np + nx]] += sys.b[r][l];
            for q in 0..np {
                bc[[r, l * np + q]] += sys.b[r][n + l] * d1[[nx, q]];
            }
            bc[[r, l * np]] += sys.b[r][2 * n + l];
            for q in 0..np {
                bc[[r, l * np + q]] += sys.b[r][3 * n + l] * d1[[0, q]];
            }
        }
    }
    let replaced: Vec<(usize, usize)> = (0..n)
        .map(|k| (k, k * np + nx))
        .chain((0..n).map(|k| (n + k, k * np)))
        .collect();

    // Trapezoidal step: (I − dt/2·L0) u⁺ = u + dt/2·L0 u + dt/2·Ld(uτ + uτ⁺),
    // with boundary rows enforcing Bc·u⁺ = 0.
    let mut lhs = Array2::eye(dim) - &l0.mapv(|v| v * 0.5 * dt);
    for &(r, row) in &replaced {
        for q in 0..dim {
            lhs[[row, q]] = bc[[r, q]];
        }
    }
    let lhs = lhs.factorize_into()?;

    let mut u = Array1::zeros(dim);
    for k in 0..n {
        for j in 0..np {
            let mut pt = [0.0; NVARS];
            pt[0] = xs[j];
            u[k * np + j] = u0.get(k, 0).eval(&pt);
        }
    }
    let l2 = |v: &Array1<f64>| -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            for j in 0..np {
                s += w[j] * v[k * np + j] * v[k * np + j];
            }
        }
        s.sqrt()
    };

    let u0_norm = l2(&u);
    let mut hist: Vec<Array1<f64>> = vec![u.clone(); m_delay + 1];
    let mut hist_norms: Vec<f64> = vec![u0_norm; m_delay + 1];
    let mut head = 0usize; // hist[head] holds u(t); u(t−τ) is the slot after.

    let phi_norm = |norms: &[f64], head: usize| -> f64 {
        if m_delay == 0 {
            return 0.0;
        }
        // Trapezoid over s ∈ [0,1] of ‖u(t−τs)‖², newest sample first.
        let mut s = 0.0;
        for i in 0..=m_delay {
            let v = norms[(head + m_delay + 1 - i) % (m_delay + 1)];
            let wt = if i == 0 || i == m_delay { 0.5 } else { 1.0 };
            s += wt * v * v;
        }
        (s / m_delay as f64).sqrt()
    };

    let steps = (cfg.t_end / dt).ceil() as usize;
    let mut tr_t = Vec::with_capacity(steps + 1);
    let mut tr_u = Vec::with_capacity(steps + 1);
    let mut tr_phi = Vec::with_capacity(steps + 1);
    tr_t.push(0.0);
    tr_u.push(u0_norm);
    tr_phi.push(phi_norm(&hist_norms, head));

    for step in 1..=steps {
        let mut rhs = &u + &l0.dot(&u).mapv(|v| v * 0.5 * dt);
        if m_delay > 0 {
            // u(t−τ) and u(t+dt−τ) from the ring buffer.
            let old = &hist[(head + 1) % (m_delay + 1)];
            let new = &hist[(head + 2) % (m_delay + 1)];
            rhs = rhs + ld.dot(&(old + new)).mapv(|v| v * 0.5 * dt);
        }
        for &(_, row) in &replaced {
            rhs[row] = 0.0;
        }
        u = lhs.solve(&rhs)?;
        let un = l2(&u);
        if m_delay > 0 {
            head = (head + 1) % (m_delay + 1);
            hist[head] = u.clone();
            hist_norms[head] = un;
        }
        let t = step as f64 * dt;
        if !un.is_finite() || un > 1e12 {
            return Err(SimError::BlowupDetected { t, norm: un });
        }
        tr_t.push(t);
        tr_u.push(un);
        tr_phi.push(phi_norm(&hist_norms, head));
    }
    Ok(SimTrace::finish(tr_t, tr_u, tr_phi))
}

// ---------------------------------------------------------------------------
// Spectral Galerkin integration of the mass-matrix form
// ---------------------------------------------------------------------------

/// Shifted Legendre polynomials up to `deg` in variable `var` on `[lo, hi]`.
fn legendre(var: Var, deg: usize, lo: f64, hi: f64) -> Vec<Poly> {
    // t = (2v − lo − hi)/(hi − lo) maps the interval to [−1, 1].
    let t = Poly::monomial(var, 1, 2.0 / (hi - lo)).add(&Poly::constant(-(lo + hi) / (hi - lo)));
    let mut out = vec![Poly::constant(1.0)];
    if deg >= 1 {
        out.push(t.clone());
    }
    for k in 1..deg {
        let kf = k as f64;
        let next = t
            .mul(&out[k], 24)
            .expect("legendre degree within cap")
            .scale((2.0 * kf + 1.0) / (kf + 1.0))
            .add(&out[k - 1].scale(-kf / (kf + 1.0)));
        out.push(next);
    }
    out
}

/// Galerkin discretization of an autonomous mass-matrix system
/// `T v̇ = A v`: orthogonal polynomial bases per component, with the mass and
/// dynamics matrices computed from the exact operator inner products.
pub struct PieDiscretization {
    pub basis: Vec<ZFunction>,
    /// `⟨bᵢ, T bⱼ⟩`.
    pub tg: Array2<f64>,
    /// `⟨bᵢ, A bⱼ⟩`.
    pub ag: Array2<f64>,
    /// `⟨bᵢ, bⱼ⟩`.
    pub gram: Array2<f64>,
    /// `⟨T bᵢ, T bⱼ⟩`.
    pub gram_t: Array2<f64>,
}

impl PieDiscretization {
    /// Build the discretization with per-axis polynomial degree `deg`.
    pub fn new(g: &PieSystem, deg: usize) -> Result<PieDiscretization, SimError> {
        let dims = g.vs.dims();
        let dom = g.vs.domain;
        let ps = legendre(Var::S, deg, 0.0, 1.0);
        let px = legendre(Var::X, deg, dom.a, dom.b);
        let mut basis = Vec::new();
        for c in 0..4 {
            let polys: Vec<Poly> = match c {
                0 => vec![Poly::constant(1.0)],
                1 => ps.clone(),
                2 => px.clone(),
                _ => ps
                    .iter()
                    .flat_map(|a| px.iter().map(move |b| a.mul(b, 24).expect("within cap")))
                    .collect(),
            };
            for row in 0..dims[c] {
                for p in &polys {
                    let mut m = PolyMatrix::zeros(dims[c], 1, dom);
                    m.set(row, 0, p.clone());
                    let mut z = ZFunction::zero(&g.vs);
                    z.set_comp(c, m);
                    basis.push(z);
                }
            }
        }
        let n = basis.len();
        let tb: Vec<ZFunction> =
            basis.iter().map(|b| g.t.apply(b)).collect::<Result<_, _>>()?;
        let ab: Vec<ZFunction> =
            basis.iter().map(|b| g.a.apply(b)).collect::<Result<_, _>>()?;
        let mut tg = Array2::zeros((n, n));
        let mut ag = Array2::zeros((n, n));
        let mut gram = Array2::zeros((n, n));
        let mut gram_t = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                tg[[i, j]] = basis[i].inner(&tb[j])?;
                ag[[i, j]] = basis[i].inner(&ab[j])?;
                gram[[i, j]] = basis[i].inner(&basis[j])?;
                gram_t[[i, j]] = tb[i].inner(&tb[j])?;
            }
        }
        Ok(PieDiscretization { basis, tg, ag, gram, gram_t })
    }

    /// Orthogonal projection of `z` onto the basis (coefficient vector).
    pub fn project(&self, z: &ZFunction) -> Result<Array1<f64>, SimError> {
        let d: Array1<f64> = self
            .basis
            .iter()
            .map(|b| b.inner(z))
            .collect::<Result<Vec<_>, _>>()?
            .into();
        Ok(self.gram.factorize()?.solve(&d)?)
    }

}

/// Combine basis functions with coefficients into a `ZFunction`.
fn combine(basis: &[ZFunction], c: &Array1<f64>, space: &crate::pi_algebra::ZSpace) -> ZFunction {
    let mut z = ZFunction::zero(space);
    for (b, ci) in basis.iter().zip(c.iter()) {
        if *ci == 0.0 {
            continue;
        }
        for comp in 0..4 {
            let scaled = b.comp(comp).scale(*ci);
            let sum = z.comp(comp).add(&scaled).expect("matching shapes");
            z.set_comp(comp, sum);
        }
    }
    z
}

/// Integrate the autonomous mass-matrix system `T v̇ = A v` from initial
/// fundamental state `v0` using the Galerkin discretization and the implicit
/// trapezoidal rule on the pencil `(T − dt/2·A) v⁺ = (T + dt/2·A) v`.
///
/// The trace's primary norm is `‖Tv(t)‖` (the reconstructed primary state)
/// and the secondary norm is `‖v(t)‖`.
pub fn simulate_pie(g: &PieSystem, v0: &ZFunction, cfg: &SimConfig) -> Result<SimTrace, SimError> {
    if !g.is_autonomous() {
        return Err(SimError::Invalid("simulation requires an autonomous system".into()));
    }
    if cfg.dt <= 0.0 || cfg.t_end <= 0.0 {
        return Err(SimError::Invalid("need dt > 0 and t_end > 0".into()));
    }
    let deg = cfg.n_x.min(12).max(4);
    let disc = PieDiscretization::new(g, deg)?;
    let mut c = disc.project(v0)?;
    let dt = cfg.dt;
    let lhs = (&disc.tg - &disc.ag.mapv(|v| v * 0.5 * dt)).factorize_into()?;
    let rhs_m = &disc.tg + &disc.ag.mapv(|v| v * 0.5 * dt);

    let quad = |m: &Array2<f64>, c: &Array1<f64>| -> f64 { c.dot(&m.dot(c)).max(0.0).sqrt() };
    let steps = (cfg.t_end / dt).ceil() as usize;
    let mut tr_t = Vec::with_capacity(steps + 1);
    let mut tr_p = Vec::with_capacity(steps + 1);
    let mut tr_s = Vec::with_capacity(steps + 1);
    tr_t.push(0.0);
    tr_p.push(quad(&disc.gram_t, &c));
    tr_s.push(quad(&disc.gram, &c));
    for step in 1..=steps {
        c = lhs.solve(&rhs_m.dot(&c))?;
        let t = step as f64 * dt;
        let p = quad(&disc.gram_t, &c);
        let s = quad(&disc.gram, &c);
        if !p.is_finite() || !s.is_finite() || p.max(s) > 1e12 {
            return Err(SimError::BlowupDetected { t, norm: p.max(s) });
        }
        tr_t.push(t);
        tr_p.push(p);
        tr_s.push(s);
    }
    Ok(SimTrace::finish(tr_t, tr_p, tr_s))
}

/// Fundamental initial state whose image under the system map best matches a
/// primary-state profile `z` (least squares in the Galerkin basis).
pub fn pie_initial_from_primary(
    g: &PieSystem,
    z: &ZFunction,
    deg: usize,
) -> Result<ZFunction, SimError> {
    let disc = PieDiscretization::new(g, deg)?;
    let n = disc.basis.len();
    // Normal equations ⟨T bᵢ, T bⱼ⟩ c = ⟨T bᵢ, z⟩ with slight regularization,
    // since the map may be rank deficient on the tail of the basis.
    let d: Array1<f64> = disc
        .basis
        .iter()
        .map(|b| g.t.apply(b).map_err(SimError::from).and_then(|tb| Ok(tb.inner(z)?)))
        .collect::<Result<Vec<_>, _>>()?
        .into();
    let scale = disc.gram_t.diag().iter().fold(0.0f64, |a, v| a.max(*v)).max(1e-300);
    let reg = &disc.gram_t + &(Array2::eye(n).mapv(|v: f64| v * 1e-10 * scale));
    let c = reg.factorize_into()?.solve(&d)?;
    Ok(combine(&disc.basis, &c, &g.vs))
}
