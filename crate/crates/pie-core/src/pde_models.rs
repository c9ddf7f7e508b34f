//! Declarative models of delayed PDE/ODE systems and the structural rewrites
//! that replace delayed evaluations by transport channels.
//!
//! Three model families are supported:
//!
//! * [`Dpde2`] — a second-order 1D PDE whose interior dynamics contain a
//!   delayed term; the delay is expanded into a 2D transport channel by
//!   [`expand_delay_dynamics`].
//! * [`Dde`] — a delay differential equation with finitely many pointwise
//!   delays, an exogenous input and a designated output.
//! * [`CoupledOdePde1D`] — an ODE coupled to a 1D PDE with states of
//!   differentiation orders 0, 1 and 2, where delays may appear in the ODE
//!   dynamics ([`rewrite_ode_delay`]) or in the boundary conditions
//!   ([`rewrite_boundary_delay`]); both rewrites produce an equivalent
//!   delay-free coupled system in which each delay survives only as a
//!   transport speed.
//!
//! The rewrites are purely structural: no operator algebra happens here.

use crate::polykernel::{Domain, Poly, PolyMatrix, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense constant matrix in row-major nested-vector form (JSON friendly).
pub type Mat = Vec<Vec<f64>>;

/// `rows × cols` zero matrix.
pub fn mat_zeros(rows: usize, cols: usize) -> Mat {
    vec![vec![0.0; cols]; rows]
}

/// `n × n` identity matrix.
pub fn mat_identity(n: usize) -> Mat {
    let mut m = mat_zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// Shape of a nested-vector matrix; `(rows, cols)` with `cols` taken from the
/// first row (all rows must agree, checked by [`mat_check`]).
pub fn mat_shape(m: &Mat) -> (usize, usize) {
    (m.len(), m.first().map_or(0, Vec::len))
}

fn mat_check(m: &Mat, rows: usize, cols: usize, what: &str) -> Result<(), ModelError> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(ModelError::Shape(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            m.len(),
            m.first().map_or(0, Vec::len)
        )));
    }
    Ok(())
}

/// Whether every entry of a nested-vector matrix is exactly zero.
pub fn mat_is_zero(m: &Mat) -> bool {
    m.iter().all(|r| r.iter().all(|v| *v == 0.0))
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("the delay does not appear (only) in the ODE dynamics: {0}")]
    DelayNotInOde(String),
    #[error("the delay does not appear (only) in the boundary conditions: {0}")]
    DelayNotInBc(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// State bookkeeping for mixed-order 1D PDE blocks
// ---------------------------------------------------------------------------

/// Numbers of PDE states of differentiation order 0, 1 and 2.
///
/// States are globally indexed in order-of-order: the `n1` order-0 states
/// first, then the `n2` order-1 states, then the `n3` order-2 states.
///
/// Two canonical stackings are used throughout:
///
/// * the interior stack `D_int u = [u; ∂x u≥1; ∂x² u≥2]` (values of all
///   states, first derivatives of the order-≥1 states, second derivatives of
///   the order-2 states), of height [`GpdeOrders::n_int`];
/// * the boundary trace stack `Λ u` listing, for each endpoint `a` then `b`,
///   the values of the order-≥1 states followed by the first derivatives of
///   the order-2 states, of height [`GpdeOrders::n_bf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpdeOrders {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl GpdeOrders {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        GpdeOrders { n1, n2, n3 }
    }

    /// Total number of PDE states.
    pub fn n_u(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }

    /// Height of the interior stack `[u; ∂x u≥1; ∂x² u≥2]`.
    pub fn n_int(&self) -> usize {
        self.n_u() + self.n2 + self.n3 + self.n3
    }

    /// Height of the boundary trace stack (both endpoints).
    pub fn n_bf(&self) -> usize {
        2 * self.n_core()
    }

    /// Number of core boundary values determining a state from its highest
    /// derivative: one per order-1 state, two per order-2 state.
    pub fn n_core(&self) -> usize {
        self.n2 + 2 * self.n3
    }

    /// Differentiation order of the state with global index `k`.
    pub fn order_of(&self, k: usize) -> usize {
        assert!(k < self.n_u());
        if k < self.n1 {
            0
        } else if k < self.n1 + self.n2 {
            1
        } else {
            2
        }
    }

    /// Interior-stack column of the value of state `k`.
    pub fn int_val(&self, k: usize) -> usize {
        assert!(k < self.n_u());
        k
    }

    /// Interior-stack column of `∂x` of state `k` (order ≥ 1).
    pub fn int_d1(&self, k: usize) -> usize {
        assert!(self.order_of(k) >= 1);
        self.n_u() + (k - self.n1)
    }

    /// Interior-stack column of `∂x²` of state `k` (order 2).
    pub fn int_d2(&self, k: usize) -> usize {
        assert!(self.order_of(k) == 2);
        self.n_u() + self.n2 + self.n3 + (k - self.n1 - self.n2)
    }

    /// Trace-stack column of the value of state `k` (order ≥ 1) at endpoint
    /// `side` (0 = left, 1 = right).
    pub fn bf_val(&self, side: usize, k: usize) -> usize {
        assert!(side < 2 && self.order_of(k) >= 1);
        let off = if self.order_of(k) == 1 {
            k - self.n1
        } else {
            self.n2 + (k - self.n1 - self.n2)
        };
        side * self.n_core() + off
    }

    /// Trace-stack column of `∂x` of state `k` (order 2) at endpoint `side`.
    pub fn bf_d1(&self, side: usize, k: usize) -> usize {
        assert!(side < 2 && self.order_of(k) == 2);
        side * self.n_core() + self.n2 + self.n3 + (k - self.n1 - self.n2)
    }

    /// Semantic description of every interior-stack row as
    /// `(derivative order, state index)`.
    pub fn int_layout(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = (0..self.n_u()).map(|k| (0, k)).collect();
        v.extend((0..self.n_u()).filter(|k| self.order_of(*k) >= 1).map(|k| (1, k)));
        v.extend((0..self.n_u()).filter(|k| self.order_of(*k) == 2).map(|k| (2, k)));
        v
    }

    /// Semantic description of every trace-stack row as
    /// `(side, derivative order, state index)`.
    pub fn bf_layout(&self) -> Vec<(usize, usize, usize)> {
        let mut v = Vec::with_capacity(self.n_bf());
        for side in 0..2 {
            for k in 0..self.n_u() {
                if self.order_of(k) >= 1 {
                    v.push((side, 0, k));
                }
            }
            for k in 0..self.n_u() {
                if self.order_of(k) == 2 {
                    v.push((side, 1, k));
                }
            }
        }
        v
    }
}

// ---------------------------------------------------------------------------
// Model types
// ---------------------------------------------------------------------------

/// Second-order 1D PDE with a delayed interior term:
///
/// `u_t(t,x) = A(x)·[u; u_x; u_xx](t,x) + A_d(x)·[u; u_x; u_xx](t−τ,x)`
///
/// on `[a,b]`, subject to `B·[u(a); u_x(a); u(b); u_x(b)] = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dpde2 {
    /// Number of PDE states.
    pub n: usize,
    pub domain: Domain,
    /// `n × 3n` polynomial coefficient matrix on `[u; u_x; u_xx]`.
    pub a: PolyMatrix,
    /// `n × 3n` delayed-term coefficient matrix.
    pub a_d: PolyMatrix,
    /// `2n × 4n` constant boundary-condition matrix.
    pub b: Mat,
    /// Delay, strictly positive.
    pub tau: f64,
}

impl Dpde2 {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.tau <= 0.0 {
            return Err(ModelError::Invalid(format!("delay must be positive, got {}", self.tau)));
        }
        for (m, what) in [(&self.a, "interior coefficients"), (&self.a_d, "delayed coefficients")] {
            if m.rows() != self.n || m.cols() != 3 * self.n {
                return Err(ModelError::Shape(format!(
                    "{what}: expected {}x{}, got {}x{}",
                    self.n,
                    3 * self.n,
                    m.rows(),
                    m.cols()
                )));
            }
            if m.contains(Var::Theta) || m.contains(Var::S) || m.contains(Var::Nu) {
                return Err(ModelError::Invalid(format!("{what} may only depend on x")));
            }
        }
        mat_check(&self.b, 2 * self.n, 4 * self.n, "boundary-condition matrix")?;
        Ok(())
    }

    /// View as the general mixed-order PDE type (pure order-2 block, no
    /// exogenous input, single interior delay).
    pub fn as_delayed_pde(&self) -> DelayedPde1D {
        let orders = GpdeOrders::new(0, 0, self.n);
        let mut pde = DelayedPde1D::zero(orders, self.domain, 0, 0, 2 * self.n);
        pde.a_p = self.a.clone();
        pde.e_b = self.b.clone();
        if !self.a_d.is_zero() {
            let mut d = PdeDelay::zero(&pde, self.tau);
            d.a_pd = self.a_d.clone();
            pde.delays.push(d);
        }
        pde
    }
}

/// Delay differential equation with `K` pointwise delays:
///
/// `u̇(t) = A u(t) + Σ_j A_j u(t−τ_j) + B_w w(t)`,
/// `z(t) = C_z u(t) + Σ_j C_zj u(t−τ_j)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dde {
    pub n_u: usize,
    pub n_w: usize,
    pub n_z: usize,
    /// `n_u × n_u` delay-free dynamics matrix.
    pub a: Mat,
    /// `n_u × n_w` input matrix.
    pub b_w: Mat,
    /// `n_z × n_u` output matrix.
    pub c_z: Mat,
    /// Per-delay data, delays strictly increasing.
    pub delays: Vec<DdeDelay>,
}

/// One delay channel of a [`Dde`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdeDelay {
    pub tau: f64,
    /// `n_u × n_u` delayed dynamics matrix.
    pub a_j: Mat,
    /// `n_z × n_u` delayed output matrix.
    pub c_zj: Mat,
}

impl Dde {
    /// A DDE with all matrices zero (useful as a builder base).
    pub fn zero(n_u: usize, n_w: usize, n_z: usize) -> Self {
        Dde {
            n_u,
            n_w,
            n_z,
            a: mat_zeros(n_u, n_u),
            b_w: mat_zeros(n_u, n_w),
            c_z: mat_zeros(n_z, n_u),
            delays: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        mat_check(&self.a, self.n_u, self.n_u, "dynamics matrix")?;
        mat_check(&self.b_w, self.n_u, self.n_w, "input matrix")?;
        mat_check(&self.c_z, self.n_z, self.n_u, "output matrix")?;
        let mut prev = 0.0;
        for (j, d) in self.delays.iter().enumerate() {
            if d.tau <= prev {
                return Err(ModelError::Invalid(format!(
                    "delays must be strictly increasing and positive; delay {j} is {}",
                    d.tau
                )));
            }
            prev = d.tau;
            mat_check(&d.a_j, self.n_u, self.n_u, "delayed dynamics matrix")?;
            mat_check(&d.c_zj, self.n_z, self.n_u, "delayed output matrix")?;
        }
        Ok(())
    }
}

/// Mixed-order 1D PDE with pointwise delays, exogenous input `z` and output
/// `w`:
///
/// `u_t = a_p(x)·D_int u + b_z(x) z + Σ_j [a_pd_j·D_int u + a_bd_j·Λu + b_zd_j z](t−τ_j)`
///
/// subject to `∫ e_p(x)·D_int u dx + e_b·Λu + e_z z = 0`, with output
/// `w = ∫ c_wp(x)·D_int u dx + c_wb·Λu + d_wz z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayedPde1D {
    pub orders: GpdeOrders,
    pub domain: Domain,
    pub n_z: usize,
    pub n_w: usize,
    /// Number of boundary-condition rows (must equal `orders.n_core()` for
    /// well-posedness).
    pub n_bc: usize,
    /// `n_u × n_int` interior dynamics coefficients (polynomial in x).
    pub a_p: PolyMatrix,
    /// `n_u × n_z` input-to-dynamics coefficients (polynomial in x).
    pub b_z: PolyMatrix,
    /// `n_bc × n_int` integral boundary-condition coefficients.
    pub e_p: PolyMatrix,
    /// `n_bc × n_bf` boundary-trace condition matrix.
    pub e_b: Mat,
    /// `n_bc × n_z` input-to-boundary matrix.
    pub e_z: Mat,
    pub delays: Vec<PdeDelay>,
    /// `n_w × n_int` interior output taps.
    pub c_wp: PolyMatrix,
    /// `n_w × n_bf` boundary output taps.
    pub c_wb: Mat,
    /// `n_w × n_z` input feedthrough.
    pub d_wz: Mat,
}

/// One delay channel of a [`DelayedPde1D`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeDelay {
    pub tau: f64,
    /// `n_u × n_int` delayed interior coefficients.
    pub a_pd: PolyMatrix,
    /// `n_u × n_bf` delayed boundary-trace coefficients.
    pub a_bd: PolyMatrix,
    /// `n_u × n_z` delayed input coefficients.
    pub b_zd: PolyMatrix,
}

impl PdeDelay {
    pub fn zero(pde: &DelayedPde1D, tau: f64) -> Self {
        let (n_u, n_int, n_bf) = (pde.orders.n_u(), pde.orders.n_int(), pde.orders.n_bf());
        PdeDelay {
            tau,
            a_pd: PolyMatrix::zeros(n_u, n_int, pde.domain),
            a_bd: PolyMatrix::zeros(n_u, n_bf, pde.domain),
            b_zd: PolyMatrix::zeros(n_u, pde.n_z, pde.domain),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a_pd.is_zero() && self.a_bd.is_zero() && self.b_zd.is_zero()
    }
}

impl DelayedPde1D {
    /// A PDE with all coefficient blocks zero.
    pub fn zero(orders: GpdeOrders, domain: Domain, n_z: usize, n_w: usize, n_bc: usize) -> Self {
        let (n_u, n_int, n_bf) = (orders.n_u(), orders.n_int(), orders.n_bf());
        DelayedPde1D {
            orders,
            domain,
            n_z,
            n_w,
            n_bc,
            a_p: PolyMatrix::zeros(n_u, n_int, domain),
            b_z: PolyMatrix::zeros(n_u, n_z, domain),
            e_p: PolyMatrix::zeros(n_bc, n_int, domain),
            e_b: mat_zeros(n_bc, n_bf),
            e_z: mat_zeros(n_bc, n_z),
            delays: Vec::new(),
            c_wp: PolyMatrix::zeros(n_w, n_int, domain),
            c_wb: mat_zeros(n_w, n_bf),
            d_wz: mat_zeros(n_w, n_z),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (n_u, n_int, n_bf) = (self.orders.n_u(), self.orders.n_int(), self.orders.n_bf());
        let polys: [(&PolyMatrix, usize, usize, &str); 4] = [
            (&self.a_p, n_u, n_int, "interior dynamics"),
            (&self.b_z, n_u, self.n_z, "input dynamics"),
            (&self.e_p, self.n_bc, n_int, "integral boundary conditions"),
            (&self.c_wp, self.n_w, n_int, "interior output taps"),
        ];
        for (m, r, c, what) in polys {
            if m.rows() != r || m.cols() != c {
                return Err(ModelError::Shape(format!(
                    "{what}: expected {r}x{c}, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            if m.contains(Var::Theta) || m.contains(Var::S) || m.contains(Var::Nu) {
                return Err(ModelError::Invalid(format!("{what} may only depend on x")));
            }
        }
        mat_check(&self.e_b, self.n_bc, n_bf, "boundary-trace conditions")?;
        mat_check(&self.e_z, self.n_bc, self.n_z, "input boundary conditions")?;
        mat_check(&self.c_wb, self.n_w, n_bf, "boundary output taps")?;
        mat_check(&self.d_wz, self.n_w, self.n_z, "output feedthrough")?;
        let mut prev = 0.0;
        for (j, d) in self.delays.iter().enumerate() {
            if d.tau <= prev {
                return Err(ModelError::Invalid(format!(
                    "delays must be strictly increasing and positive; delay {j} is {}",
                    d.tau
                )));
            }
            prev = d.tau;
            for (m, r, c, what) in [
                (&d.a_pd, n_u, n_int, "delayed interior coefficients"),
                (&d.a_bd, n_u, n_bf, "delayed boundary coefficients"),
                (&d.b_zd, n_u, self.n_z, "delayed input coefficients"),
            ] {
                if m.rows() != r || m.cols() != c {
                    return Err(ModelError::Shape(format!(
                        "{what}: expected {r}x{c}, got {}x{}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        if self.n_bc != self.orders.n_core() {
            return Err(ModelError::Invalid(format!(
                "{} boundary-condition rows for {} core boundary values",
                self.n_bc,
                self.orders.n_core()
            )));
        }
        Ok(())
    }

    /// Global index of the state that is the exact time derivative of state
    /// `k`, if the dynamics row for `k` is a pure unit selector of another
    /// state's value (and `k` carries no delayed or input terms).
    fn time_derivative_of(&self, k: usize) -> Option<usize> {
        if !self.b_z.row_is_zero(k) || self.delays.iter().any(|d| {
            !d.a_pd.row_is_zero(k) || !d.a_bd.row_is_zero(k) || !d.b_zd.row_is_zero(k)
        }) {
            return None;
        }
        let mut found = None;
        for c in 0..self.orders.n_int() {
            let p = self.a_p.get(k, c);
            if p.is_zero() {
                continue;
            }
            let (c_is_val, state) = {
                let lay = self.orders.int_layout();
                (lay[c].0 == 0, lay[c].1)
            };
            if !c_is_val || found.is_some() || *p != Poly::constant(1.0) {
                return None;
            }
            found = Some(state);
        }
        found
    }
}

/// ODE coupled to a mixed-order 1D PDE, with optional delays in the ODE
/// dynamics and in the boundary conditions:
///
/// `ẇ(t) = a00 w(t) + a00d w(t−τ) + a01·Λu(t)`, with the ODE state entering
/// the PDE as its input `z := w`, and the boundary conditions optionally
/// carrying a delayed trace term `b_d·Λu(t−τ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledOdePde1D {
    /// `n0 × n0` delay-free ODE dynamics.
    pub a00: Mat,
    /// Optional `n0 × n0` delayed ODE dynamics (consumed by
    /// [`rewrite_ode_delay`]).
    pub a00d: Option<Mat>,
    /// `n0 × n_bf` boundary-trace coupling into the ODE.
    pub a01: Mat,
    /// The PDE block; its input channel of width `pde.n_z == n0` carries the
    /// ODE state (covering both dynamic coupling via `b_z` and boundary
    /// coupling via `e_z`).
    pub pde: DelayedPde1D,
    /// Optional `n_bc × n_bf` delayed boundary-trace term (consumed by
    /// [`rewrite_boundary_delay`]).
    pub b_d: Option<Mat>,
    /// Delay used by `a00d` / `b_d`.
    pub tau: Option<f64>,
}

impl CoupledOdePde1D {
    pub fn n0(&self) -> usize {
        self.a00.len()
    }

    /// A coupled system with `n0` ODE states and all blocks zero.
    pub fn zero(n0: usize, orders: GpdeOrders, domain: Domain, n_bc: usize) -> Self {
        CoupledOdePde1D {
            a00: mat_zeros(n0, n0),
            a00d: None,
            a01: mat_zeros(n0, orders.n_bf()),
            pde: DelayedPde1D::zero(orders, domain, n0, 0, n_bc),
            b_d: None,
            tau: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n0 = self.n0();
        mat_check(&self.a00, n0, n0, "ODE dynamics")?;
        if let Some(m) = &self.a00d {
            mat_check(m, n0, n0, "delayed ODE dynamics")?;
        }
        mat_check(&self.a01, n0, self.pde.orders.n_bf(), "boundary coupling")?;
        if let Some(m) = &self.b_d {
            mat_check(m, self.pde.n_bc, self.pde.orders.n_bf(), "delayed boundary conditions")?;
        }
        if self.pde.n_z != n0 {
            return Err(ModelError::Shape(format!(
                "PDE input width {} does not match ODE state count {n0}",
                self.pde.n_z
            )));
        }
        if (self.a00d.is_some() || self.b_d.is_some()) && self.tau.is_none() {
            return Err(ModelError::Invalid("delayed term present but no delay given".into()));
        }
        self.pde.validate()
    }

    pub fn is_delay_free(&self) -> bool {
        self.a00d.is_none() && self.b_d.is_none() && self.pde.delays.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Expanded (delay-free) systems
// ---------------------------------------------------------------------------

/// Initial history profile carried by an expanded system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryKind {
    /// Constant extension: the transport profile at `t = 0` equals the
    /// initial state everywhere along the history axis.
    #[default]
    ConstantExtension,
}

/// 2D transport channel of an expanded [`Dpde2`]: the channel state
/// `φ(t,s,x)` obeys `φ_t = −(1/τ)φ_s` on `s ∈ [0,1]` with entry condition
/// `φ(t,0,·) = u(t,·)` and inherits the PDE's boundary conditions in `x`; its
/// output `p(t,x) = tap(x)·[φ; φ_x; φ_xx](t,1,x)` is fed back additively into
/// the 1D dynamics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transport2D {
    pub tau: f64,
    /// `n × 3n` output tap applied to the interior stack of `φ(t,1,·)`.
    pub tap: PolyMatrix,
}

/// One entry of the port wiring table of an [`ExpandedSystem`]: which delayed
/// evaluation of the source system a transport channel realizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortWire {
    pub tau: f64,
    /// Delayed quantity consumed (human-readable, e.g. `"u2(b)"`).
    pub source: String,
    /// Transport state realizing its history.
    pub target: String,
}

/// A boundary-condition row that holds along every solution of an expanded
/// system as a differential consequence of the imposed rows, recorded for
/// reference but not imposed (imposing it would over-determine the static
/// boundary solve).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedBcRow {
    /// Coefficients on the boundary trace stack of the expanded PDE.
    pub trace_row: Vec<f64>,
    /// Coefficients on the ODE states of the expanded system.
    pub ode_row: Vec<f64>,
}

/// Delay-free representation of a delayed system: a coupled ODE–1D-PDE part
/// plus (for interior PDE delays) a 2D transport channel. Every delay of the
/// source system appears only as a transport speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandedSystem {
    pub one_d: CoupledOdePde1D,
    pub transport: Option<Transport2D>,
    pub wiring: Vec<PortWire>,
    pub history: HistoryKind,
    /// Boundary rows implied (not imposed) when a delayed boundary row was
    /// integrated in time; empty otherwise.
    pub implied_bc: Vec<ImpliedBcRow>,
}

// ---------------------------------------------------------------------------
// Rewrites
// ---------------------------------------------------------------------------

/// Expand the interior delay of a second-order PDE into a 2D transport
/// channel: the 1D part keeps the delay-free dynamics and receives the
/// channel output `p(t,x) = A_d(x)·[φ; φ_x; φ_xx](t,1,x)` additively.
pub fn expand_delay_dynamics(sys: &Dpde2) -> Result<ExpandedSystem, ModelError> {
    sys.validate()?;
    let mut pde = sys.as_delayed_pde();
    pde.delays.clear();
    let one_d = CoupledOdePde1D {
        a00: Mat::new(),
        a00d: None,
        a01: Mat::new(),
        pde,
        b_d: None,
        tau: None,
    };
    let wiring = (0..sys.n)
        .map(|i| PortWire {
            tau: sys.tau,
            source: format!("interior state u{i} delayed"),
            target: format!("transport channel state phi{i}(s, x)"),
        })
        .collect();
    Ok(ExpandedSystem {
        one_d,
        transport: Some(Transport2D { tau: sys.tau, tap: sys.a_d.clone() }),
        wiring,
        history: HistoryKind::ConstantExtension,
        implied_bc: Vec::new(),
    })
}

/// Column remapping from an old mixed-order layout to an enlarged one in
/// which `extra` order-1 states were appended after the old order-1 group.
struct LayoutGrow {
    old: GpdeOrders,
    new: GpdeOrders,
}

impl LayoutGrow {
    fn new(old: GpdeOrders, extra: usize) -> Self {
        LayoutGrow { old, new: GpdeOrders::new(old.n1, old.n2 + extra, old.n3) }
    }

    /// New global index of old state `k`.
    fn state(&self, k: usize) -> usize {
        if k < self.old.n1 + self.old.n2 {
            k
        } else {
            k + (self.new.n2 - self.old.n2)
        }
    }

    /// New global index of appended state `i`.
    fn extra_state(&self, i: usize) -> usize {
        self.old.n1 + self.old.n2 + i
    }

    /// New interior column of old interior column `c`.
    fn int_col(&self, c: usize) -> usize {
        let (d, k) = self.old.int_layout()[c];
        let k = self.state(k);
        match d {
            0 => self.new.int_val(k),
            1 => self.new.int_d1(k),
            _ => self.new.int_d2(k),
        }
    }

    /// New trace column of old trace column `c`.
    fn bf_col(&self, c: usize) -> usize {
        let (side, d, k) = self.old.bf_layout()[c];
        let k = self.state(k);
        if d == 0 {
            self.new.bf_val(side, k)
        } else {
            self.new.bf_d1(side, k)
        }
    }

    /// Remap a polynomial matrix over old interior columns; rows keep their
    /// position (boundary-condition or output rows).
    fn map_int(&self, m: &PolyMatrix, rows: usize, row0: usize) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(rows, self.new.n_int(), m.domain());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                out.set(row0 + r, self.int_col(c), m.get(r, c).clone());
            }
        }
        out
    }

    /// Remap a dynamics matrix: rows indexed by state, columns by the
    /// interior stack.
    fn map_dynamics(&self, m: &PolyMatrix) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(self.new.n_u(), self.new.n_int(), m.domain());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                out.set(self.state(r), self.int_col(c), m.get(r, c).clone());
            }
        }
        out
    }

    /// Remap a constant matrix over old trace columns.
    fn map_bf(&self, m: &Mat, rows: usize, row0: usize) -> Mat {
        let mut out = mat_zeros(rows, self.new.n_bf());
        for (r, row) in m.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out[row0 + r][self.bf_col(c)] += v;
            }
        }
        out
    }
}

fn trace_name(_orders: &GpdeOrders, side: usize, d: usize, k: usize) -> String {
    let endpoint = if side == 0 { "a" } else { "b" };
    let deriv = if d == 0 { "" } else { "_x" };
    format!("u{k}{deriv}({endpoint})")
}

/// Replace a delayed ODE self-term `a00d·w(t−τ)` by a 1D transport state
/// `φ(t,x) = w(t − τ(x−a)/(b−a))` appended to the PDE's order-1 group, with
/// entry condition `φ(t,a) = w(t)` and the delayed term redirected to the
/// trace `φ(t,b)`.
pub fn rewrite_ode_delay(sys: &CoupledOdePde1D) -> Result<ExpandedSystem, ModelError> {
    sys.validate()?;
    let a00d = sys
        .a00d
        .as_ref()
        .ok_or_else(|| ModelError::DelayNotInOde("no delayed ODE term present".into()))?;
    if sys.b_d.is_some() || !sys.pde.delays.is_empty() {
        return Err(ModelError::DelayNotInOde(
            "system also carries boundary or interior PDE delays".into(),
        ));
    }
    let tau = sys.tau.expect("validated: delayed term implies delay");
    let n0 = sys.n0();
    let grow = LayoutGrow::new(sys.pde.orders, n0);
    let new_orders = grow.new;
    let domain = sys.pde.domain;
    let h = domain.len();

    let mut pde = DelayedPde1D::zero(
        new_orders,
        domain,
        n0,
        sys.pde.n_w,
        sys.pde.n_bc + n0,
    );
    pde.a_p = grow.map_dynamics(&sys.pde.a_p);
    // Transport dynamics for the appended history states: φ_t = −(h/τ) φ_x.
    for i in 0..n0 {
        let k = grow.extra_state(i);
        pde.a_p.set(k, new_orders.int_d1(k), Poly::constant(-h / tau));
    }
    pde.b_z = {
        let mut m = PolyMatrix::zeros(new_orders.n_u(), n0, domain);
        for r in 0..sys.pde.b_z.rows() {
            for c in 0..n0 {
                m.set(grow.state(r), c, sys.pde.b_z.get(r, c).clone());
            }
        }
        m
    };
    pde.e_p = grow.map_int(&sys.pde.e_p, pde.n_bc, 0);
    pde.e_b = grow.map_bf(&sys.pde.e_b, pde.n_bc, 0);
    for (r, row) in sys.pde.e_z.iter().enumerate() {
        pde.e_z[r].clone_from_slice(row);
    }
    // Entry conditions φ_i(a) − w_i = 0.
    for i in 0..n0 {
        let r = sys.pde.n_bc + i;
        pde.e_b[r][new_orders.bf_val(0, grow.extra_state(i))] = 1.0;
        pde.e_z[r][i] = -1.0;
    }
    pde.c_wp = grow.map_int(&sys.pde.c_wp, sys.pde.n_w, 0);
    pde.c_wb = grow.map_bf(&sys.pde.c_wb, sys.pde.n_w, 0);
    pde.d_wz = sys.pde.d_wz.clone();

    // ODE: delayed self-term becomes a tap on the history trace at b.
    let mut a01 = grow.map_bf(&sys.a01, n0, 0);
    for r in 0..n0 {
        for (i, col) in a00d[r].iter().enumerate() {
            a01[r][new_orders.bf_val(1, grow.extra_state(i))] += col;
        }
    }

    let one_d = CoupledOdePde1D {
        a00: sys.a00.clone(),
        a00d: None,
        a01,
        pde,
        b_d: None,
        tau: None,
    };
    one_d.validate()?;
    let wiring = (0..n0)
        .map(|i| PortWire {
            tau,
            source: format!("ODE state w{i} delayed"),
            target: format!("history state u{}", grow.extra_state(i)),
        })
        .collect();
    Ok(ExpandedSystem {
        one_d,
        transport: None,
        wiring,
        history: HistoryKind::ConstantExtension,
        implied_bc: Vec::new(),
    })
}

/// Replace a delayed boundary-trace term `b_d·Λu(t−τ)` by 1D transport
/// (history) states.
///
/// Each trace referenced by a nonzero column of `b_d` gets a history state
/// `φ(t,x) = trace(t − τ(x−a)/(b−a))`, with entry condition `φ(t,a) = trace`
/// and transport dynamics `φ_t = −((b−a)/τ) φ_x`.
///
/// When every trace appearing in a delayed row is the value trace of a state
/// that is the exact time derivative of another state — except for terms with
/// no time antiderivative among the traces — the row is integrated in time:
/// the antiderivative terms move to the parent states' traces and histories,
/// the remaining terms define a new ODE state `u0` with `u̇0` equal to their
/// sum, and the imposed row becomes the definition of `u0`. The original row
/// then holds as a differential consequence and is recorded in `implied_bc`.
/// Otherwise the delayed term is redirected directly to the history trace at
/// the right endpoint.
pub fn rewrite_boundary_delay(sys: &CoupledOdePde1D) -> Result<ExpandedSystem, ModelError> {
    sys.validate()?;
    let bd = sys
        .b_d
        .as_ref()
        .ok_or_else(|| ModelError::DelayNotInBc("no delayed boundary term present".into()))?;
    if sys.a00d.is_some() || !sys.pde.delays.is_empty() {
        return Err(ModelError::DelayNotInBc(
            "system also carries ODE or interior PDE delays".into(),
        ));
    }
    let tau = sys.tau.expect("validated: delayed term implies delay");
    let old = sys.pde.orders;
    let bf_layout = old.bf_layout();
    let domain = sys.pde.domain;
    let h = domain.len();
    let n0 = sys.n0();

    // Delayed trace columns actually referenced.
    let referenced: Vec<usize> = (0..old.n_bf())
        .filter(|c| bd.iter().any(|row| row[*c] != 0.0))
        .collect();
    if referenced.is_empty() {
        // Nothing delayed: the system is already delay-free.
        let mut one_d = sys.clone();
        one_d.b_d = None;
        one_d.tau = None;
        return Ok(ExpandedSystem {
            one_d,
            transport: None,
            wiring: Vec::new(),
            history: HistoryKind::ConstantExtension,
            implied_bc: Vec::new(),
        });
    }

    // Decide whether the time-integration path applies: every delayed trace
    // must be the value trace of a state with a known time antiderivative
    // among the states, and delayed rows must be free of interior and input
    // terms.
    let delayed_rows: Vec<usize> =
        (0..sys.pde.n_bc).filter(|r| bd[*r].iter().any(|v| *v != 0.0)).collect();
    let parent_of = |c: usize| -> Option<usize> {
        let (_, d, k) = bf_layout[c];
        if d != 0 {
            return None;
        }
        (0..old.n_u()).find(|p| sys.pde.time_derivative_of(*p) == Some(k))
    };
    let mut integrable = true;
    for &c in &referenced {
        if parent_of(c).is_none() {
            integrable = false;
        }
    }
    for &r in &delayed_rows {
        if !sys.pde.e_p.row_is_zero(r) || sys.pde.e_z[r].iter().any(|v| *v != 0.0) {
            integrable = false;
        }
    }

    // Histories to introduce, in order: for the integration path, each
    // referenced trace contributes its parent's history followed by its own;
    // otherwise just its own. Keyed by (side, deriv, state) in the old layout.
    let mut hist_traces: Vec<(usize, usize, usize)> = Vec::new();
    let push_unique = |v: &mut Vec<(usize, usize, usize)>, t: (usize, usize, usize)| {
        if !v.contains(&t) {
            v.push(t);
        }
    };
    for &c in &referenced {
        let (side, d, k) = bf_layout[c];
        if integrable {
            let p = parent_of(c).expect("integrable implies parent");
            push_unique(&mut hist_traces, (side, 0, p));
        }
        push_unique(&mut hist_traces, (side, d, k));
    }
    let extra = hist_traces.len();
    let grow = LayoutGrow::new(old, extra);
    let new_orders = grow.new;
    let hist_index = |t: (usize, usize, usize)| -> usize {
        grow.extra_state(hist_traces.iter().position(|x| *x == t).expect("known history"))
    };

    // New ODE states: one per delayed row on the integration path.
    let n0_new = n0 + if integrable { delayed_rows.len() } else { 0 };
    let n_bc_new = sys.pde.n_bc + extra;
    let mut pde = DelayedPde1D::zero(new_orders, domain, n0_new, sys.pde.n_w, n_bc_new);

    pde.a_p = grow.map_dynamics(&sys.pde.a_p);
    for i in 0..extra {
        let k = grow.extra_state(i);
        pde.a_p.set(k, new_orders.int_d1(k), Poly::constant(-h / tau));
    }
    for r in 0..sys.pde.b_z.rows() {
        for c in 0..n0 {
            pde.b_z.set(grow.state(r), c, sys.pde.b_z.get(r, c).clone());
        }
    }
    pde.e_p = grow.map_int(&sys.pde.e_p, n_bc_new, 0);
    pde.e_b = grow.map_bf(&sys.pde.e_b, n_bc_new, 0);
    for (r, row) in sys.pde.e_z.iter().enumerate() {
        pde.e_z[r][..n0].clone_from_slice(row);
    }
    pde.c_wp = grow.map_int(&sys.pde.c_wp, sys.pde.n_w, 0);
    pde.c_wb = grow.map_bf(&sys.pde.c_wb, sys.pde.n_w, 0);
    pde.d_wz = {
        let mut m = mat_zeros(sys.pde.n_w, n0_new);
        for (r, row) in sys.pde.d_wz.iter().enumerate() {
            m[r][..n0].clone_from_slice(row);
        }
        m
    };

    // Entry conditions: φ(a) − trace = 0.
    for (i, &(side, d, k)) in hist_traces.iter().enumerate() {
        let r = sys.pde.n_bc + i;
        let kk = grow.state(k);
        pde.e_b[r][new_orders.bf_val(0, grow.extra_state(i))] = 1.0;
        let src = if d == 0 {
            new_orders.bf_val(side, kk)
        } else {
            new_orders.bf_d1(side, kk)
        };
        pde.e_b[r][src] -= 1.0;
    }

    let mut a00 = mat_zeros(n0_new, n0_new);
    for (r, row) in sys.a00.iter().enumerate() {
        a00[r][..n0].clone_from_slice(row);
    }
    let mut a01 = grow.map_bf(&sys.a01, n0_new, 0);
    let mut implied_bc = Vec::new();

    if integrable {
        for (j, &r) in delayed_rows.iter().enumerate() {
            let ode = n0 + j;
            // Record the original row, with the delayed part redirected to the
            // histories' right-endpoint traces, as an implied row.
            let mut implied = vec![0.0; new_orders.n_bf()];
            for c in 0..old.n_bf() {
                implied[grow.bf_col(c)] += sys.pde.e_b[r][c];
                if bd[r][c] != 0.0 {
                    implied[new_orders.bf_val(1, hist_index(bf_layout[c]))] += bd[r][c];
                }
            }
            implied_bc.push(ImpliedBcRow { trace_row: implied, ode_row: vec![0.0; n0_new] });

            // Imposed row: u0 plus the time antiderivative of every
            // integrable term; terms without an antiderivative feed u̇0.
            let mut row = vec![0.0; new_orders.n_bf()];
            for c in 0..old.n_bf() {
                let (side, d, k) = bf_layout[c];
                let coeff = sys.pde.e_b[r][c];
                if coeff != 0.0 {
                    if d == 0 {
                        if let Some(p) = (0..old.n_u())
                            .find(|p| sys.pde.time_derivative_of(*p) == Some(k))
                        {
                            row[new_orders.bf_val(side, grow.state(p))] += coeff;
                        } else {
                            a01[ode][grow.bf_col(c)] += coeff;
                        }
                    } else {
                        a01[ode][grow.bf_col(c)] += coeff;
                    }
                }
                let dcoeff = bd[r][c];
                if dcoeff != 0.0 {
                    let p = parent_of(c).expect("integrable");
                    row[new_orders.bf_val(1, hist_index((side, 0, p)))] += dcoeff;
                }
            }
            pde.e_b[r] = row;
            pde.e_z[r][ode] = 1.0;
        }
    } else {
        for &r in &delayed_rows {
            for c in 0..old.n_bf() {
                if bd[r][c] != 0.0 {
                    pde.e_b[r][new_orders.bf_val(1, hist_index(bf_layout[c]))] += bd[r][c];
                }
            }
        }
    }

    let one_d = CoupledOdePde1D { a00, a00d: None, a01, pde, b_d: None, tau: None };
    one_d.validate()?;
    let wiring = hist_traces
        .iter()
        .enumerate()
        .map(|(i, &(side, d, k))| PortWire {
            tau,
            source: format!("trace {} delayed", trace_name(&old, side, d, k)),
            target: format!("history state u{}", grow.extra_state(i)),
        })
        .collect();
    Ok(ExpandedSystem {
        one_d,
        transport: None,
        wiring,
        history: HistoryKind::ConstantExtension,
        implied_bc,
    })
}

// ---------------------------------------------------------------------------
// Coupled declarative pair for PIE conversion
// ---------------------------------------------------------------------------

/// A DDE feeding its output `z` into the input channel of a delayed PDE,
/// whose output `w` in turn drives the DDE input: the declarative source for
/// the coupled ODE-PDE-to-PIE pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdeDpde {
    pub dde: Dde,
    pub pde: DelayedPde1D,
}

impl DdeDpde {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.dde.validate()?;
        self.pde.validate()?;
        if self.pde.n_z != self.dde.n_z || self.pde.n_w != self.dde.n_w {
            return Err(ModelError::Shape(format!(
                "coupling channels mismatch: PDE consumes {} / produces {}, DDE produces {} / consumes {}",
                self.pde.n_z, self.pde.n_w, self.dde.n_z, self.dde.n_w
            )));
        }
        Ok(())
    }
}

/// View a delay-free coupled ODE–PDE system as a [`DdeDpde`] pair: the ODE
/// becomes a (delay-free) DDE with identity output `z = w` and input
/// `ẇ += I·w_in`, and the trace coupling `a01` becomes a boundary output tap
/// of the PDE.
pub fn coupled_to_dde_dpde(sys: &CoupledOdePde1D) -> Result<DdeDpde, ModelError> {
    sys.validate()?;
    if !sys.is_delay_free() {
        return Err(ModelError::Invalid(
            "coupled system still carries delays; apply a rewrite first".into(),
        ));
    }
    let n0 = sys.n0();
    let mut dde = Dde::zero(n0, n0, n0);
    dde.a = sys.a00.clone();
    dde.b_w = mat_identity(n0);
    dde.c_z = mat_identity(n0);
    let mut pde = sys.pde.clone();
    pde.n_w = n0;
    pde.c_wp = PolyMatrix::zeros(n0, pde.orders.n_int(), pde.domain);
    pde.c_wb = sys.a01.clone();
    pde.d_wz = mat_zeros(n0, n0);
    Ok(DdeDpde { dde, pde })
}

// ---------------------------------------------------------------------------
// Named example systems
// ---------------------------------------------------------------------------

/// Reaction–diffusion equation on `[0,π]` with delayed reaction:
/// `u_t = u_xx + r·u − u(t−τ)`, `u(0) = u(π) = 0`.
pub fn heat_example(r: f64, tau: f64) -> Dpde2 {
    let domain = Domain::new(0.0, std::f64::consts::PI);
    Dpde2 {
        n: 1,
        domain,
        a: PolyMatrix::from_const(&[vec![r, 0.0, 1.0]], domain),
        a_d: PolyMatrix::from_const(&[vec![-1.0, 0.0, 0.0]], domain),
        b: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
        tau,
    }
}

/// Boundary-damped wave equation on `[0,1]` in first-order form, with the
/// damping split between an instantaneous and a delayed velocity trace:
/// states `u1` (position, order 2) and `u2` (velocity, order 1) with
/// `∂t u1 = u2`, `∂t u2 = ∂x² u1`, `u1(0) = u2(0) = 0` and
/// `∂x u1(1) = (1−μ)·u2(1) + μ·u2(t−τ, 1)`.
pub fn wave_example(mu: f64, tau: f64) -> CoupledOdePde1D {
    let domain = Domain::new(0.0, 1.0);
    let orders = GpdeOrders::new(0, 1, 1); // u2 (order 1), u1 (order 2)
    let (u2, u1) = (0usize, 1usize);
    let mut sys = CoupledOdePde1D::zero(0, orders, domain, 3);
    sys.pde.a_p.set(u2, orders.int_d2(u1), Poly::constant(1.0));
    sys.pde.a_p.set(u1, orders.int_val(u2), Poly::constant(1.0));
    sys.pde.e_b[0][orders.bf_val(0, u1)] = 1.0;
    sys.pde.e_b[1][orders.bf_val(0, u2)] = 1.0;
    sys.pde.e_b[2][orders.bf_d1(1, u1)] = 1.0;
    sys.pde.e_b[2][orders.bf_val(1, u2)] = -(1.0 - mu);
    let mut bd = mat_zeros(3, orders.n_bf());
    bd[2][orders.bf_val(1, u2)] = -mu;
    sys.b_d = Some(bd);
    sys.tau = Some(tau);
    sys
}

/// Scalar DDE `u̇ = −u + u(t−τ)` with output `z = u` and no input.
pub fn dde_example(tau: f64) -> Dde {
    let mut dde = Dde::zero(1, 0, 1);
    dde.a = vec![vec![-1.0]];
    dde.c_z = vec![vec![1.0]];
    dde.delays.push(DdeDelay { tau, a_j: vec![vec![1.0]], c_zj: vec![vec![0.0]] });
    dde
}

/// Coupled DDE–PDE pair: the DDE of [`dde_example`] driving, through its
/// output `z = u`, the boundary of the delayed reaction–diffusion equation
/// `u_t = u_xx + 10u − 3u(t−τ)` on `[0,1]` with `u(0) = 0`, `u(1) = z`.
pub fn dde_dpde_example(tau: f64) -> DdeDpde {
    let dde = dde_example(tau);
    let domain = Domain::new(0.0, 1.0);
    let orders = GpdeOrders::new(0, 0, 1);
    let mut pde = DelayedPde1D::zero(orders, domain, 1, 0, 2);
    pde.a_p = PolyMatrix::from_const(&[vec![10.0, 0.0, 1.0]], domain);
    pde.e_b[0][orders.bf_val(0, 0)] = 1.0; // u(0) = 0
    pde.e_b[1][orders.bf_val(1, 0)] = 1.0; // u(1) − z = 0
    pde.e_z[1][0] = -1.0;
    let mut d = PdeDelay::zero(&pde, tau);
    d.a_pd = PolyMatrix::from_const(&[vec![-3.0, 0.0, 0.0]], domain);
    pde.delays.push(d);
    DdeDpde { dde, pde }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bookkeeping_matches_hand_count() {
        let o = GpdeOrders::new(1, 2, 3);
        assert_eq!(o.n_u(), 6);
        assert_eq!(o.n_int(), 6 + 5 + 3);
        assert_eq!(o.n_core(), 2 + 6);
        assert_eq!(o.n_bf(), 16);
        assert_eq!(o.int_layout().len(), o.n_int());
        assert_eq!(o.bf_layout().len(), o.n_bf());
        // Second derivative of the last state sits in the last interior row.
        assert_eq!(o.int_d2(5), o.n_int() - 1);
        // Derivative trace of the last state at b sits in the last trace row.
        assert_eq!(o.bf_d1(1, 5), o.n_bf() - 1);
    }

    #[test]
    fn heat_example_validates_and_expands() {
        let sys = heat_example(1.9, 1.0);
        sys.validate().unwrap();
        let exp = expand_delay_dynamics(&sys).unwrap();
        let t = exp.transport.expect("interior delay yields a 2D channel");
        assert_eq!(t.tau, 1.0);
        assert_eq!(t.tap.rows(), 1);
        assert_eq!(t.tap.cols(), 3);
        assert!(exp.one_d.pde.delays.is_empty());
        assert_eq!(exp.wiring.len(), 1);
    }

    #[test]
    fn expand_zero_delay_coupling_has_zero_tap() {
        let mut sys = heat_example(1.9, 1.0);
        sys.a_d = PolyMatrix::zeros(1, 3, sys.domain);
        let exp = expand_delay_dynamics(&sys).unwrap();
        assert!(exp.transport.unwrap().tap.is_zero());
    }

    #[test]
    fn expand_port_dimension_is_three_n() {
        let domain = Domain::new(0.0, 1.0);
        let sys = Dpde2 {
            n: 2,
            domain,
            a: PolyMatrix::from_const(&[vec![0.0; 6], vec![0.0; 6]], domain),
            a_d: PolyMatrix::identity(2, domain)
                .hcat(&PolyMatrix::zeros(2, 4, domain))
                .unwrap(),
            b: mat_zeros(4, 8)
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut r = r.clone();
                    r[i] = 1.0;
                    r
                })
                .collect(),
            tau: 0.5,
        };
        let exp = expand_delay_dynamics(&sys).unwrap();
        assert_eq!(exp.transport.unwrap().tap.cols(), 6);
    }

    #[test]
    fn ode_delay_rewrite_of_pure_dde() {
        // u̇ = −u + u(t−τ) as an ODE with no PDE part: the rewrite introduces
        // one history state on [0,1] with entry condition φ(0) = u.
        let domain = Domain::new(0.0, 1.0);
        let mut sys = CoupledOdePde1D::zero(1, GpdeOrders::new(0, 0, 0), domain, 0);
        sys.a00 = vec![vec![-1.0]];
        sys.a00d = Some(vec![vec![1.0]]);
        sys.tau = Some(0.3);
        let exp = rewrite_ode_delay(&sys).unwrap();
        let d = &exp.one_d;
        assert!(d.is_delay_free());
        assert_eq!(d.pde.orders, GpdeOrders::new(0, 1, 0));
        // Transport speed 1/τ.
        let o = d.pde.orders;
        assert_eq!(*d.pde.a_p.get(0, o.int_d1(0)), Poly::constant(-1.0 / 0.3));
        // Entry condition φ(0) − u = 0.
        assert_eq!(d.pde.e_b[0][o.bf_val(0, 0)], 1.0);
        assert_eq!(d.pde.e_z[0][0], -1.0);
        // Delayed term taps φ(1).
        assert_eq!(d.a01[0][o.bf_val(1, 0)], 1.0);
        assert_eq!(d.a00, vec![vec![-1.0]]);
    }

    #[test]
    fn ode_delay_rewrite_with_zero_a00d_leaves_history_inert() {
        let domain = Domain::new(0.0, 1.0);
        let mut sys = CoupledOdePde1D::zero(1, GpdeOrders::new(0, 0, 0), domain, 0);
        sys.a00d = Some(vec![vec![0.0]]);
        sys.tau = Some(1.0);
        let exp = rewrite_ode_delay(&sys).unwrap();
        assert!(mat_is_zero(&exp.one_d.a01));
        assert_eq!(exp.one_d.pde.orders.n2, 1);
    }

    #[test]
    fn boundary_delay_rewrite_reproduces_wave_expansion() {
        let (mu, tau) = (0.45, 1.0);
        let sys = wave_example(mu, tau);
        sys.validate().unwrap();
        let exp = rewrite_boundary_delay(&sys).unwrap();
        let d = &exp.one_d;
        // State set {u0; u2, φ1, φ2 (order 1); u1 (order 2)}.
        assert_eq!(d.n0(), 1);
        let o = d.pde.orders;
        assert_eq!(o, GpdeOrders::new(0, 3, 1));
        let (u2, phi1, phi2, u1) = (0usize, 1, 2, 3);
        // Dynamics: ∂t u2 = ∂x²u1, ∂t u1 = u2, transports at speed 1/τ.
        assert_eq!(*d.pde.a_p.get(u2, o.int_d2(u1)), Poly::constant(1.0));
        assert_eq!(*d.pde.a_p.get(u1, o.int_val(u2)), Poly::constant(1.0));
        assert_eq!(*d.pde.a_p.get(phi1, o.int_d1(phi1)), Poly::constant(-1.0 / tau));
        assert_eq!(*d.pde.a_p.get(phi2, o.int_d1(phi2)), Poly::constant(-1.0 / tau));
        // ODE: u̇0 = ∂x u1(1).
        assert_eq!(d.a01[0][o.bf_d1(1, u1)], 1.0);
        assert!(mat_is_zero(&d.a00));
        // Five imposed rows over five core values.
        assert_eq!(d.pde.n_bc, 5);
        let mut expect = mat_zeros(5, o.n_bf());
        let mut expect_z = mat_zeros(5, 1);
        expect[0][o.bf_val(0, u1)] = 1.0; // u1(0) = 0
        expect[1][o.bf_val(0, u2)] = 1.0; // u2(0) = 0
        // u0 − (1−μ)u1(1) − μφ1(1) = 0
        expect[2][o.bf_val(1, u1)] = -(1.0 - mu);
        expect[2][o.bf_val(1, phi1)] = -mu;
        expect_z[2][0] = 1.0;
        expect[3][o.bf_val(0, phi1)] = 1.0; // φ1(0) − u1(1) = 0
        expect[3][o.bf_val(1, u1)] = -1.0;
        expect[4][o.bf_val(0, phi2)] = 1.0; // φ2(0) − u2(1) = 0
        expect[4][o.bf_val(1, u2)] = -1.0;
        assert_eq!(d.pde.e_b, expect);
        assert_eq!(d.pde.e_z, expect_z);
        // Sixth row implied: ∂x u1(1) − (1−μ)u2(1) − μφ2(1) = 0.
        assert_eq!(exp.implied_bc.len(), 1);
        let imp = &exp.implied_bc[0];
        assert_eq!(imp.trace_row[o.bf_d1(1, u1)], 1.0);
        assert_eq!(imp.trace_row[o.bf_val(1, u2)], -(1.0 - mu));
        assert_eq!(imp.trace_row[o.bf_val(1, phi2)], -mu);
        assert_eq!(imp.trace_row.iter().filter(|v| **v != 0.0).count(), 3);
        assert!(d.is_delay_free());
        d.validate().unwrap();
    }

    #[test]
    fn boundary_delay_rewrite_zero_bd_is_identity() {
        let mut sys = wave_example(0.3, 1.0);
        sys.b_d = Some(mat_zeros(3, sys.pde.orders.n_bf()));
        let exp = rewrite_boundary_delay(&sys).unwrap();
        assert_eq!(exp.one_d.pde.orders, sys.pde.orders);
        assert!(exp.wiring.is_empty());
    }

    #[test]
    fn boundary_delay_rewrite_generic_order2_state_size() {
        // Single order-2 state with all four traces delayed and no integrator
        // chain: the direct path introduces four history states.
        let domain = Domain::new(0.0, 1.0);
        let orders = GpdeOrders::new(0, 0, 1);
        let mut sys = CoupledOdePde1D::zero(0, orders, domain, 2);
        sys.pde.a_p.set(0, orders.int_d2(0), Poly::constant(1.0));
        sys.pde.e_b[0][orders.bf_val(0, 0)] = 1.0;
        sys.pde.e_b[1][orders.bf_val(1, 0)] = 1.0;
        let mut bd = mat_zeros(2, orders.n_bf());
        bd[1] = vec![0.125, 0.25, -0.5, 0.0625];
        sys.b_d = Some(bd);
        sys.tau = Some(2.0);
        let exp = rewrite_boundary_delay(&sys).unwrap();
        assert_eq!(exp.one_d.pde.orders.n2, 4);
        assert!(exp.implied_bc.is_empty());
        // Delayed entries moved onto the history traces at the right end.
        let o = exp.one_d.pde.orders;
        let row = &exp.one_d.pde.e_b[1];
        let moved: f64 = (0..4).map(|i| row[o.bf_val(1, i)].abs()).sum();
        assert!((moved - (0.125 + 0.25 + 0.5 + 0.0625)).abs() < 1e-12);
        exp.one_d.validate().unwrap();
    }

    #[test]
    fn rewrite_guards_reject_misplaced_delays() {
        let sys = wave_example(0.4, 1.0);
        assert!(matches!(rewrite_ode_delay(&sys), Err(ModelError::DelayNotInOde(_))));
        let domain = Domain::new(0.0, 1.0);
        let mut ode = CoupledOdePde1D::zero(1, GpdeOrders::new(0, 0, 0), domain, 0);
        ode.a00d = Some(vec![vec![1.0]]);
        ode.tau = Some(1.0);
        assert!(matches!(rewrite_boundary_delay(&ode), Err(ModelError::DelayNotInBc(_))));
    }

    #[test]
    fn dde_dpde_example_is_consistent() {
        let sys = dde_dpde_example(0.1);
        sys.validate().unwrap();
        assert_eq!(sys.dde.n_z, 1);
        assert_eq!(sys.pde.delays.len(), 1);
        // Boundary rows: u(0) = 0 and u(1) = z.
        assert_eq!(sys.pde.e_b, vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]);
        assert_eq!(sys.pde.e_z, vec![vec![0.0], vec![-1.0]]);
    }

    #[test]
    fn coupled_to_dde_dpde_moves_trace_coupling_to_output() {
        let exp = rewrite_boundary_delay(&wave_example(0.45, 1.0)).unwrap();
        let pair = coupled_to_dde_dpde(&exp.one_d).unwrap();
        pair.validate().unwrap();
        assert_eq!(pair.dde.n_u, 1);
        assert_eq!(pair.pde.c_wb, exp.one_d.a01);
        assert_eq!(pair.dde.b_w, mat_identity(1));
    }

    #[test]
    fn validate_reports_bad_shapes() {
        let mut sys = heat_example(1.9, 1.0);
        sys.b.pop();
        assert!(matches!(sys.validate(), Err(ModelError::Shape(_))));
        let mut dde = dde_example(0.5);
        dde.delays.push(DdeDelay {
            tau: 0.5,
            a_j: vec![vec![0.0]],
            c_zj: vec![vec![0.0]],
        });
        assert!(matches!(dde.validate(), Err(ModelError::Invalid(_))));
    }
}
