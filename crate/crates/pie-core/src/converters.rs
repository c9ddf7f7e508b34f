//! PDE/ODE → PIE constructions.
//!
//! The central object is the [`FundamentalMap`]: for a mixed-order 1D PDE
//! state `u` subject to well-posed boundary conditions, it packages the PI
//! operators recovering `u` (and its interior and boundary stacks) from the
//! fundamental state `v` — the stack of highest spatial derivatives — and
//! from the boundary input `z`.
//!
//! On top of the fundamental map, this module assembles Partial Integral
//! Equation (PIE) representations for
//!
//! * second-order PDEs with interior delay ([`dpde_to_pie`], directly, and
//!   [`pde1d_to_pie`] + [`transport2d_to_pie`] as an interconnection of the
//!   delay-free part with a 2D transport channel),
//! * delay differential equations ([`dde_to_pie`]),
//! * general mixed-order delayed PDEs ([`delayed_pde_to_pie`]), and
//! * coupled DDE–PDE pairs ([`dde_dpde_to_pie`]).

use crate::pde_models::{
    mat_shape, Dde, DdeDpde, DelayedPde1D, Dpde2, ExpandedSystem, GpdeOrders, Mat, ModelError,
};
use crate::pi_algebra::{PiError, PiOperator, ZSpace};
use crate::pie_system::{pie_interconnect, PieSystem};
use crate::polykernel::{Bound, Domain, Poly, PolyError, PolyMatrix, Var, DELAY_DOMAIN};
use ndarray::Array2;
use ndarray_linalg::{Inverse, SVD};
use thiserror::Error;

/// Condition-number threshold beyond which a boundary solve is rejected.
pub const ILL_POSED_COND: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("ill-posed boundary conditions: boundary solve condition number {cond:.3e}")]
    IllPosedBC { cond: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pi(#[from] PiError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

// ---------------------------------------------------------------------------
// Small operator builders
// ---------------------------------------------------------------------------

fn fin(n: usize, domain: Domain) -> ZSpace {
    ZSpace::finite(n, domain)
}

fn l2x(n: usize, domain: Domain) -> ZSpace {
    ZSpace::new(0, 0, n, 0, domain)
}

/// Multiplier operator on `L2[x]`: `(Pf)(x) = m(x) f(x)`.
fn op_mult_x(m: &PolyMatrix) -> Result<PiOperator, PiError> {
    let d = m.domain();
    let mut p = PiOperator::zero(&l2x(m.cols(), d), &l2x(m.rows(), d));
    p.set_part(2, 2, 0, 0, m.clone())?;
    Ok(p)
}

/// Embedding `R^n → L2[x]` with kernel `m(x)`.
fn op_embed_x(m: &PolyMatrix) -> Result<PiOperator, PiError> {
    let d = m.domain();
    let mut p = PiOperator::zero(&fin(m.cols(), d), &l2x(m.rows(), d));
    p.set_part(2, 0, 0, 0, m.clone())?;
    Ok(p)
}

/// Full integration `L2[x] → R^n` with kernel `m(θ)`.
fn op_fullint_x(m: &PolyMatrix) -> Result<PiOperator, PiError> {
    let d = m.domain();
    let mut p = PiOperator::zero(&l2x(m.cols(), d), &fin(m.rows(), d));
    p.set_part(0, 2, 0, 0, m.clone())?;
    Ok(p)
}

/// Constant finite-dimensional operator `R^cols → R^rows`; dimensions are
/// passed explicitly because an empty `Mat` carries no column count.
fn op_const0(m: &Mat, rows: usize, cols: usize, domain: Domain) -> Result<PiOperator, PiError> {
    let mut p = PiOperator::zero(&fin(cols, domain), &fin(rows, domain));
    let mut k = PolyMatrix::zeros(rows, cols, domain);
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                k.set(i, j, Poly::constant(*v));
            }
        }
    }
    p.set_part(0, 0, 0, 0, k)?;
    Ok(p)
}

fn x_minus(c: f64) -> Poly {
    Poly::var(Var::X).add(&Poly::constant(-c))
}

fn x_minus_theta() -> Poly {
    Poly::var(Var::X).add(&Poly::var(Var::Theta).scale(-1.0))
}

fn to_array(m: &PolyMatrix) -> Array2<f64> {
    let zero = [0.0; crate::polykernel::NVARS];
    Array2::from_shape_fn((m.rows(), m.cols()), |(i, j)| m.get(i, j).eval(&zero))
}

fn from_array(a: &Array2<f64>, domain: Domain) -> PolyMatrix {
    let mut m = PolyMatrix::zeros(a.nrows(), a.ncols(), domain);
    for ((i, j), v) in a.indexed_iter() {
        m.set(i, j, Poly::constant(*v));
    }
    m
}

/// Invert a constant square matrix, reporting its condition number; rejects
/// condition numbers above [`ILL_POSED_COND`].
fn checked_inverse(m: &Array2<f64>) -> Result<(Array2<f64>, f64), ConvertError> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Array2::zeros((0, 0)), 1.0));
    }
    let (_, sv, _) = m.svd(false, false).map_err(|_| ConvertError::IllPosedBC { cond: f64::INFINITY })?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > ILL_POSED_COND {
        return Err(ConvertError::IllPosedBC { cond });
    }
    let inv = m.inv().map_err(|_| ConvertError::IllPosedBC { cond })?;
    Ok((inv, cond))
}

// ---------------------------------------------------------------------------
// Fundamental maps
// ---------------------------------------------------------------------------

/// PI operators recovering a constrained PDE state from its fundamental
/// (highest-derivative) state `v ∈ L2` and boundary input `z ∈ R^{n_z}`:
///
/// * `u = t v + t_z z` — the state itself;
/// * `D_int u = t_int v + t_int_z z` — the interior stack
///   `[u; ∂x u≥1; ∂x² u≥2]`;
/// * `Λu = t_bf v + t_bf_z z` — the boundary trace stack.
///
/// Differentiating the reconstruction recovers `v` exactly, and the boundary
/// conditions hold for every `v, z`; both identities are enforced by the
/// oracle tests.
#[derive(Debug, Clone)]
pub struct FundamentalMap {
    pub orders: GpdeOrders,
    pub domain: Domain,
    pub n_z: usize,
    /// `L2^{n_u} → L2^{n_u}`.
    pub t: PiOperator,
    /// `R^{n_z} → L2^{n_u}`.
    pub t_z: PiOperator,
    /// `L2^{n_u} → L2^{n_int}`.
    pub t_int: PiOperator,
    /// `R^{n_z} → L2^{n_int}`.
    pub t_int_z: PiOperator,
    /// `L2^{n_u} → R^{n_bf}`.
    pub t_bf: PiOperator,
    /// `R^{n_z} → R^{n_bf}`.
    pub t_bf_z: PiOperator,
    /// Condition number of the boundary-core solve.
    pub cond: f64,
}

/// Reconstruction building blocks shared by the fundamental-map builders:
/// with core boundary values `c` (traces at the left endpoint of the
/// order-≥1 values and order-2 derivatives) and fundamental state `v`,
///
/// `u(x) = kc(x)·c + m0·v(x) + ∫_a^x l0(x,θ)·v(θ)dθ`,
///
/// and analogously for the interior stack (`dint_*`) and the boundary stack
/// (`hb`, `qb`).
struct Blocks {
    kc: PolyMatrix,
    m0: PolyMatrix,
    l0: PolyMatrix,
    dint_k: PolyMatrix,
    dint_m: PolyMatrix,
    dint_l: PolyMatrix,
    hb: PolyMatrix,
    qb: PolyMatrix,
}

fn reconstruction_blocks(o: &GpdeOrders, domain: Domain) -> Blocks {
    let (a, b) = (domain.a, domain.b);
    let (n_u, n_int, n_bf, n_core) = (o.n_u(), o.n_int(), o.n_bf(), o.n_core());
    let mut kc = PolyMatrix::zeros(n_u, n_core, domain);
    let mut m0 = PolyMatrix::zeros(n_u, n_u, domain);
    let mut l0 = PolyMatrix::zeros(n_u, n_u, domain);
    for k in 0..n_u {
        match o.order_of(k) {
            0 => m0.set(k, k, Poly::constant(1.0)),
            1 => {
                kc.set(k, o.bf_val(0, k), Poly::constant(1.0));
                l0.set(k, k, Poly::constant(1.0));
            }
            _ => {
                kc.set(k, o.bf_val(0, k), Poly::constant(1.0));
                kc.set(k, o.bf_d1(0, k), x_minus(a));
                l0.set(k, k, x_minus_theta());
            }
        }
    }
    let mut dint_k = PolyMatrix::zeros(n_int, n_core, domain);
    let mut dint_m = PolyMatrix::zeros(n_int, n_u, domain);
    let mut dint_l = PolyMatrix::zeros(n_int, n_u, domain);
    for (row, (d, k)) in o.int_layout().into_iter().enumerate() {
        match (d, o.order_of(k)) {
            (0, 0) => dint_m.set(row, k, Poly::constant(1.0)),
            (0, 1) => {
                dint_k.set(row, o.bf_val(0, k), Poly::constant(1.0));
                dint_l.set(row, k, Poly::constant(1.0));
            }
            (0, 2) => {
                dint_k.set(row, o.bf_val(0, k), Poly::constant(1.0));
                dint_k.set(row, o.bf_d1(0, k), x_minus(a));
                dint_l.set(row, k, x_minus_theta());
            }
            (1, 1) => dint_m.set(row, k, Poly::constant(1.0)),
            (1, 2) => {
                dint_k.set(row, o.bf_d1(0, k), Poly::constant(1.0));
                dint_l.set(row, k, Poly::constant(1.0));
            }
            (2, 2) => dint_m.set(row, k, Poly::constant(1.0)),
            _ => unreachable!("interior stack rows only list admissible derivative orders"),
        }
    }
    let mut hb = PolyMatrix::zeros(n_bf, n_core, domain);
    let mut qb = PolyMatrix::zeros(n_bf, n_u, domain);
    for (row, (side, d, k)) in o.bf_layout().into_iter().enumerate() {
        if side == 0 {
            // The core values are exactly the left-endpoint traces.
            let col = if d == 0 { o.bf_val(0, k) } else { o.bf_d1(0, k) };
            hb.set(row, col, Poly::constant(1.0));
            continue;
        }
        match (d, o.order_of(k)) {
            (0, 1) => {
                hb.set(row, o.bf_val(0, k), Poly::constant(1.0));
                qb.set(row, k, Poly::constant(1.0));
            }
            (0, 2) => {
                hb.set(row, o.bf_val(0, k), Poly::constant(1.0));
                hb.set(row, o.bf_d1(0, k), Poly::constant(b - a));
                qb.set(row, k, Poly::constant(b).add(&Poly::var(Var::Theta).scale(-1.0)));
            }
            (1, 2) => {
                hb.set(row, o.bf_d1(0, k), Poly::constant(1.0));
                qb.set(row, k, Poly::constant(1.0));
            }
            _ => unreachable!("trace stack rows only list admissible derivative orders"),
        }
    }
    Blocks { kc, m0, l0, dint_k, dint_m, dint_l, hb, qb }
}

/// Fundamental map for a mixed-order 1D PDE block with boundary conditions
/// `∫ e_p·D_int u dx + e_b·Λu + e_z z = 0` (only the BC data of `pde` is
/// used; delays and dynamics are ignored).
pub fn gpde1d_fundamental_map(pde: &DelayedPde1D) -> Result<FundamentalMap, ConvertError> {
    pde.validate()?;
    let o = pde.orders;
    let domain = pde.domain;
    let (n_u, n_int, n_bf, n_core) = (o.n_u(), o.n_int(), o.n_bf(), o.n_core());
    let n_z = pde.n_z;
    let blk = reconstruction_blocks(&o, domain);

    // Boundary-core solve: M c = −(∫ G(θ) v(θ) dθ + E_z z).
    let e_b = PolyMatrix::from_const(&pde.e_b, domain);
    let e_z = PolyMatrix::from_const(&pde.e_z, domain);
    let m_mat = e_b.matmul(&blk.hb)?.add(&pde.e_p.matmul(&blk.dint_k)?.integrate(
        Var::X,
        Bound::Const(domain.a),
        Bound::Const(domain.b),
    )?)?;
    let (minv, cond) = checked_inverse(&to_array(&m_mat))?;
    if m_mat.rows() != n_core {
        return Err(ConvertError::Model(ModelError::Shape(format!(
            "{} boundary rows for {n_core} core values",
            m_mat.rows()
        ))));
    }
    let minv = from_array(&minv, domain);

    let g = e_b
        .matmul(&blk.qb)?
        .add(&pde.e_p.matmul(&blk.dint_m)?.subs_var(Var::X, Var::Theta))?
        .add(&pde.e_p.matmul(&blk.dint_l)?.integrate(
            Var::X,
            Bound::Var(Var::Theta),
            Bound::Const(domain.b),
        )?)?;

    // Core-value corrections −(stack)·M⁻¹·(G or E_z) for each stack.
    let build = |kx: &PolyMatrix| -> Result<(PolyMatrix, PolyMatrix), ConvertError> {
        let neg = kx.matmul(&minv)?.scale(-1.0);
        Ok((neg.matmul(&g)?, neg.matmul(&e_z)?))
    };
    let (t_corr, tz_kernel) = build(&blk.kc)?;
    let (tint_corr, tintz_kernel) = build(&blk.dint_k)?;
    let (tbf_corr, tbfz_kernel) = build(&blk.hb)?;

    let vs = l2x(n_u, domain);
    let mut t = PiOperator::zero(&vs, &vs);
    t.set_part(2, 2, 0, 0, blk.m0.clone())?;
    t.set_part(2, 2, 1, 0, blk.l0.add(&t_corr)?)?;
    t.set_part(2, 2, 2, 0, t_corr)?;

    let mut t_int = PiOperator::zero(&vs, &l2x(n_int, domain));
    t_int.set_part(2, 2, 0, 0, blk.dint_m.clone())?;
    t_int.set_part(2, 2, 1, 0, blk.dint_l.add(&tint_corr)?)?;
    t_int.set_part(2, 2, 2, 0, tint_corr)?;

    let mut t_bf = PiOperator::zero(&vs, &fin(n_bf, domain));
    t_bf.set_part(0, 2, 0, 0, blk.qb.add(&tbf_corr)?)?;

    let zsp = fin(n_z, domain);
    let mut t_z = PiOperator::zero(&zsp, &l2x(n_u, domain));
    t_z.set_part(2, 0, 0, 0, tz_kernel)?;
    let mut t_int_z = PiOperator::zero(&zsp, &l2x(n_int, domain));
    t_int_z.set_part(2, 0, 0, 0, tintz_kernel)?;
    let mut t_bf_z = PiOperator::zero(&zsp, &fin(n_bf, domain));
    t_bf_z.set_part(0, 0, 0, 0, tbfz_kernel)?;

    Ok(FundamentalMap { orders: o, domain, n_z, t, t_z, t_int, t_int_z, t_bf, t_bf_z, cond })
}

/// Fundamental map for a pure second-order block `u ∈ H2^n` with boundary
/// conditions `B·[u(a); u_x(a); u(b); u_x(b)] = 0`, built from the closed
/// kernel formulas: with `K(x) = [I, (x−a)I]`, the upper kernel is
/// `T₂(x,θ) = −K(x)(BH)⁻¹BQ(θ)` and the lower kernel `T₁ = (x−θ)I + T₂`,
/// where `H` and `Q(θ)` express the boundary traces through the core values
/// and the fundamental state.
pub fn build_t1(b: &Mat, n: usize, domain: Domain) -> Result<FundamentalMap, ConvertError> {
    let o = GpdeOrders::new(0, 0, n);
    if mat_shape(b) != (2 * n, 4 * n) {
        return Err(ConvertError::Model(ModelError::Shape(format!(
            "boundary matrix: expected {}x{}, got {}x{}",
            2 * n,
            4 * n,
            mat_shape(b).0,
            mat_shape(b).1
        ))));
    }
    let blk = reconstruction_blocks(&o, domain);
    let bm = PolyMatrix::from_const(b, domain);
    let bh = bm.matmul(&blk.hb)?;
    let (inv, cond) = checked_inverse(&to_array(&bh))?;
    let minv = from_array(&inv, domain);
    let bq = bm.matmul(&blk.qb)?;
    let t2 = blk.kc.matmul(&minv)?.scale(-1.0).matmul(&bq)?;
    let t1 = PolyMatrix::diag_poly(n, &x_minus_theta(), domain).add(&t2)?;

    let vs = l2x(n, domain);
    let mut t = PiOperator::zero(&vs, &vs);
    t.set_part(2, 2, 1, 0, t1.clone())?;
    t.set_part(2, 2, 2, 0, t2.clone())?;

    // Interior stack: values from T₁/T₂, first derivatives from ∂x of the
    // kernels (the diagonal jump T₁(x,x) − T₂(x,x) vanishes), and a unit
    // multiplier for the second derivatives (the jump of the differentiated
    // kernels is the identity).
    let mut t_int = PiOperator::zero(&vs, &l2x(3 * n, domain));
    let zeros_n = PolyMatrix::zeros(n, n, domain);
    let stack = |top: &PolyMatrix, mid: &PolyMatrix| -> Result<PolyMatrix, PolyError> {
        top.vcat(mid)?.vcat(&zeros_n)
    };
    let mut mult = PolyMatrix::zeros(3 * n, n, domain);
    mult.add_at(2 * n, 0, &PolyMatrix::identity(n, domain))?;
    t_int.set_part(2, 2, 0, 0, mult)?;
    t_int.set_part(2, 2, 1, 0, stack(&t1, &t1.diff(Var::X))?)?;
    t_int.set_part(2, 2, 2, 0, stack(&t2, &t2.diff(Var::X))?)?;

    // Boundary stack: Λ = H c + ∫ Q(θ) v dθ with c = −(BH)⁻¹B∫Q v.
    let mut t_bf = PiOperator::zero(&vs, &fin(4 * n, domain));
    t_bf.set_part(0, 2, 0, 0, blk.qb.add(&blk.hb.matmul(&minv)?.scale(-1.0).matmul(&bq)?)?)?;

    let zsp = fin(0, domain);
    Ok(FundamentalMap {
        orders: o,
        domain,
        n_z: 0,
        t,
        t_z: PiOperator::zero(&zsp, &l2x(n, domain)),
        t_int,
        t_int_z: PiOperator::zero(&zsp, &l2x(3 * n, domain)),
        t_bf,
        t_bf_z: PiOperator::zero(&zsp, &fin(4 * n, domain)),
        cond,
    })
}

/// Lift a fundamental map's state reconstruction to the 2D transport
/// channel: `(T₂ψ)(s,·) = ∫₀ˢ (T ψ(ν,·)) dν`, an operator on `L2[s,x]`.
pub fn build_t2(t1map: &FundamentalMap) -> Result<PiOperator, PiError> {
    let n = t1map.orders.n_u();
    let d = t1map.domain;
    let sp = ZSpace::new(0, 0, 0, n, d);
    let mut p = PiOperator::zero(&sp, &sp);
    let src = t1map.t.block(2, 2);
    for px in 0..3 {
        let k = src.part(px, 0);
        if !k.is_zero() {
            p.set_part(3, 3, px, 1, k.clone())?;
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Second-order DPDE: direct assembly and split assembly
// ---------------------------------------------------------------------------

/// Kernel triple `(multiplier, lower, upper)` of `A(x)·D_int` pushed through
/// a pure-order-2 interior stack: multiplier `A(x)[0;0;I]` and kernels
/// `A(x)[T_j; ∂x T_j; 0]`.
fn order2_dyn_kernels(
    a: &PolyMatrix,
    fm: &FundamentalMap,
) -> Result<(PolyMatrix, PolyMatrix, PolyMatrix), PolyError> {
    let n = fm.orders.n_u();
    let d = fm.domain;
    let t1 = fm.t.block(2, 2).part(1, 0);
    let t2 = fm.t.block(2, 2).part(2, 0);
    let zeros_n = PolyMatrix::zeros(n, n, d);
    let stack = |k: &PolyMatrix| k.vcat(&k.diff(Var::X)).and_then(|s| s.vcat(&zeros_n));
    let mut eye = PolyMatrix::zeros(3 * n, n, d);
    eye.add_at(2 * n, 0, &PolyMatrix::identity(n, d))?;
    Ok((a.matmul(&eye)?, a.matmul(&stack(t1)?)?, a.matmul(&stack(t2)?)?))
}

/// PIE representation of a second-order PDE with interior delay, assembled
/// directly from the closed kernel formulas: state `(v, ψ)` over
/// `L2^n[x] × L2^n[s,x]` with mass operator `[T₁ 0; T₁ T₂]` and dynamics
/// `[A₁₁+A₁₁d, A₁₂; 0, −(1/τ)T₁]`.
pub fn dpde_to_pie(sys: &Dpde2) -> Result<PieSystem, ConvertError> {
    sys.validate()?;
    let n = sys.n;
    let d = sys.domain;
    let fm = build_t1(&sys.b, n, d)?;
    let t1 = fm.t.block(2, 2).part(1, 0).clone();
    let t2 = fm.t.block(2, 2).part(2, 0).clone();
    let (a0, a1, a2) = order2_dyn_kernels(&sys.a, &fm)?;
    let (a0d, a1d, a2d) = order2_dyn_kernels(&sys.a_d, &fm)?;

    let vs = ZSpace::new(0, 0, n, n, d);
    let mut t = PiOperator::zero(&vs, &vs);
    t.set_part(2, 2, 1, 0, t1.clone())?;
    t.set_part(2, 2, 2, 0, t2.clone())?;
    // 2D state mass: (T₁v)(x) embedded constantly in s, plus the s-Volterra
    // lift of T₁ acting on ψ.
    t.set_part(3, 2, 1, 0, t1.clone())?;
    t.set_part(3, 2, 2, 0, t2.clone())?;
    t.set_part(3, 3, 1, 1, t1.clone())?;
    t.set_part(3, 3, 2, 1, t2.clone())?;

    let mut a = PiOperator::zero(&vs, &vs);
    a.set_part(2, 2, 0, 0, a0.add(&a0d)?)?;
    a.set_part(2, 2, 1, 0, a1.add(&a1d)?)?;
    a.set_part(2, 2, 2, 0, a2.add(&a2d)?)?;
    // Delay channel tap: ∫₀¹ A₁₁d ψ(s,·) ds.
    a.set_part(2, 3, 0, 0, a0d)?;
    a.set_part(2, 3, 1, 0, a1d)?;
    a.set_part(2, 3, 2, 0, a2d)?;
    // Transport dynamics −(1/τ)T₁ applied pointwise in s.
    let r = -1.0 / sys.tau;
    a.set_part(3, 3, 1, 0, t1.scale(r))?;
    a.set_part(3, 3, 2, 0, t2.scale(r))?;

    Ok(PieSystem::autonomous(t, a))
}

fn split_parts(exp: &ExpandedSystem) -> Result<(Dpde2, f64), ConvertError> {
    let tr = exp.transport.as_ref().ok_or_else(|| {
        ConvertError::Model(ModelError::Invalid(
            "expanded system has no 2D transport channel".into(),
        ))
    })?;
    let o = exp.one_d.pde.orders;
    if exp.one_d.n0() != 0 || o.n1 != 0 || o.n2 != 0 {
        return Err(ConvertError::Model(ModelError::Invalid(
            "2D split supports pure order-2 PDE parts without ODE coupling".into(),
        )));
    }
    let n = o.n3;
    Ok((
        Dpde2 {
            n,
            domain: exp.one_d.pde.domain,
            a: exp.one_d.pde.a_p.clone(),
            a_d: tr.tap.clone(),
            b: exp.one_d.pde.e_b.clone(),
            tau: tr.tau,
        },
        tr.tau,
    ))
}

/// PIE representation of the delay-free 1D part of an expanded second-order
/// DPDE: `T₁ v̇ = A₁₁ v + p` with infinite-dimensional input `p` on the
/// feedback channel and output `q = v`.
pub fn pde1d_to_pie(exp: &ExpandedSystem) -> Result<PieSystem, ConvertError> {
    let (sys, _) = split_parts(exp)?;
    let d = sys.domain;
    let fm = build_t1(&sys.b, sys.n, d)?;
    let a11 = op_mult_x(&sys.a)?.compose(&fm.t_int)?;
    let sp = l2x(sys.n, d);
    let mut g = PieSystem::zero(sp, fin(0, d), sp, fin(0, d), sp);
    g.t = fm.t;
    g.a = a11;
    g.b_r = PiOperator::identity(&sp);
    g.c_q = PiOperator::identity(&sp);
    Ok(g)
}

/// PIE representation of the 2D transport part of an expanded second-order
/// DPDE: mass `T₁ v̇ + T₂ ψ̇` (via the feedback input `v`), dynamics
/// `−(1/τ)(T₁-lift)ψ`, output `p = A₁₁d v + A₁₂ ψ`.
pub fn transport2d_to_pie(exp: &ExpandedSystem) -> Result<PieSystem, ConvertError> {
    let (sys, tau) = split_parts(exp)?;
    let n = sys.n;
    let d = sys.domain;
    let fm = build_t1(&sys.b, n, d)?;
    let t1 = fm.t.block(2, 2).part(1, 0).clone();
    let t2 = fm.t.block(2, 2).part(2, 0).clone();
    let (a0d, a1d, a2d) = order2_dyn_kernels(&sys.a_d, &fm)?;

    let vs = ZSpace::new(0, 0, 0, n, d);
    let io = l2x(n, d);
    let mut g = PieSystem::zero(vs, fin(0, d), io, fin(0, d), io);
    g.t = build_t2(&fm)?;
    // Mass contribution of the entry state: (T₁ q)(x) embedded in s.
    let mut t_r = PiOperator::zero(&io, &vs);
    t_r.set_part(3, 2, 1, 0, t1.clone())?;
    t_r.set_part(3, 2, 2, 0, t2.clone())?;
    g.t_r = t_r;
    let r = -1.0 / tau;
    let mut a = PiOperator::zero(&vs, &vs);
    a.set_part(3, 3, 1, 0, t1.scale(r))?;
    a.set_part(3, 3, 2, 0, t2.scale(r))?;
    g.a = a;
    // Output tap p = A₁₁d v + ∫₀¹ A₁₁d-lift ψ ds.
    let mut c_q = PiOperator::zero(&vs, &io);
    c_q.set_part(2, 3, 0, 0, a0d.clone())?;
    c_q.set_part(2, 3, 1, 0, a1d.clone())?;
    c_q.set_part(2, 3, 2, 0, a2d.clone())?;
    g.c_q = c_q;
    let mut d_qr = PiOperator::zero(&io, &io);
    d_qr.set_part(2, 2, 0, 0, a0d)?;
    d_qr.set_part(2, 2, 1, 0, a1d)?;
    d_qr.set_part(2, 2, 2, 0, a2d)?;
    g.d_qr = d_qr;
    Ok(g)
}

// ---------------------------------------------------------------------------
// DDE → PIE
// ---------------------------------------------------------------------------

/// PIE representation of a DDE over `Z = R^{n_u} × L2^{K·n_u}[s]`, with the
/// history reconstruction `φ_j(s) = u + ∫₀ˢ ψ_j(ν)dν` and delayed taps
/// realized as `u + ∫₀¹ ψ_j`.
pub fn dde_to_pie(sys: &Dde) -> Result<PieSystem, ConvertError> {
    dde_to_pie_on(sys, DELAY_DOMAIN)
}

/// [`dde_to_pie`] with an explicit spatial domain tag, so the result can be
/// interconnected with PIEs whose `L2[x]` components live on that domain (the
/// DDE itself has no spatial axis).
pub fn dde_to_pie_on(sys: &Dde, domain: Domain) -> Result<PieSystem, ConvertError> {
    sys.validate()?;
    let (n_u, k) = (sys.n_u, sys.delays.len());
    let vs = ZSpace::new(n_u, k * n_u, 0, 0, domain);
    let ws = fin(sys.n_w, domain);
    let zs = fin(sys.n_z, domain);
    let mut g = PieSystem::zero(vs, ws, fin(0, domain), zs, fin(0, domain));

    let eye = PolyMatrix::identity(n_u, domain);
    let mut t = PiOperator::zero(&vs, &vs);
    t.set_part(0, 0, 0, 0, eye.clone())?;
    if k > 0 {
        // φ_j-row masses: u + ∫₀ˢ ψ_j.
        let mut emb = PolyMatrix::zeros(k * n_u, n_u, domain);
        let mut low = PolyMatrix::zeros(k * n_u, k * n_u, domain);
        for j in 0..k {
            emb.add_at(j * n_u, 0, &eye)?;
            low.add_at(j * n_u, j * n_u, &eye)?;
        }
        t.set_part(1, 0, 0, 0, emb)?;
        t.set_part(1, 1, 0, 1, low)?;
    }
    g.t = t;

    let mut a = PiOperator::zero(&vs, &vs);
    let mut a_total = sys.a.clone();
    for dl in &sys.delays {
        for (r, row) in dl.a_j.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a_total[r][c] += v;
            }
        }
    }
    a.set_part(0, 0, 0, 0, PolyMatrix::from_const(&a_total, domain))?;
    if k > 0 {
        let mut taps = PolyMatrix::zeros(n_u, k * n_u, domain);
        let mut tr = PolyMatrix::zeros(k * n_u, k * n_u, domain);
        for (j, dl) in sys.delays.iter().enumerate() {
            taps.add_at(0, j * n_u, &PolyMatrix::from_const(&dl.a_j, domain))?;
            tr.add_at(j * n_u, j * n_u, &eye.scale(-1.0 / dl.tau))?;
        }
        a.set_part(0, 1, 0, 0, taps)?;
        a.set_part(1, 1, 0, 0, tr)?;
    }
    g.a = a;

    let mut b_w = PiOperator::zero(&ws, &vs);
    b_w.set_part(0, 0, 0, 0, PolyMatrix::from_const(&sys.b_w, domain))?;
    g.b_w = b_w;

    let mut c_total = sys.c_z.clone();
    for dl in &sys.delays {
        for (r, row) in dl.c_zj.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                c_total[r][c] += v;
            }
        }
    }
    let mut c_z = PiOperator::zero(&vs, &zs);
    c_z.set_part(0, 0, 0, 0, PolyMatrix::from_const(&c_total, domain))?;
    if k > 0 {
        let mut taps = PolyMatrix::zeros(sys.n_z, k * n_u, domain);
        for (j, dl) in sys.delays.iter().enumerate() {
            taps.add_at(0, j * n_u, &PolyMatrix::from_const(&dl.c_zj, domain))?;
        }
        c_z.set_part(0, 1, 0, 0, taps)?;
    }
    g.c_z = c_z;
    Ok(g)
}

// ---------------------------------------------------------------------------
// General delayed 1D PDE → PIE
// ---------------------------------------------------------------------------

/// Width of one delayed-tap bundle `[D_int φ(1); Λφ(1); φ_z(1)]`: finite
/// part `n_bf + n_z`, distributed part `n_int`.
fn tap_space(pde: &DelayedPde1D, copies: usize) -> ZSpace {
    let o = pde.orders;
    ZSpace::new(copies * (o.n_bf() + pde.n_z), 0, copies * o.n_int(), 0, pde.domain)
}

/// PIE of the delay-free interior part of a delayed PDE: state `v`, input
/// `w = z`, feedback input `r` carrying the delayed tap bundles, feedback
/// output `q = [D_int u; Λu; z]`, exogenous output `z`-channel carrying the
/// PDE's output `w`.
pub fn delayed_pde_primary_pie(
    pde: &DelayedPde1D,
    fm: &FundamentalMap,
) -> Result<PieSystem, ConvertError> {
    let o = pde.orders;
    let d = pde.domain;
    let (n_u, n_int, n_bf) = (o.n_u(), o.n_int(), o.n_bf());
    let k = pde.delays.len();
    let vs = l2x(n_u, d);
    let ws = fin(pde.n_z, d);
    let zs = fin(pde.n_w, d);
    let rs = tap_space(pde, k);
    let qs = tap_space(pde, 1);
    let mut g = PieSystem::zero(vs, ws, rs, zs, qs);

    g.t = fm.t.clone();
    g.t_w = fm.t_z.clone();
    g.a = op_mult_x(&pde.a_p)?.compose(&fm.t_int)?;
    g.b_w = op_mult_x(&pde.a_p)?.compose(&fm.t_int_z)?.add(&op_embed_x(&pde.b_z)?)?;

    // Delayed taps: r_j = [D_int φ_j(1); Λφ_j(1); φ_{z,j}(1)].
    let mut b_r = PiOperator::zero(&rs, &vs);
    if k > 0 {
        let mut mult = PolyMatrix::zeros(n_u, k * n_int, d);
        let mut emb = PolyMatrix::zeros(n_u, k * (n_bf + pde.n_z), d);
        for (j, dl) in pde.delays.iter().enumerate() {
            mult.add_at(0, j * n_int, &dl.a_pd)?;
            emb.add_at(0, j * (n_bf + pde.n_z), &dl.a_bd.hcat(&dl.b_zd)?)?;
        }
        b_r.set_part(2, 2, 0, 0, mult)?;
        b_r.set_part(2, 0, 0, 0, emb)?;
    }
    g.b_r = b_r;

    // Output w = ∫ c_wp·D_int u + c_wb·Λu + d_wz z.
    let cwp_theta = pde.c_wp.subs_var(Var::X, Var::Theta);
    g.c_z = op_fullint_x(&cwp_theta)?
        .compose(&fm.t_int)?
        .add(&op_const0(&pde.c_wb, pde.n_w, n_bf, d)?.compose(&fm.t_bf)?)?;
    g.d_zw = op_fullint_x(&cwp_theta)?
        .compose(&fm.t_int_z)?
        .add(&op_const0(&pde.c_wb, pde.n_w, n_bf, d)?.compose(&fm.t_bf_z)?)?
        .add(&op_const0(&pde.d_wz, pde.n_w, pde.n_z, d)?)?;

    // Feedback output q = [D_int u; Λu; z].
    let mut c_q = PiOperator::zero(&vs, &qs);
    for px in 0..3 {
        let part = fm.t_int.block(2, 2).part(px, 0);
        if !part.is_zero() {
            c_q.set_part(2, 2, px, 0, part.clone())?;
        }
    }
    let bf_kernel = fm.t_bf.block(0, 2).part(0, 0);
    let mut bf_full = PolyMatrix::zeros(n_bf + pde.n_z, n_u, d);
    bf_full.add_at(0, 0, bf_kernel)?;
    c_q.set_part(0, 2, 0, 0, bf_full)?;
    g.c_q = c_q;

    let mut d_qw = PiOperator::zero(&ws, &qs);
    let intz_kernel = fm.t_int_z.block(2, 0).part(0, 0);
    if !intz_kernel.is_zero() {
        d_qw.set_part(2, 0, 0, 0, intz_kernel.clone())?;
    }
    let mut fin_rows = PolyMatrix::zeros(n_bf + pde.n_z, pde.n_z, d);
    fin_rows.add_at(0, 0, fm.t_bf_z.block(0, 0).part(0, 0))?;
    fin_rows.add_at(n_bf, 0, &PolyMatrix::identity(pde.n_z, d))?;
    d_qw.set_part(0, 0, 0, 0, fin_rows)?;
    g.d_qw = d_qw;
    Ok(g)
}

/// PIE of the transport channels of a delayed PDE: states
/// `(φ_{z,j}, φ_{u,j})` histories of `(z, u)` per delay, consuming the
/// feedback bundle `q = [D_int u; Λu; z]` and producing the delayed tap
/// bundles.
pub fn delayed_pde_transport_pie(
    pde: &DelayedPde1D,
    fm: &FundamentalMap,
) -> Result<PieSystem, ConvertError> {
    let o = pde.orders;
    let d = pde.domain;
    let (n_u, n_int, n_bf, n_z) = (o.n_u(), o.n_int(), o.n_bf(), pde.n_z);
    let k = pde.delays.len();
    let vs = ZSpace::new(0, k * n_z, 0, k * n_u, d);
    let rs = tap_space(pde, 1);
    let qs = tap_space(pde, k);
    let mut g = PieSystem::zero(vs, fin(0, d), rs, fin(0, d), qs);
    if k == 0 {
        return Ok(g);
    }

    let t_low = fm.t.block(2, 2);
    let tz_kernel = fm.t_z.block(2, 0).part(0, 0);
    let tint = fm.t_int.block(2, 2);
    let tintz_kernel = fm.t_int_z.block(2, 0).part(0, 0);
    let tbf_kernel = fm.t_bf.block(0, 2).part(0, 0);
    let tbfz_kernel = fm.t_bf_z.block(0, 0).part(0, 0);

    let mut t = PiOperator::zero(&vs, &vs);
    let mut a = PiOperator::zero(&vs, &vs);
    let mut t_r = PiOperator::zero(&rs, &vs);
    let mut c_q = PiOperator::zero(&vs, &qs);
    let mut d_qr = PiOperator::zero(&rs, &qs);

    // Block-diagonal per delay; kernels are identical across delays except
    // for the transport speed.
    let eye_u = PolyMatrix::identity(n_u, d);
    let eye_z = PolyMatrix::identity(n_z, d);
    let mut low33 = vec![PolyMatrix::zeros(k * n_u, k * n_u, d); 3];
    let mut mult33 = vec![PolyMatrix::zeros(k * n_u, k * n_u, d); 3];
    let mut t31 = PolyMatrix::zeros(k * n_u, k * n_z, d);
    let mut a31 = PolyMatrix::zeros(k * n_u, k * n_z, d);
    let mut t11_low = PolyMatrix::zeros(k * n_z, k * n_z, d);
    let mut a11 = PolyMatrix::zeros(k * n_z, k * n_z, d);
    let mut q23 = vec![PolyMatrix::zeros(k * n_int, k * n_u, d); 3];
    let mut q21 = PolyMatrix::zeros(k * n_int, k * n_z, d);
    let mut q03 = PolyMatrix::zeros(k * (n_bf + n_z), k * n_u, d);
    let mut q01 = PolyMatrix::zeros(k * (n_bf + n_z), k * n_z, d);
    for (j, dl) in pde.delays.iter().enumerate() {
        let r = -1.0 / dl.tau;
        for px in 0..3 {
            low33[px].add_at(j * n_u, j * n_u, t_low.part(px, 0))?;
            mult33[px].add_at(j * n_u, j * n_u, &t_low.part(px, 0).scale(r))?;
            q23[px].add_at(j * n_int, j * n_u, tint.part(px, 0))?;
        }
        t31.add_at(j * n_u, j * n_z, tz_kernel)?;
        a31.add_at(j * n_u, j * n_z, &tz_kernel.scale(r))?;
        t11_low.add_at(j * n_z, j * n_z, &eye_z)?;
        a11.add_at(j * n_z, j * n_z, &eye_z.scale(r))?;
        q21.add_at(j * n_int, j * n_z, tintz_kernel)?;
        let off = j * (n_bf + n_z);
        q03.add_at(off, j * n_u, tbf_kernel)?;
        q01.add_at(off, j * n_z, tbfz_kernel)?;
        q01.add_at(off + n_bf, j * n_z, &eye_z)?;
    }
    for px in 0..3 {
        if !low33[px].is_zero() {
            t.set_part(3, 3, px, 1, low33[px].clone())?;
            a.set_part(3, 3, px, 0, mult33[px].clone())?;
            c_q.set_part(2, 3, px, 0, q23[px].clone())?;
        }
    }
    if n_z > 0 {
        if !t31.is_zero() {
            t.set_part(3, 1, 0, 1, t31)?;
            a.set_part(3, 1, 0, 0, a31)?;
        }
        t.set_part(1, 1, 0, 1, t11_low)?;
        a.set_part(1, 1, 0, 0, a11)?;
        if !q21.is_zero() {
            c_q.set_part(2, 1, 0, 0, q21)?;
        }
        c_q.set_part(0, 1, 0, 0, q01)?;
    }
    if !q03.is_zero() {
        c_q.set_part(0, 3, 0, 0, q03)?;
    }

    // Entry conditions: φ_j(0) carries [u; z], selected from q.
    let mut sel_u = PolyMatrix::zeros(k * n_u, n_int, d);
    let mut sel_z = PolyMatrix::zeros(k * n_z, n_bf + n_z, d);
    let mut feed0 = PolyMatrix::zeros(k * (n_bf + n_z), n_bf + n_z, d);
    let mut feed2 = PolyMatrix::zeros(k * n_int, n_int, d);
    for j in 0..k {
        sel_u.add_at(j * n_u, 0, &eye_u)?;
        sel_z.add_at(j * n_z, n_bf, &eye_z)?;
        feed0.add_at(j * (n_bf + n_z), 0, &PolyMatrix::identity(n_bf + n_z, d))?;
        feed2.add_at(j * n_int, 0, &PolyMatrix::identity(n_int, d))?;
    }
    t_r.set_part(3, 2, 0, 0, sel_u)?;
    if n_z > 0 {
        t_r.set_part(1, 0, 0, 0, sel_z)?;
    }
    d_qr.set_part(0, 0, 0, 0, feed0)?;
    d_qr.set_part(2, 2, 0, 0, feed2)?;

    g.t = t;
    g.t_r = t_r;
    g.a = a;
    g.c_q = c_q;
    g.d_qr = d_qr;
    Ok(g)
}

/// PIE representation of a general mixed-order 1D PDE with pointwise delays,
/// built as the feedback interconnection of the delay-free interior PIE and
/// the transport-channel PIE. The exogenous channels carry the PDE's input
/// `z` (as `w`) and output `w` (as `z`).
pub fn delayed_pde_to_pie(sys: &DelayedPde1D) -> Result<PieSystem, ConvertError> {
    let fm = gpde1d_fundamental_map(sys)?;
    let g1 = delayed_pde_primary_pie(sys, &fm)?;
    let g2 = delayed_pde_transport_pie(sys, &fm)?;
    Ok(pie_interconnect(&g1, &g2)?)
}

/// Swap a system's exogenous channels onto the feedback ports (`w → r`,
/// `z → q`), so it can be closed against another system via
/// [`pie_interconnect`]. Requires the feedback ports to be unused.
pub fn as_feedback(sys: &PieSystem) -> Result<PieSystem, ConvertError> {
    if !sys.rs.is_empty() || !sys.qs.is_empty() {
        return Err(ConvertError::Model(ModelError::Invalid(
            "system already uses its feedback ports".into(),
        )));
    }
    let d = sys.vs.domain;
    let mut g = PieSystem::zero(sys.vs, fin(0, d), sys.ws, fin(0, d), sys.zs);
    g.t = sys.t.clone();
    g.t_r = sys.t_w.clone();
    g.a = sys.a.clone();
    g.b_r = sys.b_w.clone();
    g.c_q = sys.c_z.clone();
    g.d_qr = sys.d_zw.clone();
    Ok(g)
}

/// PIE representation of a coupled DDE–PDE pair: the DDE's output `z` enters
/// the PDE's input channel and the PDE's output `w` drives the DDE's input.
/// The closed system is autonomous; its state stacks the DDE part before the
/// PDE part.
pub fn dde_dpde_to_pie(sys: &DdeDpde) -> Result<PieSystem, ConvertError> {
    sys.validate()?;
    let g_dde = as_feedback(&dde_to_pie_on(&sys.dde, sys.pde.domain)?)?;
    let g_pde = as_feedback(&delayed_pde_to_pie(&sys.pde)?)?;
    Ok(pie_interconnect(&g_dde, &g_pde)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde_models::{
        dde_dpde_example, dde_example, expand_delay_dynamics, heat_example,
    };

    fn dirichlet01() -> (Mat, Domain) {
        (
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]],
            Domain::new(0.0, 1.0),
        )
    }

    #[test]
    fn dirichlet_kernels_match_closed_form() {
        let (b, d) = dirichlet01();
        let fm = build_t1(&b, 1, d).unwrap();
        // Lower kernel θ(x−1), upper kernel x(θ−1).
        let low = fm.t.block(2, 2).part(1, 0).get(0, 0).clone();
        let up = fm.t.block(2, 2).part(2, 0).get(0, 0).clone();
        let th = Poly::var(Var::Theta);
        let x = Poly::var(Var::X);
        let expect_low = th.mul(&x.add(&Poly::constant(-1.0)), 24).unwrap();
        let expect_up = x.mul(&th.add(&Poly::constant(-1.0)), 24).unwrap();
        assert!(low.max_coeff_diff(&expect_low) < 1e-12, "lower {low}");
        assert!(up.max_coeff_diff(&expect_up) < 1e-12, "upper {up}");
    }

    #[test]
    fn rank_deficient_boundary_matrix_rejected() {
        let d = Domain::new(0.0, 1.0);
        let b = vec![vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]];
        match build_t1(&b, 1, d) {
            Err(ConvertError::IllPosedBC { cond }) => assert!(cond > ILL_POSED_COND),
            other => panic!("expected ill-posed boundary conditions, got {other:?}"),
        }
    }

    #[test]
    fn build_t1_agrees_with_general_map() {
        let d = Domain::new(-0.5, 2.0);
        let b = vec![
            vec![0.0, 1.0, 0.0, 0.3],
            vec![0.7, 0.0, 1.0, -0.2],
        ];
        let fm1 = build_t1(&b, 1, d).unwrap();
        let mut pde = DelayedPde1D::zero(GpdeOrders::new(0, 0, 1), d, 0, 0, 2);
        pde.e_b = b;
        let fm2 = gpde1d_fundamental_map(&pde).unwrap();
        assert!(fm1.t.max_coeff_diff(&fm2.t) < 1e-10);
        assert!(fm1.t_int.max_coeff_diff(&fm2.t_int) < 1e-10);
        assert!(fm1.t_bf.max_coeff_diff(&fm2.t_bf) < 1e-10);
        assert!((fm1.cond - fm2.cond).abs() / fm2.cond < 1e-10);
    }

    #[test]
    fn order1_state_reduces_to_running_integral() {
        // Single order-1 state with boundary condition u(0) = z: the state
        // map is the running integral plus the embedded input.
        let d = Domain::new(0.0, 1.0);
        let o = GpdeOrders::new(0, 1, 0);
        let mut pde = DelayedPde1D::zero(o, d, 1, 0, 1);
        pde.e_b[0][o.bf_val(0, 0)] = 1.0;
        pde.e_z[0][0] = -1.0;
        let fm = gpde1d_fundamental_map(&pde).unwrap();
        let low = fm.t.block(2, 2).part(1, 0).get(0, 0);
        assert!(low.max_coeff_diff(&Poly::constant(1.0)) < 1e-12);
        assert!(fm.t.block(2, 2).part(2, 0).is_zero());
        let tz = fm.t_z.block(2, 0).part(0, 0).get(0, 0);
        assert!(tz.max_coeff_diff(&Poly::constant(1.0)) < 1e-12);
    }

    #[test]
    fn build_t2_lifts_kernels_to_history_axis() {
        let (b, d) = dirichlet01();
        let fm = build_t1(&b, 1, d).unwrap();
        let t2 = build_t2(&fm).unwrap();
        let blk = t2.block(3, 3);
        // The s-axis part is the constant-kernel Volterra lift (part index 1).
        assert!(blk.part(1, 0).is_zero());
        assert!(
            blk.part(1, 1).max_coeff_diff(fm.t.block(2, 2).part(1, 0)) < 1e-12
        );
        assert!(
            blk.part(2, 1).max_coeff_diff(fm.t.block(2, 2).part(2, 0)) < 1e-12
        );
    }

    #[test]
    fn heat_pie_multiplier_block_is_identity() {
        let sys = heat_example(1.9, 1.0);
        let g = dpde_to_pie(&sys).unwrap();
        let mult = g.a.block(2, 2).part(0, 0).get(0, 0);
        assert!(mult.max_coeff_diff(&Poly::constant(1.0)) < 1e-12);
    }

    #[test]
    fn delay_free_dpde_has_zero_cross_block() {
        let mut sys = heat_example(1.9, 1.0);
        sys.a_d = PolyMatrix::zeros(1, 3, sys.domain);
        let g = dpde_to_pie(&sys).unwrap();
        assert!(g.a.block(2, 3).is_zero());
    }

    #[test]
    fn dual_construction_matches_direct_assembly() {
        let sys = heat_example(1.9, 0.7);
        let direct = dpde_to_pie(&sys).unwrap();
        let exp = expand_delay_dynamics(&sys).unwrap();
        let g1 = pde1d_to_pie(&exp).unwrap();
        let g2 = transport2d_to_pie(&exp).unwrap();
        let closed = pie_interconnect(&g1, &g2).unwrap();
        assert!(direct.t.max_coeff_diff(&closed.t) < 1e-10);
        assert!(direct.a.max_coeff_diff(&closed.a) < 1e-10);
    }

    #[test]
    fn dde_example_pie_matches_displayed_equations() {
        // u̇ = −u + u(t−τ): mass T = [I, 0; embed, ∫₀ˢ]; dynamics
        // A = [0, ∫₀¹·ds; 0, −(1/τ)].
        let tau = 0.4;
        let g = dde_to_pie(&dde_example(tau)).unwrap();
        let one = Poly::constant(1.0);
        assert!(g.t.block(0, 0).part(0, 0).get(0, 0).max_coeff_diff(&one) < 1e-12);
        assert!(g.t.block(1, 0).part(0, 0).get(0, 0).max_coeff_diff(&one) < 1e-12);
        assert!(g.t.block(1, 1).part(0, 1).get(0, 0).max_coeff_diff(&one) < 1e-12);
        // A(0,0) = −1 + 1 = 0.
        assert!(g.a.block(0, 0).part(0, 0).is_zero());
        assert!(g.a.block(0, 1).part(0, 0).get(0, 0).max_coeff_diff(&one) < 1e-12);
        assert!(
            g.a.block(1, 1)
                .part(0, 0)
                .get(0, 0)
                .max_coeff_diff(&Poly::constant(-1.0 / tau))
                < 1e-12
        );
        // Output z = u.
        assert!(g.c_z.block(0, 0).part(0, 0).get(0, 0).max_coeff_diff(&one) < 1e-12);
    }

    #[test]
    fn dde_without_delays_is_plain_ode_pie() {
        let mut sys = dde_example(0.4);
        sys.delays.clear();
        let g = dde_to_pie(&sys).unwrap();
        assert_eq!(g.vs.dims(), [1, 0, 0, 0]);
        assert!(
            g.t.block(0, 0).part(0, 0).get(0, 0).max_coeff_diff(&Poly::constant(1.0)) < 1e-12
        );
        assert!(
            g.a.block(0, 0).part(0, 0).get(0, 0).max_coeff_diff(&Poly::constant(-1.0)) < 1e-12
        );
    }

    #[test]
    fn dde_dpde_example_space_and_ode_rows() {
        let sys = dde_dpde_example(0.1);
        let g = dde_dpde_to_pie(&sys).unwrap();
        assert!(g.is_autonomous());
        assert_eq!(g.vs.dims(), [1, 2, 1, 1]);
        // First displayed equation: u̇ = ∫₀¹ ψ_z ds (mass row I on u only).
        assert!(
            g.t.block(0, 0).part(0, 0).get(0, 0).max_coeff_diff(&Poly::constant(1.0)) < 1e-12
        );
        assert!(g.a.block(0, 0).part(0, 0).is_zero());
        let tap = g.a.block(0, 1).part(0, 0);
        assert!(tap.get(0, 0).max_coeff_diff(&Poly::constant(1.0)) < 1e-12);
    }

    #[test]
    fn delayed_pde_matches_block1_path_for_pure_order2() {
        // The same delayed reaction–diffusion system through both pipelines;
        // the general path stacks (φ_z, φ_u) = (comp1, comp3) with an empty
        // comp1, so the operators must agree block-for-block.
        let sys = heat_example(1.9, 0.6);
        let direct = dpde_to_pie(&sys).unwrap();
        let general = delayed_pde_to_pie(&sys.as_delayed_pde()).unwrap();
        assert!(general.is_autonomous());
        assert_eq!(general.vs.dims(), direct.vs.dims());
        assert!(direct.t.max_coeff_diff(&general.t) < 1e-10);
        assert!(direct.a.max_coeff_diff(&general.a) < 1e-10);
    }
}
