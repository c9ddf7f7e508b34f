//! Matrix-valued multivariate polynomials — the universal kernel representation.
//!
//! Every PI-operator kernel is a matrix of polynomials in up to four ordered
//! variables: `x`, `θ` over the spatial interval `[a, b]` and `s`, `ν` over the
//! delay interval `[0, 1]`. Two additional variables `η` (spatial) and `μ`
//! (delay) exist purely as transient integration dummies inside operator
//! composition; public kernels never contain them.
//!
//! Coefficients are double precision in the monomial basis. Canonical form is
//! maintained by pruning coefficients below `PRUNE_EPS` and by the fixed
//! variable order `x < θ < s < ν < η < μ`. Degrees beyond the configured cap
//! are a loud error, never a silent truncation: downstream operator equalities
//! must be exact.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Absolute threshold below which coefficients are dropped from canonical form.
pub const PRUNE_EPS: f64 = 1e-14;

/// Default per-variable degree cap. Exceeding it is an error.
pub const DEGREE_CAP: u32 = 24;

/// Number of variables in the internal exponent tuple (four public + two dummies).
pub const NVARS: usize = 6;

/// A polynomial variable.
///
/// `X`/`Theta` range over the spatial interval `[a, b]`; `S`/`Nu` over the
/// delay interval `[0, 1]`. `EtaX` and `EtaS` are internal integration dummies
/// used only while composing operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    X,
    Theta,
    S,
    Nu,
    EtaX,
    EtaS,
}

impl Var {
    /// Index into the exponent tuple, following the canonical order.
    pub const fn index(self) -> usize {
        match self {
            Var::X => 0,
            Var::Theta => 1,
            Var::S => 2,
            Var::Nu => 3,
            Var::EtaX => 4,
            Var::EtaS => 5,
        }
    }

    /// All variables in canonical order.
    pub const ALL: [Var; NVARS] = [Var::X, Var::Theta, Var::S, Var::Nu, Var::EtaX, Var::EtaS];

    /// Short display name.
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Theta => "th",
            Var::S => "s",
            Var::Nu => "nu",
            Var::EtaX => "etax",
            Var::EtaS => "etas",
        }
    }
}

/// Exponent tuple of a monomial, indexed by [`Var::index`].
pub type Mono = [u32; NVARS];

/// An integration or substitution bound: a constant or another variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Const(f64),
    Var(Var),
}

/// Errors raised by polynomial-kernel arithmetic.
#[derive(Debug, Error)]
pub enum PolyError {
    #[error("shape mismatch: ({0}x{1}) vs ({2}x{3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("spatial domain mismatch: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("degree cap {cap} exceeded in variable {var} (degree {degree})")]
    DegreeCapExceeded { var: &'static str, degree: u32, cap: u32 },
    #[error("invalid integration bound: bound equals integration variable {0}")]
    InvalidBound(&'static str),
}

/// A scalar multivariate polynomial in canonical (sorted, pruned) form.
///
/// Internal building block of [`PolyMatrix`]; kept private to the module so the
/// canonical-form invariants cannot be broken from outside.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    // Serialized as a list of (exponents, coefficient) pairs: JSON objects
    // cannot key on integer arrays.
    #[serde(with = "poly_terms_serde")]
    terms: BTreeMap<Mono, f64>,
}

mod poly_terms_serde {
    use super::Mono;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(t: &BTreeMap<Mono, f64>, s: S) -> Result<S::Ok, S::Error> {
        t.iter().map(|(m, c)| (*m, *c)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Mono, f64>, D::Error> {
        Ok(Vec::<(Mono, f64)>::deserialize(d)?.into_iter().collect())
    }
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly::zero();
        if c.abs() >= PRUNE_EPS {
            p.terms.insert([0; NVARS], c);
        }
        p
    }

    pub fn var(v: Var) -> Self {
        Poly::monomial(v, 1, 1.0)
    }

    /// `c * v^e`.
    pub fn monomial(v: Var, e: u32, c: f64) -> Self {
        let mut mono = [0u32; NVARS];
        mono[v.index()] = e;
        let mut p = Poly::zero();
        if c.abs() >= PRUNE_EPS {
            p.terms.insert(mono, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Insert a term, accumulating with any existing coefficient. Does not prune.
    fn add_term(&mut self, mono: Mono, c: f64) {
        let entry = self.terms.entry(mono).or_insert(0.0);
        *entry += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_EPS);
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, *c);
        }
        out.prune();
        out
    }

    pub fn scale(&self, k: f64) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let v = c * k;
            if v.abs() >= PRUNE_EPS {
                out.terms.insert(*m, v);
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly, cap: u32) -> Result<Poly, PolyError> {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = [0u32; NVARS];
                for (i, e) in m.iter_mut().enumerate() {
                    *e = m1[i] + m2[i];
                    if *e > cap {
                        return Err(PolyError::DegreeCapExceeded {
                            var: Var::ALL[i].name(),
                            degree: *e,
                            cap,
                        });
                    }
                }
                out.add_term(m, c1 * c2);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Degree in a single variable.
    pub fn degree(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m[v.index()]).max().unwrap_or(0)
    }

    /// True iff the variable occurs with positive exponent.
    pub fn contains(&self, v: Var) -> bool {
        self.degree(v) > 0
    }

    /// Substitute a constant for a variable.
    pub fn subs_const(&self, v: Var, value: f64) -> Poly {
        let i = v.index();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut m2 = *m;
            let e = m2[i];
            m2[i] = 0;
            out.add_term(m2, c * value.powi(e as i32));
        }
        out.prune();
        out
    }

    /// Substitute one variable for another (rename). The target accumulates
    /// the source's exponent.
    pub fn subs_var(&self, from: Var, to: Var) -> Poly {
        if from == to {
            return self.clone();
        }
        let (fi, ti) = (from.index(), to.index());
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut m2 = *m;
            let e = m2[fi];
            m2[fi] = 0;
            m2[ti] += e;
            out.add_term(m2, *c);
        }
        out.prune();
        out
    }

    /// Simultaneously swap two variables (used by adjoints: `x ↔ θ`, `s ↔ ν`).
    pub fn swap_vars(&self, a: Var, b: Var) -> Poly {
        let (ai, bi) = (a.index(), b.index());
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut m2 = *m;
            m2.swap(ai, bi);
            out.add_term(m2, *c);
        }
        out.prune();
        out
    }

    /// Substitute per [`Bound`].
    pub fn subs_bound(&self, v: Var, bound: Bound) -> Poly {
        match bound {
            Bound::Const(c) => self.subs_const(v, c),
            Bound::Var(w) => self.subs_var(v, w),
        }
    }

    /// Exact definite integral over `v` from `lower` to `upper`.
    pub fn integrate(&self, v: Var, lower: Bound, upper: Bound, cap: u32) -> Result<Poly, PolyError> {
        if lower == Bound::Var(v) || upper == Bound::Var(v) {
            return Err(PolyError::InvalidBound(v.name()));
        }
        // Antiderivative in v.
        let i = v.index();
        let mut anti = Poly::zero();
        for (m, c) in &self.terms {
            let mut m2 = *m;
            m2[i] += 1;
            if m2[i] > cap {
                return Err(PolyError::DegreeCapExceeded { var: v.name(), degree: m2[i], cap });
            }
            anti.add_term(m2, c / f64::from(m2[i]));
        }
        let hi = anti.subs_bound(v, upper);
        let lo = anti.subs_bound(v, lower);
        let mut out = hi.add(&lo.scale(-1.0));
        // Renaming a bound variable can push degrees past the cap.
        for (m, _) in &out.terms {
            for (idx, e) in m.iter().enumerate() {
                if *e > cap {
                    return Err(PolyError::DegreeCapExceeded {
                        var: Var::ALL[idx].name(),
                        degree: *e,
                        cap,
                    });
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Poly {
        let i = v.index();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m[i] == 0 {
                continue;
            }
            let mut m2 = *m;
            m2[i] -= 1;
            out.add_term(m2, c * f64::from(m[i]));
        }
        out.prune();
        out
    }

    /// Evaluate at a full variable assignment (deterministic summation order).
    pub fn eval(&self, point: &[f64; NVARS]) -> f64 {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (i, e) in m.iter().enumerate() {
                if *e > 0 {
                    t *= point[i].powi(*e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Sum of absolute coefficient values (crude magnitude measure).
    pub fn coeff_l1(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Maximum absolute coefficient difference against another polynomial.
    pub fn max_coeff_diff(&self, other: &Poly) -> f64 {
        let mut d: f64 = 0.0;
        for (m, c) in &self.terms {
            let oc = other.terms.get(m).copied().unwrap_or(0.0);
            d = d.max((c - oc).abs());
        }
        for (m, c) in &other.terms {
            if !self.terms.contains_key(m) {
                d = d.max(c.abs());
            }
        }
        d
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:.6}")?;
            for (i, e) in m.iter().enumerate() {
                if *e > 0 {
                    write!(f, "*{}^{}", Var::ALL[i].name(), e)?;
                }
            }
        }
        Ok(())
    }
}

/// Spatial domain `[a, b]` attached to every kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

impl Domain {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a < b, "spatial domain requires a < b (got [{a}, {b}])");
        Domain { a, b }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn approx_eq(&self, other: &Domain) -> bool {
        (self.a - other.a).abs() <= 1e-12 && (self.b - other.b).abs() <= 1e-12
    }
}

/// The delay interval `[0, 1]`, fixed throughout.
pub const DELAY_DOMAIN: Domain = Domain { a: 0.0, b: 1.0 };

/// A matrix of multivariate polynomials over a shared spatial domain.
///
/// Row-major storage; immutable value semantics — every operation returns a
/// fresh matrix in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    domain: Domain,
    cap: u32,
    data: Vec<Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, domain: Domain) -> Self {
        PolyMatrix { rows, cols, domain, cap: DEGREE_CAP, data: vec![Poly::zero(); rows * cols] }
    }

    pub fn identity(n: usize, domain: Domain) -> Self {
        let mut m = PolyMatrix::zeros(n, n, domain);
        for i in 0..n {
            m.set(i, i, Poly::constant(1.0));
        }
        m
    }

    /// Build from a constant numeric matrix (row-major rows of equal length).
    pub fn from_const(rows: &[Vec<f64>], domain: Domain) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = PolyMatrix::zeros(r, c, domain);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged constant matrix");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, Poly::constant(*v));
            }
        }
        m
    }

    /// 1×1 matrix from a scalar polynomial.
    pub fn from_poly(p: Poly, domain: Domain) -> Self {
        let mut m = PolyMatrix::zeros(1, 1, domain);
        m.set(0, 0, p);
        m
    }

    /// Scalar multiple of the n×n identity with a polynomial entry.
    pub fn diag_poly(n: usize, p: &Poly, domain: Domain) -> Self {
        let mut m = PolyMatrix::zeros(n, n, domain);
        for i in 0..n {
            m.set(i, i, p.clone());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.data[i * self.cols + j] = p;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Poly::is_zero)
    }

    /// Whether every entry of row `i` is zero.
    pub fn row_is_zero(&self, i: usize) -> bool {
        (0..self.cols).all(|j| self.get(i, j).is_zero())
    }

    fn check_domain(&self, other: &PolyMatrix) -> Result<(), PolyError> {
        if !self.domain.approx_eq(&other.domain) {
            return Err(PolyError::DomainMismatch(
                self.domain.a,
                self.domain.b,
                other.domain.a,
                other.domain.b,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(PolyError::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        self.check_domain(other)?;
        let mut out = self.clone();
        for (p, q) in out.data.iter_mut().zip(&other.data) {
            *p = p.add(q);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> PolyMatrix {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.scale(k);
        }
        out
    }

    /// Matrix product with polynomial-coefficient convolution.
    pub fn matmul(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != other.rows {
            return Err(PolyError::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        self.check_domain(other)?;
        let mut out = PolyMatrix::zeros(self.rows, other.cols, self.domain);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Poly::zero();
                for k in 0..self.cols {
                    let prod = self.get(i, k).mul(other.get(k, j), self.cap)?;
                    acc = acc.add(&prod);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Entry-wise product with a scalar polynomial.
    pub fn mul_poly(&self, p: &Poly) -> Result<PolyMatrix, PolyError> {
        let mut out = self.clone();
        for q in &mut out.data {
            *q = q.mul(p, self.cap)?;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(self.cols, self.rows, self.domain);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Definite integral entry-wise.
    pub fn integrate(&self, v: Var, lower: Bound, upper: Bound) -> Result<PolyMatrix, PolyError> {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.integrate(v, lower, upper, self.cap)?;
        }
        Ok(out)
    }

    pub fn subs_const(&self, v: Var, value: f64) -> PolyMatrix {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.subs_const(v, value);
        }
        out
    }

    pub fn subs_var(&self, from: Var, to: Var) -> PolyMatrix {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.subs_var(from, to);
        }
        out
    }

    pub fn swap_vars(&self, a: Var, b: Var) -> PolyMatrix {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.swap_vars(a, b);
        }
        out
    }

    pub fn diff(&self, v: Var) -> PolyMatrix {
        let mut out = self.clone();
        for p in &mut out.data {
            *p = p.diff(v);
        }
        out
    }

    /// Evaluate every entry at a full assignment; returns row-major values.
    pub fn eval(&self, point: &[f64; NVARS]) -> Vec<f64> {
        self.data.iter().map(|p| p.eval(point)).collect()
    }

    /// Maximum degree over all entries in a variable.
    pub fn degree(&self, v: Var) -> u32 {
        self.data.iter().map(|p| p.degree(v)).max().unwrap_or(0)
    }

    pub fn contains(&self, v: Var) -> bool {
        self.data.iter().any(|p| p.contains(v))
    }

    /// Horizontal concatenation.
    pub fn hcat(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.rows != other.rows {
            return Err(PolyError::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        self.check_domain(other)?;
        let mut out = PolyMatrix::zeros(self.rows, self.cols + other.cols, self.domain);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        Ok(out)
    }

    /// Vertical concatenation.
    pub fn vcat(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != other.cols {
            return Err(PolyError::ShapeMismatch(self.rows, self.cols, other.rows, other.cols));
        }
        self.check_domain(other)?;
        let mut out = PolyMatrix::zeros(self.rows + other.rows, self.cols, self.domain);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
        }
        for i in 0..other.rows {
            for j in 0..self.cols {
                out.set(self.rows + i, j, other.get(i, j).clone());
            }
        }
        Ok(out)
    }

    /// Add `m` into this matrix with its top-left corner at `(r0, c0)`.
    pub fn add_at(&mut self, r0: usize, c0: usize, m: &PolyMatrix) -> Result<(), PolyError> {
        if r0 + m.rows > self.rows || c0 + m.cols > self.cols {
            return Err(PolyError::ShapeMismatch(self.rows, self.cols, m.rows, m.cols));
        }
        self.check_domain(m)?;
        for i in 0..m.rows {
            for j in 0..m.cols {
                let sum = self.get(r0 + i, c0 + j).add(m.get(i, j));
                self.set(r0 + i, c0 + j, sum);
            }
        }
        Ok(())
    }

    /// Sub-matrix copy (row/col ranges, half-open).
    pub fn slice(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> PolyMatrix {
        assert!(r1 <= self.rows && c1 <= self.cols && r0 <= r1 && c0 <= c1);
        let mut out = PolyMatrix::zeros(r1 - r0, c1 - c0, self.domain);
        for i in r0..r1 {
            for j in c0..c1 {
                out.set(i - r0, j - c0, self.get(i, j).clone());
            }
        }
        out
    }

    /// Maximum absolute coefficient difference against another matrix.
    pub fn max_coeff_diff(&self, other: &PolyMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(p, q)| p.max_coeff_diff(q))
            .fold(0.0, f64::max)
    }

    /// Largest absolute coefficient over all entries.
    pub fn max_abs_coeff(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|p| p.terms().map(|(_, c)| c.abs()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom01() -> Domain {
        Domain::new(0.0, 1.0)
    }

    #[test]
    fn additive_inverse_cancels() {
        let p = Poly::var(Var::X);
        let sum = p.add(&p.scale(-1.0));
        assert!(sum.is_zero());
    }

    #[test]
    fn disjoint_monomials_merge() {
        // (x − θ) + xθ keeps all three monomials.
        let xt = Poly::var(Var::X).mul(&Poly::var(Var::Theta), DEGREE_CAP).unwrap();
        let p = Poly::var(Var::X).add(&Poly::var(Var::Theta).scale(-1.0));
        let sum = p.add(&xt);
        assert_eq!(sum.num_terms(), 3);
    }

    #[test]
    fn integral_of_s_over_unit_interval() {
        let p = Poly::var(Var::S);
        let r = p.integrate(Var::S, Bound::Const(0.0), Bound::Const(1.0), DEGREE_CAP).unwrap();
        assert!((r.eval(&[0.0; NVARS]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cauchy_kernel_base_case() {
        // ∫_θ^x 1 dη = x − θ.
        let one = Poly::constant(1.0);
        let r = one
            .integrate(Var::EtaX, Bound::Var(Var::Theta), Bound::Var(Var::X), DEGREE_CAP)
            .unwrap();
        let expect = Poly::var(Var::X).add(&Poly::var(Var::Theta).scale(-1.0));
        assert!(r.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn substitution_collapses_difference() {
        let p = Poly::var(Var::X).add(&Poly::var(Var::Theta).scale(-1.0));
        assert!(p.subs_var(Var::X, Var::Theta).is_zero());
        let q = p.subs_const(Var::X, 1.0);
        let expect = Poly::constant(1.0).add(&Poly::var(Var::Theta).scale(-1.0));
        assert!(q.max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn leibniz_rule_on_volterra_integral() {
        // d/dx ∫_a^x p(x,θ) dθ = p(x,x) + ∫_a^x ∂x p dθ, with a = 0.
        let p = Poly::var(Var::X)
            .mul(&Poly::var(Var::Theta), DEGREE_CAP)
            .unwrap()
            .add(&Poly::monomial(Var::Theta, 2, 3.0));
        let integral =
            p.integrate(Var::Theta, Bound::Const(0.0), Bound::Var(Var::X), DEGREE_CAP).unwrap();
        let lhs = integral.diff(Var::X);
        let boundary = p.subs_var(Var::Theta, Var::X);
        let tail = p
            .diff(Var::X)
            .integrate(Var::Theta, Bound::Const(0.0), Bound::Var(Var::X), DEGREE_CAP)
            .unwrap();
        let rhs = boundary.add(&tail);
        assert!(lhs.max_coeff_diff(&rhs) < 1e-14);
    }

    #[test]
    fn invalid_bound_rejected() {
        let p = Poly::var(Var::X);
        let err = p.integrate(Var::X, Bound::Const(0.0), Bound::Var(Var::X), DEGREE_CAP);
        assert!(matches!(err, Err(PolyError::InvalidBound(_))));
    }

    #[test]
    fn degree_cap_is_loud() {
        let p = Poly::monomial(Var::X, 20, 1.0);
        let err = p.mul(&Poly::monomial(Var::X, 20, 1.0), DEGREE_CAP);
        assert!(matches!(err, Err(PolyError::DegreeCapExceeded { .. })));
    }

    #[test]
    fn matmul_small_case() {
        // [[1, x]] · [[θ], [1]] = [θ + x].
        let d = dom01();
        let mut a = PolyMatrix::zeros(1, 2, d);
        a.set(0, 0, Poly::constant(1.0));
        a.set(0, 1, Poly::var(Var::X));
        let mut b = PolyMatrix::zeros(2, 1, d);
        b.set(0, 0, Poly::var(Var::Theta));
        b.set(1, 0, Poly::constant(1.0));
        let c = a.matmul(&b).unwrap();
        let expect = Poly::var(Var::Theta).add(&Poly::var(Var::X));
        assert!(c.get(0, 0).max_coeff_diff(&expect) < 1e-15);
    }

    #[test]
    fn domain_mismatch_rejected() {
        let a = PolyMatrix::identity(1, Domain::new(0.0, 1.0));
        let b = PolyMatrix::identity(1, Domain::new(0.0, 2.0));
        assert!(matches!(a.add(&b), Err(PolyError::DomainMismatch(..))));
    }

    #[test]
    fn fubini_coefficientwise() {
        // ∫_a^b ∫_0^1 p ds dx = ∫_0^1 ∫_a^b p dx ds for p = x² s + x s².
        let p = Poly::monomial(Var::X, 2, 1.0)
            .mul(&Poly::var(Var::S), DEGREE_CAP)
            .unwrap()
            .add(&Poly::var(Var::X).mul(&Poly::monomial(Var::S, 2, 1.0), DEGREE_CAP).unwrap());
        let sx = p
            .integrate(Var::S, Bound::Const(0.0), Bound::Const(1.0), DEGREE_CAP)
            .unwrap()
            .integrate(Var::X, Bound::Const(0.0), Bound::Const(2.0), DEGREE_CAP)
            .unwrap();
        let xs = p
            .integrate(Var::X, Bound::Const(0.0), Bound::Const(2.0), DEGREE_CAP)
            .unwrap()
            .integrate(Var::S, Bound::Const(0.0), Bound::Const(1.0), DEGREE_CAP)
            .unwrap();
        assert!(sx.max_coeff_diff(&xs) < 1e-13);
    }
}
