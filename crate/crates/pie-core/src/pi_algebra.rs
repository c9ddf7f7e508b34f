//! PI operators on the mixed state space and their *-algebra.
//!
//! The state space is `Z = R^{n0} × L2^{ns}[0,1] × L2^{nx}[a,b] × L2^{nsx}([0,1]×[a,b])`
//! with components indexed 0..4 in that order. An operator is a 4×4 grid of
//! blocks, one per (codomain component, domain component) pair.
//!
//! Every block is described *per axis* (the spatial x-axis and the delay
//! s-axis) by one of four structures, determined by whether the codomain and
//! domain components carry that axis:
//!
//! | codomain | domain | structure                | parts      | kernel vars (x-axis) |
//! |----------|--------|--------------------------|------------|----------------------|
//! | yes      | yes    | multiplier + two kernels | mult/low/up| `x` / `(x, θ)`       |
//! | yes      | no     | polynomial embedding     | one        | `x`                  |
//! | no       | yes    | full integration         | one        | `θ`                  |
//! | no       | no     | finite                   | one        | —                    |
//!
//! A block's payload is the tensor product of its x-structure and s-structure:
//! up to 3×3 kernel parts, each a [`PolyMatrix`]. This uniform representation
//! contains the 3-PI, 4-PI and 2D PI classes as special cases and — unlike the
//! literal 2D class with s-independent cross kernels — is closed under
//! addition, composition and adjoint, which the inequality machinery requires.
//!
//! Composition is computed by exact polynomial integration, per axis, from a
//! small table of combination rules; the independent quadrature oracle in the
//! test suite, not the derivation, is the correctness authority.

use crate::polykernel::{Bound, Domain, Poly, PolyError, PolyMatrix, Var};
use crate::quad::QuadRule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gauss–Legendre nodes and weights on `[a, b]` as pairs (empty interval
/// yields no nodes).
fn gauss_nodes(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let rule = QuadRule::gauss_legendre(n, a, b);
    rule.nodes.iter().copied().zip(rule.weights.iter().copied()).collect()
}

/// Errors raised by operator-algebra operations.
#[derive(Debug, Error)]
pub enum PiError {
    #[error("operator space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid block payload: {0}")]
    InvalidBlock(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// The mixed state space `R^{n0} × L2^{ns}[s] × L2^{nx}[x] × L2^{nsx}[s,x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZSpace {
    pub n0: usize,
    pub ns: usize,
    pub nx: usize,
    pub nsx: usize,
    pub domain: Domain,
}

impl ZSpace {
    pub fn new(n0: usize, ns: usize, nx: usize, nsx: usize, domain: Domain) -> Self {
        ZSpace { n0, ns, nx, nsx, domain }
    }

    /// Purely finite-dimensional space.
    pub fn finite(n0: usize, domain: Domain) -> Self {
        ZSpace::new(n0, 0, 0, 0, domain)
    }

    pub fn comp_dim(&self, c: usize) -> usize {
        match c {
            0 => self.n0,
            1 => self.ns,
            2 => self.nx,
            3 => self.nsx,
            _ => panic!("component index out of range"),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n0, self.ns, self.nx, self.nsx]
    }

    /// Total finite part + L2 sizes (bookkeeping only; not a Hilbert dimension).
    pub fn total(&self) -> usize {
        self.n0 + self.ns + self.nx + self.nsx
    }

    pub fn compatible(&self, other: &ZSpace) -> bool {
        self.dims() == other.dims() && self.domain.approx_eq(&other.domain)
    }

    /// Product (stacked) space, component-wise.
    pub fn stack(&self, other: &ZSpace) -> ZSpace {
        assert!(self.domain.approx_eq(&other.domain), "stacking spaces over different domains");
        ZSpace::new(
            self.n0 + other.n0,
            self.ns + other.ns,
            self.nx + other.nx,
            self.nsx + other.nsx,
            self.domain,
        )
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }
}

/// Does component `c` carry the spatial axis?
pub const fn comp_has_x(c: usize) -> bool {
    c == 2 || c == 3
}

/// Does component `c` carry the delay axis?
pub const fn comp_has_s(c: usize) -> bool {
    c == 1 || c == 3
}

/// Kind of a single axis part within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartKind {
    /// Axis absent on both sides.
    None,
    /// Pointwise multiplier (axis on both sides), kernel in the output variable.
    Mult,
    /// Volterra kernel integrated from the lower end to the output point.
    Low,
    /// Volterra kernel integrated from the output point to the upper end.
    Up,
    /// Axis only on the codomain: polynomial embedding, kernel in the output variable.
    Embed,
    /// Axis only on the domain: full integration, kernel in the input variable.
    FullInt,
}

/// Number of parts an axis contributes given (codomain has axis, domain has axis).
const fn axis_parts(cod: bool, dom: bool) -> usize {
    if cod && dom {
        3
    } else {
        1
    }
}

/// Kind of axis part `p` given the axis signature.
pub const fn axis_part_kind(cod: bool, dom: bool, p: usize) -> PartKind {
    match (cod, dom) {
        (true, true) => match p {
            0 => PartKind::Mult,
            1 => PartKind::Low,
            _ => PartKind::Up,
        },
        (true, false) => PartKind::Embed,
        (false, true) => PartKind::FullInt,
        (false, false) => PartKind::None,
    }
}

/// Variables an axis part may mention, as (output var allowed, input var allowed).
const fn axis_part_vars(kind: PartKind) -> (bool, bool) {
    match kind {
        PartKind::None => (false, false),
        PartKind::Mult | PartKind::Embed => (true, false),
        PartKind::Low | PartKind::Up => (true, true),
        PartKind::FullInt => (false, true),
    }
}

/// One block of a PI operator: the tensor of its x- and s-axis structures.
///
/// Parts are stored row-major over (s-part, x-part); shapes are
/// `cod_dim × dom_dim` for every part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiBlock {
    pub cod_comp: usize,
    pub dom_comp: usize,
    pub parts: Vec<PolyMatrix>,
}

impl PiBlock {
    pub fn nx_parts(&self) -> usize {
        axis_parts(comp_has_x(self.cod_comp), comp_has_x(self.dom_comp))
    }

    pub fn ns_parts(&self) -> usize {
        axis_parts(comp_has_s(self.cod_comp), comp_has_s(self.dom_comp))
    }

    pub fn part_index(&self, px: usize, ps: usize) -> usize {
        ps * self.nx_parts() + px
    }

    pub fn part(&self, px: usize, ps: usize) -> &PolyMatrix {
        &self.parts[self.part_index(px, ps)]
    }

    pub fn x_kind(&self, px: usize) -> PartKind {
        axis_part_kind(comp_has_x(self.cod_comp), comp_has_x(self.dom_comp), px)
    }

    pub fn s_kind(&self, ps: usize) -> PartKind {
        axis_part_kind(comp_has_s(self.cod_comp), comp_has_s(self.dom_comp), ps)
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(PolyMatrix::is_zero)
    }
}

/// A block PI operator between two mixed spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiOperator {
    pub dom: ZSpace,
    pub cod: ZSpace,
    /// 16 blocks, row-major over (codomain component, domain component).
    pub blocks: Vec<PiBlock>,
}

/// Per-axis composition rule: combine part `a_part` of the left factor with
/// part `b_part` of the right factor into output part `out_part`, optionally
/// renaming the right factor's output variable to the input variable, and
/// optionally integrating the shared dummy variable over `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct AxisRule {
    a_part: usize,
    b_part: usize,
    b_out_to_in: bool,
    integrate: bool,
    lo: Bound,
    hi: Bound,
    out_part: usize,
}

/// Variable bundle for one axis.
#[derive(Debug, Clone, Copy)]
struct AxisVars {
    out: Var,
    inp: Var,
    dummy: Var,
    lo: f64,
    hi: f64,
}

impl AxisVars {
    fn x_axis(domain: Domain) -> Self {
        AxisVars { out: Var::X, inp: Var::Theta, dummy: Var::EtaX, lo: domain.a, hi: domain.b }
    }

    fn s_axis() -> Self {
        AxisVars { out: Var::S, inp: Var::Nu, dummy: Var::EtaS, lo: 0.0, hi: 1.0 }
    }
}

/// Composition rule table for one axis, by (codomain has axis, intermediate
/// has axis, domain has axis).
fn axis_rules(cod: bool, mid: bool, dom: bool, v: AxisVars) -> Vec<AxisRule> {
    let no_int = |a, b, b_ren, out| AxisRule {
        a_part: a,
        b_part: b,
        b_out_to_in: b_ren,
        integrate: false,
        lo: Bound::Const(0.0),
        hi: Bound::Const(0.0),
        out_part: out,
    };
    let int = |a, b, lo, hi, out| AxisRule {
        a_part: a,
        b_part: b,
        b_out_to_in: false,
        integrate: true,
        lo,
        hi,
        out_part: out,
    };
    let (ca, cb) = (Bound::Const(v.lo), Bound::Const(v.hi));
    let (vo, vi) = (Bound::Var(v.out), Bound::Var(v.inp));
    match (cod, mid, dom) {
        // Classic composition of two multiplier+Volterra structures.
        (true, true, true) => vec![
            no_int(0, 0, false, 0),
            no_int(0, 1, false, 1),
            no_int(0, 2, false, 2),
            no_int(1, 0, true, 1),
            no_int(2, 0, true, 2),
            int(1, 1, vi, vo, 1),
            int(1, 2, ca, vi, 1),
            int(2, 1, vo, cb, 1),
            int(1, 2, ca, vo, 2),
            int(2, 1, vi, cb, 2),
            int(2, 2, vo, vi, 2),
        ],
        // Volterra structure applied to an embedding.
        (true, true, false) => vec![
            no_int(0, 0, false, 0),
            int(1, 0, ca, vo, 0),
            int(2, 0, vo, cb, 0),
        ],
        // Full integration of a Volterra structure.
        (false, true, true) => vec![
            no_int(0, 0, true, 0),
            int(0, 1, vi, cb, 0),
            int(0, 2, ca, vi, 0),
        ],
        // Full integration of an embedding: a plain definite integral.
        (false, true, false) => vec![int(0, 0, ca, cb, 0)],
        // Intermediate lacks the axis: outer product of embedding and full
        // integration; the separable kernel feeds both Volterra parts.
        (true, false, true) => vec![no_int(0, 0, false, 1), no_int(0, 0, false, 2)],
        (true, false, false) | (false, false, true) | (false, false, false) => {
            vec![no_int(0, 0, false, 0)]
        }
    }
}

impl PiOperator {
    /// The zero operator between two spaces.
    pub fn zero(dom: &ZSpace, cod: &ZSpace) -> Self {
        assert!(
            dom.domain.approx_eq(&cod.domain),
            "operator between spaces over different spatial domains"
        );
        let mut blocks = Vec::with_capacity(16);
        for ci in 0..4 {
            for cj in 0..4 {
                let nxp = axis_parts(comp_has_x(ci), comp_has_x(cj));
                let nsp = axis_parts(comp_has_s(ci), comp_has_s(cj));
                let m = PolyMatrix::zeros(cod.comp_dim(ci), dom.comp_dim(cj), dom.domain);
                blocks.push(PiBlock { cod_comp: ci, dom_comp: cj, parts: vec![m; nxp * nsp] });
            }
        }
        PiOperator { dom: *dom, cod: *cod, blocks }
    }

    /// The identity operator on a space.
    pub fn identity(space: &ZSpace) -> Self {
        let mut p = PiOperator::zero(space, space);
        for c in 0..4 {
            let n = space.comp_dim(c);
            if n == 0 {
                continue;
            }
            // Multiplier part on every axis the component carries: index (0, 0).
            let eye = PolyMatrix::identity(n, space.domain);
            p.set_part(c, c, 0, 0, eye).expect("identity block is valid");
        }
        p
    }

    pub fn block(&self, ci: usize, cj: usize) -> &PiBlock {
        &self.blocks[ci * 4 + cj]
    }

    fn block_mut(&mut self, ci: usize, cj: usize) -> &mut PiBlock {
        &mut self.blocks[ci * 4 + cj]
    }

    /// Install one kernel part of a block, validating shape, domain and the
    /// variables the part's signature permits.
    pub fn set_part(
        &mut self,
        ci: usize,
        cj: usize,
        px: usize,
        ps: usize,
        m: PolyMatrix,
    ) -> Result<(), PiError> {
        let (rows, cols) = (self.cod.comp_dim(ci), self.dom.comp_dim(cj));
        if m.rows() != rows || m.cols() != cols {
            return Err(PiError::InvalidBlock(format!(
                "block ({ci},{cj}) expects {rows}x{cols}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.domain().approx_eq(&self.dom.domain) {
            return Err(PiError::InvalidBlock(format!(
                "block ({ci},{cj}) kernel domain [{}, {}] differs from operator domain",
                m.domain().a,
                m.domain().b
            )));
        }
        let blk = self.block(ci, cj);
        if px >= blk.nx_parts() || ps >= blk.ns_parts() {
            return Err(PiError::InvalidBlock(format!(
                "part ({px},{ps}) out of range for block ({ci},{cj})"
            )));
        }
        let (x_out, x_in) = axis_part_vars(blk.x_kind(px));
        let (s_out, s_in) = axis_part_vars(blk.s_kind(ps));
        for (var, allowed) in [
            (Var::X, x_out),
            (Var::Theta, x_in),
            (Var::S, s_out),
            (Var::Nu, s_in),
            (Var::EtaX, false),
            (Var::EtaS, false),
        ] {
            if !allowed && m.contains(var) {
                return Err(PiError::InvalidBlock(format!(
                    "block ({ci},{cj}) part ({px},{ps}) may not mention variable {}",
                    var.name()
                )));
            }
        }
        let idx = blk.part_index(px, ps);
        self.block_mut(ci, cj).parts[idx] = m;
        Ok(())
    }

    /// Accumulate into one kernel part of a block.
    pub fn add_part(
        &mut self,
        ci: usize,
        cj: usize,
        px: usize,
        ps: usize,
        m: &PolyMatrix,
    ) -> Result<(), PiError> {
        let blk = self.block(ci, cj);
        let idx = blk.part_index(px, ps);
        let sum = self.blocks[ci * 4 + cj].parts[idx].add(m)?;
        self.set_part(ci, cj, px, ps, sum)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(PiBlock::is_zero)
    }

    /// Blockwise sum.
    pub fn add(&self, other: &PiOperator) -> Result<PiOperator, PiError> {
        if !self.dom.compatible(&other.dom) || !self.cod.compatible(&other.cod) {
            return Err(PiError::SpaceMismatch("add requires identical spaces".into()));
        }
        let mut out = self.clone();
        for (b, ob) in out.blocks.iter_mut().zip(&other.blocks) {
            for (p, op) in b.parts.iter_mut().zip(&ob.parts) {
                *p = p.add(op)?;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &PiOperator) -> Result<PiOperator, PiError> {
        self.add(&other.scale(-1.0))
    }

    /// Scalar multiple.
    pub fn scale(&self, k: f64) -> PiOperator {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for p in &mut b.parts {
                *p = p.scale(k);
            }
        }
        out
    }

    /// Operator composition `self ∘ other` by exact polynomial integration.
    pub fn compose(&self, other: &PiOperator) -> Result<PiOperator, PiError> {
        if !self.dom.compatible(&other.cod) {
            return Err(PiError::SpaceMismatch(format!(
                "compose: left domain {:?} != right codomain {:?}",
                self.dom.dims(),
                other.cod.dims()
            )));
        }
        let xv = AxisVars::x_axis(self.dom.domain);
        let sv = AxisVars::s_axis();
        let mut out = PiOperator::zero(&other.dom, &self.cod);
        for ci in 0..4 {
            if self.cod.comp_dim(ci) == 0 {
                continue;
            }
            for cj in 0..4 {
                if other.dom.comp_dim(cj) == 0 {
                    continue;
                }
                for ck in 0..4 {
                    if self.dom.comp_dim(ck) == 0 {
                        continue;
                    }
                    let ab = self.block(ci, ck);
                    let bb = other.block(ck, cj);
                    if ab.is_zero() || bb.is_zero() {
                        continue;
                    }
                    let x_rules =
                        axis_rules(comp_has_x(ci), comp_has_x(ck), comp_has_x(cj), xv);
                    let s_rules =
                        axis_rules(comp_has_s(ci), comp_has_s(ck), comp_has_s(cj), sv);
                    for rx in &x_rules {
                        for rs in &s_rules {
                            let a_k = ab.part(rx.a_part, rs.a_part);
                            let b_k = bb.part(rx.b_part, rs.b_part);
                            if a_k.is_zero() || b_k.is_zero() {
                                continue;
                            }
                            let mut a_ren = a_k.clone();
                            let mut b_ren = b_k.clone();
                            if rx.integrate {
                                a_ren = a_ren.subs_var(xv.inp, xv.dummy);
                                b_ren = b_ren.subs_var(xv.out, xv.dummy);
                            } else if rx.b_out_to_in {
                                b_ren = b_ren.subs_var(xv.out, xv.inp);
                            }
                            if rs.integrate {
                                a_ren = a_ren.subs_var(sv.inp, sv.dummy);
                                b_ren = b_ren.subs_var(sv.out, sv.dummy);
                            } else if rs.b_out_to_in {
                                b_ren = b_ren.subs_var(sv.out, sv.inp);
                            }
                            let mut prod = a_ren.matmul(&b_ren)?;
                            if rx.integrate {
                                prod = prod.integrate(xv.dummy, rx.lo, rx.hi)?;
                            }
                            if rs.integrate {
                                prod = prod.integrate(sv.dummy, rs.lo, rs.hi)?;
                            }
                            out.add_part(ci, cj, rx.out_part, rs.out_part, &prod)?;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adjoint with respect to the Z inner product.
    pub fn adjoint(&self) -> PiOperator {
        let mut out = PiOperator::zero(&self.cod, &self.dom);
        for ci in 0..4 {
            for cj in 0..4 {
                let blk = self.block(ci, cj);
                if blk.is_zero() {
                    continue;
                }
                for px in 0..blk.nx_parts() {
                    for ps in 0..blk.ns_parts() {
                        let k = blk.part(px, ps);
                        if k.is_zero() {
                            continue;
                        }
                        let mut m = k.transpose();
                        // Per-axis dualization.
                        let (apx, m2) = adjoint_axis(m, blk.x_kind(px), Var::X, Var::Theta);
                        m = m2;
                        let (aps, m3) = adjoint_axis(m, blk.s_kind(ps), Var::S, Var::Nu);
                        m = m3;
                        out.add_part(cj, ci, apx, aps, &m).expect("adjoint block valid");
                    }
                }
            }
        }
        out
    }

    /// Coefficient-wise comparison within `tol` after canonicalization.
    pub fn approx_eq(&self, other: &PiOperator, tol: f64) -> bool {
        if !self.dom.compatible(&other.dom) || !self.cod.compatible(&other.cod) {
            return false;
        }
        self.max_coeff_diff(other) <= tol
    }

    /// Largest absolute kernel-coefficient difference across all blocks.
    pub fn max_coeff_diff(&self, other: &PiOperator) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(b, ob)| b.parts.iter().zip(&ob.parts))
            .map(|(p, op)| p.max_coeff_diff(op))
            .fold(0.0, f64::max)
    }

    /// Exact application to a polynomial-valued state.
    pub fn apply(&self, u: &ZFunction) -> Result<ZFunction, PiError> {
        if !u.space.compatible(&self.dom) {
            return Err(PiError::SpaceMismatch("apply: function not in operator domain".into()));
        }
        let d = self.dom.domain;
        let mut out = ZFunction::zero(&self.cod);
        for ci in 0..4 {
            if self.cod.comp_dim(ci) == 0 {
                continue;
            }
            let mut acc = PolyMatrix::zeros(self.cod.comp_dim(ci), 1, d);
            for cj in 0..4 {
                if self.dom.comp_dim(cj) == 0 {
                    continue;
                }
                let blk = self.block(ci, cj);
                for px in 0..blk.nx_parts() {
                    for ps in 0..blk.ns_parts() {
                        let k = blk.part(px, ps);
                        if k.is_zero() {
                            continue;
                        }
                        let mut f = u.comp(cj).clone();
                        // Rename the function's axis variables to the block's
                        // input variables where integration will occur.
                        let x_kind = blk.x_kind(px);
                        let s_kind = blk.s_kind(ps);
                        if matches!(x_kind, PartKind::Low | PartKind::Up | PartKind::FullInt) {
                            f = f.subs_var(Var::X, Var::Theta);
                        }
                        if matches!(s_kind, PartKind::Low | PartKind::Up | PartKind::FullInt) {
                            f = f.subs_var(Var::S, Var::Nu);
                        }
                        let mut term = k.matmul(&f)?;
                        term = match x_kind {
                            PartKind::Low => term.integrate(
                                Var::Theta,
                                Bound::Const(d.a),
                                Bound::Var(Var::X),
                            )?,
                            PartKind::Up => term.integrate(
                                Var::Theta,
                                Bound::Var(Var::X),
                                Bound::Const(d.b),
                            )?,
                            PartKind::FullInt => term.integrate(
                                Var::Theta,
                                Bound::Const(d.a),
                                Bound::Const(d.b),
                            )?,
                            _ => term,
                        };
                        term = match s_kind {
                            PartKind::Low => term.integrate(
                                Var::Nu,
                                Bound::Const(0.0),
                                Bound::Var(Var::S),
                            )?,
                            PartKind::Up => term.integrate(
                                Var::Nu,
                                Bound::Var(Var::S),
                                Bound::Const(1.0),
                            )?,
                            PartKind::FullInt => term.integrate(
                                Var::Nu,
                                Bound::Const(0.0),
                                Bound::Const(1.0),
                            )?,
                            _ => term,
                        };
                        acc = acc.add(&term)?;
                    }
                }
            }
            out.set_comp(ci, acc);
        }
        Ok(out)
    }

    /// Independent numeric application: evaluate the output of component `ci`
    /// at the point `(s, x)` by sampling the kernels and the state and
    /// integrating with an `nodes`-point Gauss–Legendre rule per axis. Shares
    /// no code path with [`PiOperator::apply`], so agreement between the two
    /// is a meaningful cross-check.
    pub fn apply_at_quadrature(
        &self,
        u: &ZFunction,
        ci: usize,
        s: f64,
        x: f64,
        nodes: usize,
    ) -> Result<Vec<f64>, PiError> {
        if !u.space.compatible(&self.dom) {
            return Err(PiError::SpaceMismatch("apply: function not in operator domain".into()));
        }
        let d = self.dom.domain;
        let mut acc = vec![0.0; self.cod.comp_dim(ci)];
        for cj in 0..4 {
            if self.dom.comp_dim(cj) == 0 {
                continue;
            }
            let blk = self.block(ci, cj);
            for px in 0..blk.nx_parts() {
                for ps in 0..blk.ns_parts() {
                    let k = blk.part(px, ps);
                    if k.is_zero() {
                        continue;
                    }
                    // Integration nodes per axis: (θ or ν sample, weight). A
                    // single unit-weight node stands in for non-integral axes.
                    let x_nodes: Vec<(f64, f64)> = match blk.x_kind(px) {
                        PartKind::Low => gauss_nodes(nodes, d.a, x),
                        PartKind::Up => gauss_nodes(nodes, x, d.b),
                        PartKind::FullInt => gauss_nodes(nodes, d.a, d.b),
                        _ => vec![(x, 1.0)],
                    };
                    let s_nodes: Vec<(f64, f64)> = match blk.s_kind(ps) {
                        PartKind::Low => gauss_nodes(nodes, 0.0, s),
                        PartKind::Up => gauss_nodes(nodes, s, 1.0),
                        PartKind::FullInt => gauss_nodes(nodes, 0.0, 1.0),
                        _ => vec![(s, 1.0)],
                    };
                    for &(theta, wx) in &x_nodes {
                        for &(nu, ws) in &s_nodes {
                            let kpt = [x, theta, s, nu, 0.0, 0.0];
                            // The state's own coordinates are the integration
                            // variables where integration occurs.
                            let upt = [theta, 0.0, nu, 0.0, 0.0, 0.0];
                            let uv = u.comp(cj).eval(&upt);
                            for i in 0..acc.len() {
                                let mut row = 0.0;
                                for (j, uvj) in uv.iter().enumerate() {
                                    row += k.get(i, j).eval(&kpt) * uvj;
                                }
                                acc[i] += wx * ws * row;
                            }
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Restrict to a sub-operator given half-open component index ranges per
    /// component of codomain and domain (used when splitting stacked systems).
    pub fn submatrix(
        &self,
        cod_ranges: [(usize, usize); 4],
        dom_ranges: [(usize, usize); 4],
        cod_space: &ZSpace,
        dom_space: &ZSpace,
    ) -> PiOperator {
        let mut out = PiOperator::zero(dom_space, cod_space);
        for ci in 0..4 {
            for cj in 0..4 {
                let blk = self.block(ci, cj);
                let (r0, r1) = cod_ranges[ci];
                let (c0, c1) = dom_ranges[cj];
                let nb = out.block(ci, cj).parts.len();
                for idx in 0..nb {
                    let m = blk.parts[idx].slice(r0, r1, c0, c1);
                    out.block_mut(ci, cj).parts[idx] = m;
                }
            }
        }
        out
    }

    /// A conservative upper bound on the operator norm: per block, the
    /// multiplier contributes its sup-norm bound (sum of absolute coefficients
    /// scaled by the domain's monomial maxima) and every kernel part its
    /// Hilbert–Schmidt norm; blocks are summed.
    pub fn norm_upper_bound(&self) -> f64 {
        let d = self.dom.domain;
        let mut total = 0.0f64;
        for blk in &self.blocks {
            for px in 0..blk.nx_parts() {
                for ps in 0..blk.ns_parts() {
                    let k = blk.part(px, ps);
                    if k.is_zero() {
                        continue;
                    }
                    let pure_mult = matches!(blk.x_kind(px), PartKind::Mult | PartKind::None)
                        && matches!(blk.s_kind(ps), PartKind::Mult | PartKind::None);
                    if pure_mult {
                        // Frobenius bound on the sup over the domain.
                        let mut fro2 = 0.0;
                        for i in 0..k.rows() {
                            for j in 0..k.cols() {
                                let mut sup = 0.0;
                                for (m, c) in k.get(i, j).terms() {
                                    let mut t = c.abs();
                                    let xmax = d.a.abs().max(d.b.abs()).max(1e-300);
                                    for (vi, e) in m.iter().enumerate() {
                                        if *e > 0 {
                                            let vmax = match Var::ALL[vi] {
                                                Var::X | Var::Theta => xmax,
                                                _ => 1.0,
                                            };
                                            t *= vmax.powi(*e as i32);
                                        }
                                    }
                                    sup += t;
                                }
                                fro2 += sup * sup;
                            }
                        }
                        total += fro2.sqrt();
                    } else {
                        // Hilbert–Schmidt norm of the kernel over its box.
                        let mut sq = PolyMatrix::zeros(1, 1, d);
                        let mut acc = Poly::zero();
                        for i in 0..k.rows() {
                            for j in 0..k.cols() {
                                let p = k.get(i, j);
                                if let Ok(p2) = p.mul(p, crate::polykernel::DEGREE_CAP) {
                                    acc = acc.add(&p2);
                                }
                            }
                        }
                        sq.set(0, 0, acc);
                        let mut integ = sq;
                        for v in [Var::X, Var::Theta] {
                            if integ.contains(v) {
                                integ = integ
                                    .integrate(v, Bound::Const(d.a), Bound::Const(d.b))
                                    .unwrap_or_else(|_| PolyMatrix::zeros(1, 1, d));
                            }
                        }
                        for v in [Var::S, Var::Nu] {
                            if integ.contains(v) {
                                integ = integ
                                    .integrate(v, Bound::Const(0.0), Bound::Const(1.0))
                                    .unwrap_or_else(|_| PolyMatrix::zeros(1, 1, d));
                            }
                        }
                        let val = integ.get(0, 0).eval(&[0.0; crate::polykernel::NVARS]);
                        total += val.max(0.0).sqrt();
                    }
                }
            }
        }
        total
    }
}

/// Dualize one axis of a kernel part: returns the adjoint's part index on that
/// axis and the transformed kernel.
fn adjoint_axis(m: PolyMatrix, kind: PartKind, out_v: Var, in_v: Var) -> (usize, PolyMatrix) {
    match kind {
        PartKind::None => (0, m),
        PartKind::Mult => (0, m),
        PartKind::Low => (2, m.swap_vars(out_v, in_v)),
        PartKind::Up => (1, m.swap_vars(out_v, in_v)),
        // Embedding (kernel in the output var) dualizes to full integration
        // (kernel in the input var) and vice versa.
        PartKind::Embed => (0, m.subs_var(out_v, in_v)),
        PartKind::FullInt => (0, m.subs_var(in_v, out_v)),
    }
}

/// A concrete element of a Z space with polynomial-valued components.
///
/// Components are column vectors: the finite part constant, the `L2[s]` part a
/// polynomial in `s`, the `L2[x]` part in `x`, the joint part in `(s, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZFunction {
    pub space: ZSpace,
    comps: Vec<PolyMatrix>,
}

impl ZFunction {
    pub fn zero(space: &ZSpace) -> Self {
        let comps =
            (0..4).map(|c| PolyMatrix::zeros(space.comp_dim(c), 1, space.domain)).collect();
        ZFunction { space: *space, comps }
    }

    pub fn comp(&self, c: usize) -> &PolyMatrix {
        &self.comps[c]
    }

    /// Install a component, validating shape and permitted variables.
    pub fn set_comp(&mut self, c: usize, m: PolyMatrix) {
        assert_eq!(m.rows(), self.space.comp_dim(c), "component {c} row mismatch");
        assert_eq!(m.cols(), 1, "components are column vectors");
        for v in [Var::Theta, Var::Nu, Var::EtaX, Var::EtaS] {
            assert!(!m.contains(v), "component may not mention {}", v.name());
        }
        if !comp_has_x(c) {
            assert!(!m.contains(Var::X), "component {c} may not mention x");
        }
        if !comp_has_s(c) {
            assert!(!m.contains(Var::S), "component {c} may not mention s");
        }
        self.comps[c] = m;
    }

    pub fn add(&self, other: &ZFunction) -> Result<ZFunction, PiError> {
        if !self.space.compatible(&other.space) {
            return Err(PiError::SpaceMismatch("zfunction add".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(&other.comps) {
            *a = a.add(b)?;
        }
        Ok(out)
    }

    pub fn scale(&self, k: f64) -> ZFunction {
        let mut out = self.clone();
        for c in &mut out.comps {
            *c = c.scale(k);
        }
        out
    }

    /// Exact Z inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &ZFunction) -> Result<f64, PiError> {
        if !self.space.compatible(&other.space) {
            return Err(PiError::SpaceMismatch("inner product".into()));
        }
        let d = self.space.domain;
        let mut total = 0.0;
        for c in 0..4 {
            if self.space.comp_dim(c) == 0 {
                continue;
            }
            let prod = self.comps[c].transpose().matmul(&other.comps[c])?;
            let mut p = prod;
            if comp_has_x(c) {
                p = p.integrate(Var::X, Bound::Const(d.a), Bound::Const(d.b))?;
            }
            if comp_has_s(c) {
                p = p.integrate(Var::S, Bound::Const(0.0), Bound::Const(1.0))?;
            }
            total += p.get(0, 0).eval(&[0.0; crate::polykernel::NVARS]);
        }
        Ok(total)
    }

    /// Norm induced by the Z inner product.
    pub fn norm(&self) -> f64 {
        self.inner(self).map(|v| v.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Point evaluation of all components at `(s, x)`.
    pub fn eval_at(&self, s: f64, x: f64) -> Vec<f64> {
        let mut point = [0.0; crate::polykernel::NVARS];
        point[Var::X.index()] = x;
        point[Var::S.index()] = s;
        let mut out = Vec::new();
        for c in 0..4 {
            out.extend(self.comps[c].eval(&point));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polykernel::DEGREE_CAP;

    fn dom01() -> Domain {
        Domain::new(0.0, 1.0)
    }

    fn full_space() -> ZSpace {
        ZSpace::new(1, 1, 1, 1, dom01())
    }

    /// A deterministic non-trivial operator exercising many block signatures.
    fn sample_operator(seed: u32) -> PiOperator {
        let sp = full_space();
        let mut p = PiOperator::zero(&sp, &sp);
        let f = f64::from(seed % 7) * 0.25 + 0.5;
        let d = dom01();
        let x = Poly::var(Var::X);
        let th = Poly::var(Var::Theta);
        let s = Poly::var(Var::S);
        let nu = Poly::var(Var::Nu);
        // comp0 -> comp0.
        p.set_part(0, 0, 0, 0, PolyMatrix::from_poly(Poly::constant(f), d)).unwrap();
        // comp2 -> comp2 triple.
        p.set_part(2, 2, 0, 0, PolyMatrix::from_poly(x.clone().scale(f), d)).unwrap();
        p.set_part(
            2,
            2,
            1,
            0,
            PolyMatrix::from_poly(x.mul(&th, DEGREE_CAP).unwrap(), d),
        )
        .unwrap();
        p.set_part(2, 2, 2, 0, PolyMatrix::from_poly(th.clone(), d)).unwrap();
        // comp1 -> comp1 triple in s.
        p.set_part(1, 1, 0, 0, PolyMatrix::from_poly(s.clone(), d)).unwrap();
        p.set_part(1, 1, 0, 1, PolyMatrix::from_poly(nu.scale(f), d)).unwrap();
        // comp3 -> comp2: integrate out s.
        p.set_part(2, 3, 0, 0, PolyMatrix::from_poly(Poly::var(Var::Nu), d)).unwrap();
        // comp2 -> comp3: embed in s.
        p.set_part(3, 2, 0, 0, PolyMatrix::from_poly(s.scale(0.5), d)).unwrap();
        // comp0 -> comp3 embed both axes.
        p.set_part(3, 0, 0, 0, PolyMatrix::from_poly(x.mul(&s, DEGREE_CAP).unwrap(), d))
            .unwrap();
        // comp3 -> comp0 full integration both axes.
        p.set_part(0, 3, 0, 0, PolyMatrix::from_poly(th.scale(f), d)).unwrap();
        p
    }

    fn sample_function() -> ZFunction {
        let sp = full_space();
        let d = dom01();
        let mut u = ZFunction::zero(&sp);
        u.set_comp(0, PolyMatrix::from_poly(Poly::constant(1.5), d));
        u.set_comp(1, PolyMatrix::from_poly(Poly::monomial(Var::S, 2, 1.0), d));
        u.set_comp(2, PolyMatrix::from_poly(Poly::var(Var::X).add(&Poly::constant(0.25)), d));
        u.set_comp(
            3,
            PolyMatrix::from_poly(
                Poly::var(Var::S).mul(&Poly::var(Var::X), DEGREE_CAP).unwrap(),
                d,
            ),
        );
        u
    }

    #[test]
    fn identity_is_neutral() {
        let u = sample_function();
        let id = PiOperator::identity(&full_space());
        let v = id.apply(&u).unwrap();
        for c in 0..4 {
            assert!(u.comp(c).max_coeff_diff(v.comp(c)) < 1e-14);
        }
    }

    #[test]
    fn add_matches_pointwise_sum() {
        let p = sample_operator(1);
        let q = sample_operator(3);
        let u = sample_function();
        let lhs = p.add(&q).unwrap().apply(&u).unwrap();
        let rhs = p.apply(&u).unwrap().add(&q.apply(&u).unwrap()).unwrap();
        for c in 0..4 {
            assert!(lhs.comp(c).max_coeff_diff(rhs.comp(c)) < 1e-12);
        }
    }

    #[test]
    fn compose_matches_sequential_application() {
        let p = sample_operator(2);
        let q = sample_operator(5);
        let u = sample_function();
        let lhs = p.compose(&q).unwrap().apply(&u).unwrap();
        let rhs = p.apply(&q.apply(&u).unwrap()).unwrap();
        for c in 0..4 {
            assert!(
                lhs.comp(c).max_coeff_diff(rhs.comp(c)) < 1e-11,
                "component {c} mismatch: {}",
                lhs.comp(c).max_coeff_diff(rhs.comp(c))
            );
        }
    }

    #[test]
    fn adjoint_is_involution() {
        let p = sample_operator(4);
        let pp = p.adjoint().adjoint();
        assert!(p.approx_eq(&pp, 1e-12));
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let p = sample_operator(6);
        let u = sample_function();
        let v = sample_function().scale(0.7);
        let lhs = p.apply(&u).unwrap().inner(&v).unwrap();
        let rhs = u.inner(&p.adjoint().apply(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-11, "{lhs} vs {rhs}");
    }

    #[test]
    fn adjoint_reverses_composition() {
        let p = sample_operator(2);
        let q = sample_operator(5);
        let lhs = p.compose(&q).unwrap().adjoint();
        let rhs = q.adjoint().compose(&p.adjoint()).unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-11));
    }

    #[test]
    fn volterra_squared_gives_cauchy_kernel() {
        // (∫_a^x ·)² has lower kernel (x − θ).
        let sp = ZSpace::new(0, 0, 1, 0, dom01());
        let mut v = PiOperator::zero(&sp, &sp);
        v.set_part(2, 2, 1, 0, PolyMatrix::from_poly(Poly::constant(1.0), dom01())).unwrap();
        let v2 = v.compose(&v).unwrap();
        let low = v2.block(2, 2).part(1, 0);
        let expect = Poly::var(Var::X).add(&Poly::var(Var::Theta).scale(-1.0));
        assert!(low.get(0, 0).max_coeff_diff(&expect) < 1e-14);
        assert!(v2.block(2, 2).part(0, 0).is_zero());
        assert!(v2.block(2, 2).part(2, 0).is_zero());
    }

    #[test]
    fn invalid_variable_rejected() {
        let sp = ZSpace::new(0, 0, 1, 0, dom01());
        let mut p = PiOperator::zero(&sp, &sp);
        // A multiplier part may not mention θ.
        let err = p.set_part(2, 2, 0, 0, PolyMatrix::from_poly(Poly::var(Var::Theta), dom01()));
        assert!(err.is_err());
    }
}
