//! Semidefinite feasibility problems, an in-process interior-point solver,
//! and SDPA sparse-format interchange.
//!
//! A problem asks for block-diagonal `M ⪰ 0` satisfying linear equalities
//! `Σ ⟨A_k, M⟩ = b_k`. The solver runs a phase-I reformulation
//! `max t  s.t.  M − tI ⪰ 0` as a primal–dual path-following method with
//! Nesterov–Todd scaling: a positive optimal `t` yields a strictly feasible
//! witness (verified independently before reporting), while a Farkas dual ray
//! (`Σ y_k A_k ⪯ 0`, `bᵀy > 0`) certifies infeasibility. Anything else is
//! reported as `Unknown` — never a false `Feasible`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One PSD block of the decision variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpBlock {
    pub name: String,
    pub size: usize,
    /// Diagonal-only block (exported with a negative size per SDPA custom).
    pub diag: bool,
}

impl SdpBlock {
    pub fn dense(name: impl Into<String>, size: usize) -> Self {
        SdpBlock { name: name.into(), size, diag: false }
    }
}

/// One coefficient of a constraint: `value` at position `(i, j)` of block
/// `block`, stored upper-triangle (`i ≤ j`) and implicitly symmetrized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Linear equality `Σ ⟨A_k, M⟩ = b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpConstraint {
    pub entries: Vec<SdpEntry>,
    pub b: f64,
    /// Origin label (operator-equation coefficient this row matches).
    pub label: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<SdpBlock>,
    pub constraints: Vec<SdpConstraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<SdpBlock>) -> Self {
        SdpProblem { blocks, constraints: Vec::new() }
    }

    pub fn add_constraint(&mut self, entries: Vec<SdpEntry>, b: f64, label: impl Into<String>) {
        self.constraints.push(SdpConstraint { entries, b, label: label.into() });
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        for (k, c) in self.constraints.iter().enumerate() {
            if !c.b.is_finite() {
                return Err(SdpError::Invalid(format!("constraint {k}: non-finite rhs")));
            }
            for e in &c.entries {
                let blk = self.blocks.get(e.block).ok_or_else(|| {
                    SdpError::Invalid(format!("constraint {k}: block {} out of range", e.block))
                })?;
                if e.i > e.j || e.j >= blk.size {
                    return Err(SdpError::Invalid(format!(
                        "constraint {k}: entry ({}, {}) outside upper triangle of {}-block",
                        e.i, e.j, blk.size
                    )));
                }
                if blk.diag && e.i != e.j {
                    return Err(SdpError::Invalid(format!(
                        "constraint {k}: off-diagonal entry in diagonal block {}",
                        blk.name
                    )));
                }
                if !e.value.is_finite() {
                    return Err(SdpError::Invalid(format!("constraint {k}: non-finite entry")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpResult {
    pub status: SdpStatus,
    /// One dense symmetric matrix per block (empty unless `Feasible`).
    pub block_values: Vec<Vec<Vec<f64>>>,
    /// Max |⟨A_k, M⟩ − b_k| of the returned witness.
    pub max_residual: f64,
    /// Min eigenvalue over the witness blocks.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// Evaluate a candidate witness against the problem: returns
/// `(max equality residual, min block eigenvalue)`.
pub fn check_witness(problem: &SdpProblem, values: &[Vec<Vec<f64>>]) -> (f64, f64) {
    let mut max_res: f64 = 0.0;
    for c in &problem.constraints {
        let mut s = 0.0;
        for e in &c.entries {
            let v = values[e.block][e.i][e.j];
            s += if e.i == e.j { e.value * v } else { 2.0 * e.value * v };
        }
        max_res = max_res.max((s - c.b).abs());
    }
    let mut min_eig = f64::INFINITY;
    for m in values {
        let n = m.len();
        if n == 0 {
            continue;
        }
        let a = Array2::from_shape_fn((n, n), |(i, j)| m[i][j]);
        if let Ok((ev, _)) = a.eigh(UPLO::Lower) {
            min_eig = min_eig.min(ev.iter().cloned().fold(f64::INFINITY, f64::min));
        } else {
            min_eig = f64::NEG_INFINITY;
        }
    }
    if min_eig == f64::INFINITY {
        min_eig = 0.0;
    }
    (max_res, min_eig)
}

// ---------------------------------------------------------------------------
// Interior-point solver
// ---------------------------------------------------------------------------

/// Block-diagonal symmetric matrix.
#[derive(Debug, Clone)]
struct BlockMat(Vec<Array2<f64>>);

impl BlockMat {
    fn zeros(sizes: &[usize]) -> Self {
        BlockMat(sizes.iter().map(|&n| Array2::zeros((n, n))).collect())
    }

    fn identity(sizes: &[usize], scale: f64) -> Self {
        BlockMat(sizes.iter().map(|&n| Array2::eye(n) * scale).collect())
    }

    fn dot(&self, other: &BlockMat) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    fn axpy(&mut self, alpha: f64, other: &BlockMat) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.scaled_add(alpha, b);
        }
    }

    #[allow(dead_code)]
    fn total_dim(&self) -> usize {
        self.0.iter().map(|a| a.nrows()).sum()
    }
}

/// Symmetric eigendecomposition helper returning `f(Λ)`-transformed matrix.
fn sym_fn(a: &Array2<f64>, f: impl Fn(f64) -> f64) -> Option<Array2<f64>> {
    if a.nrows() == 0 {
        return Some(a.clone());
    }
    let sym = 0.5 * (a + &a.t());
    let (ev, vecs) = sym.eigh(UPLO::Lower).ok()?;
    let fd: Array1<f64> = ev.iter().map(|&l| f(l)).collect();
    if fd.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let scaled = &vecs * &fd; // column-scaled V·f(Λ)
    Some(scaled.dot(&vecs.t()))
}

fn min_eig(a: &Array2<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = 0.5 * (a + &a.t());
    match sym.eigh(UPLO::Lower) {
        Ok((ev, _)) => ev.iter().cloned().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Largest `α ∈ (0, 1]` with `X + α ΔX ⪰ (1−0.99·margin)…`, by symmetric
/// generalized eigenvalue bound: `α = min(1, −0.9/λ_min(X^{-1/2} ΔX X^{-1/2}))`.
fn max_step(x: &BlockMat, dx: &BlockMat) -> Option<f64> {
    let mut alpha: f64 = 1.0;
    for (xb, db) in x.0.iter().zip(&dx.0) {
        if xb.nrows() == 0 {
            continue;
        }
        let xihalf = sym_fn(xb, |l| if l > 0.0 { l.powf(-0.5) } else { f64::NAN })?;
        let m = xihalf.dot(db).dot(&xihalf);
        let lmin = min_eig(&m);
        if lmin < 0.0 {
            alpha = alpha.min(-0.9 / lmin);
        }
    }
    Some(alpha)
}

struct PhaseOne<'a> {
    problem: &'a SdpProblem,
    /// Main block sizes followed by the two 1×1 phase-I blocks (t⁺, t⁻).
    sizes: Vec<usize>,
    /// tr(A_k) over main blocks, the phase-I coupling coefficients.
    traces: Vec<f64>,
}

impl<'a> PhaseOne<'a> {
    fn new(problem: &'a SdpProblem) -> Self {
        let mut sizes: Vec<usize> = problem.blocks.iter().map(|b| b.size).collect();
        sizes.push(1);
        sizes.push(1);
        let traces = problem
            .constraints
            .iter()
            .map(|c| c.entries.iter().filter(|e| e.i == e.j).map(|e| e.value).sum())
            .collect();
        PhaseOne { problem, sizes, traces }
    }

    fn nb(&self) -> usize {
        self.problem.blocks.len()
    }

    /// ⟨A_k, X⟩ including the phase-I `t` coupling.
    fn apply(&self, x: &BlockMat) -> Vec<f64> {
        self.problem
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let mut s = 0.0;
                for e in &c.entries {
                    let v = x.0[e.block][[e.i, e.j]];
                    s += if e.i == e.j { e.value * v } else { 2.0 * e.value * v };
                }
                s + self.traces[k] * (x.0[self.nb()][[0, 0]] - x.0[self.nb() + 1][[0, 0]])
            })
            .collect()
    }

    /// Σ y_k A_k as a block matrix (phase-I blocks included).
    fn adjoint(&self, y: &[f64]) -> BlockMat {
        let mut out = BlockMat::zeros(&self.sizes);
        for (k, c) in self.problem.constraints.iter().enumerate() {
            let yk = y[k];
            if yk == 0.0 {
                continue;
            }
            for e in &c.entries {
                out.0[e.block][[e.i, e.j]] += yk * e.value;
                if e.i != e.j {
                    out.0[e.block][[e.j, e.i]] += yk * e.value;
                }
            }
            out.0[self.nb()][[0, 0]] += yk * self.traces[k];
            out.0[self.nb() + 1][[0, 0]] -= yk * self.traces[k];
        }
        out
    }

    /// Objective `C` for `min ⟨C, X⟩` = `min (−t⁺ + t⁻)`.
    fn objective(&self) -> BlockMat {
        let mut c = BlockMat::zeros(&self.sizes);
        c.0[self.nb()][[0, 0]] = -1.0;
        c.0[self.nb() + 1][[0, 0]] = 1.0;
        c
    }
}

/// Solve the feasibility problem. `tol` bounds the witness equality residual
/// (relative to `1 + ‖b‖∞`) and the interior-point convergence measures.
///
/// The right side is normalized to unit scale first (the witness scales
/// linearly with `b`), so tolerances are meaningful for very small or very
/// large problem data.
pub fn solve(problem: &SdpProblem, tol: f64) -> Result<SdpResult, SdpError> {
    problem.validate()?;
    let bnorm = problem.constraints.iter().fold(0.0f64, |a, c| a.max(c.b.abs()));
    if bnorm > 0.0 && !(1e-3..=1e3).contains(&bnorm) {
        let mut scaled = problem.clone();
        for c in &mut scaled.constraints {
            c.b /= bnorm;
        }
        let mut r = solve_core(&scaled, tol, bnorm)?;
        if !r.block_values.is_empty() {
            for blk in &mut r.block_values {
                for row in blk {
                    for v in row {
                        *v *= bnorm;
                    }
                }
            }
            let (res, eig) = check_witness(problem, &r.block_values);
            r.max_residual = res;
            r.min_eigenvalue = eig;
            // A near-witness that missed the gates in the normalized frame can
            // still pass them in the original scaling (both the residual and
            // the eigenvalue floor scale linearly with the witness), so
            // re-validate `Unknown` candidates here.
            if r.status == SdpStatus::Unknown {
                if res <= tol * (1.0 + bnorm) && eig >= -tol {
                    r.status = SdpStatus::Feasible;
                } else {
                    r.block_values = Vec::new();
                }
            }
        }
        Ok(r)
    } else {
        let mut r = solve_core(problem, tol, 1.0)?;
        if r.status != SdpStatus::Feasible {
            r.block_values = Vec::new();
        }
        Ok(r)
    }
}

/// Least-squares projection of a near-witness onto the affine constraint set:
/// `X ← X + Σ λ_k A_k` with `G λ = r`, `G` the constant Gram matrix of the
/// constraint matrices. The result is then re-verified independently.
struct Polisher {
    gram: Array2<f64>,
    factor: Option<ndarray_linalg::LUFactorized<ndarray::OwnedRepr<f64>>>,
}

impl Polisher {
    fn new(problem: &SdpProblem) -> Self {
        use ndarray_linalg::Factorize;
        let m = problem.constraints.len();
        let mut by_loc: BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (k, c) in problem.constraints.iter().enumerate() {
            for e in &c.entries {
                by_loc.entry((e.block, e.i, e.j)).or_default().push((k, e.value));
            }
        }
        let mut gram = Array2::<f64>::zeros((m, m));
        for ((_, i, j), hits) in by_loc {
            let w = if i == j { 1.0 } else { 2.0 };
            for &(k, vk) in &hits {
                for &(l, vl) in &hits {
                    gram[[k, l]] += w * vk * vl;
                }
            }
        }
        let diag_max = (0..m).map(|i| gram[[i, i]].abs()).fold(1e-300, f64::max);
        let mut reg = gram.clone();
        for i in 0..m {
            reg[[i, i]] += diag_max * 1e-13;
        }
        let factor = reg.factorize().ok();
        Polisher { gram, factor }
    }

    fn solve(&self, r: &[f64]) -> Option<Vec<f64>> {
        use ndarray_linalg::Solve;
        if let Some(f) = &self.factor {
            if let Ok(sol) = f.solve(&Array1::from_vec(r.to_vec())) {
                if sol.iter().all(|v| v.is_finite()) {
                    return Some(sol.to_vec());
                }
            }
        }
        solve_spd(&self.gram, r)
    }

    fn polish(
        &self,
        problem: &SdpProblem,
        w: &[Vec<Vec<f64>>],
    ) -> Option<Vec<Vec<Vec<f64>>>> {
        let r: Vec<f64> = problem
            .constraints
            .iter()
            .map(|c| {
                let mut s = 0.0;
                for e in &c.entries {
                    let v = w[e.block][e.i][e.j];
                    s += if e.i == e.j { e.value * v } else { 2.0 * e.value * v };
                }
                c.b - s
            })
            .collect();
        let lam = self.solve(&r)?;
        let mut out = w.to_vec();
        for (k, c) in problem.constraints.iter().enumerate() {
            for e in &c.entries {
                out[e.block][e.i][e.j] += lam[k] * e.value;
                if e.i != e.j {
                    out[e.block][e.j][e.i] += lam[k] * e.value;
                }
            }
        }
        Some(out)
    }
}

/// `wscale` is the factor by which the caller will rescale the returned
/// witness (1 when the problem is solved in its original scaling). Witness
/// residuals and eigenvalue floors scale linearly with it, so the acceptance
/// checks below are phrased against the caller's original-frame tolerances.
fn solve_core(problem: &SdpProblem, tol: f64, wscale: f64) -> Result<SdpResult, SdpError> {
    let start = Instant::now();
    let m = problem.constraints.len();
    let b: Vec<f64> = problem.constraints.iter().map(|c| c.b).collect();
    let bnorm = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let obnorm = wscale * bnorm;
    let res_tol = tol * (1.0 + obnorm) / wscale;
    let eig_tol = tol / wscale;

    let finish = |status, values: Vec<Vec<Vec<f64>>>, res, eig, iters| SdpResult {
        status,
        block_values: values,
        max_residual: res,
        min_eigenvalue: eig,
        iterations: iters,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    if m == 0 {
        let values: Vec<_> =
            problem.blocks.iter().map(|bk| vec![vec![0.0; bk.size]; bk.size]).collect();
        return Ok(finish(SdpStatus::Feasible, values, 0.0, 0.0, 0));
    }

    let ph = PhaseOne::new(problem);
    let n_total: usize = ph.sizes.iter().sum();
    let scale = 1.0f64.max(bnorm);
    let mut x = BlockMat::identity(&ph.sizes, scale);
    let mut z = BlockMat::identity(&ph.sizes, 1.0);
    let mut y = vec![0.0; m];
    let cobj = ph.objective();

    let witness_of = |x: &BlockMat| -> Vec<Vec<Vec<f64>>> {
        let t = x.0[ph.nb()][[0, 0]] - x.0[ph.nb() + 1][[0, 0]];
        problem
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, bk)| {
                (0..bk.size)
                    .map(|i| {
                        (0..bk.size)
                            .map(|j| {
                                let sym = 0.5 * (x.0[bi][[i, j]] + x.0[bi][[j, i]]);
                                sym + if i == j { t } else { 0.0 }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    };

    let dbg = std::env::var_os("PIE_SDP_DEBUG").is_some();
    let mut polisher: Option<Polisher> = None;
    let mut polish_tries = 0usize;
    // Best near-feasible witness seen so far, by worst-case violation. It is
    // attached to `Unknown` results so the caller can re-validate it against
    // the problem in its original scaling.
    let mut best_near: Option<(Vec<Vec<Vec<f64>>>, f64, f64)> = None;
    let mut best_near_gap = f64::INFINITY;
    let note_near = |best: &mut Option<(Vec<Vec<Vec<f64>>>, f64, f64)>,
                     gap: &mut f64,
                     w: &[Vec<Vec<f64>>],
                     res: f64,
                     eig: f64| {
        let g = (res / res_tol).max((-eig).max(0.0) / eig_tol);
        if g < *gap {
            *gap = g;
            *best = Some((w.to_vec(), res, eig));
        }
    };
    let max_iter = 300;
    // Optional wall-clock budget (seconds); on exhaustion the best
    // near-feasible witness is returned with `Unknown` status.
    let budget: Option<f64> = std::env::var("PIE_SDP_TIMEOUT_S")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| *v > 0.0);
    for iter in 0..max_iter {
        if let Some(bud) = budget {
            if start.elapsed().as_secs_f64() > bud {
                if dbg {
                    eprintln!("sdp exit: wall-clock budget exhausted at iter {iter}");
                }
                let (bw, br, be) = best_near.take().unwrap_or((Vec::new(), f64::INFINITY, 0.0));
                return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
            }
        }
        // Candidate primal witness: accept as soon as it independently
        // checks. This must not require a strictly positive phase-I value:
        // matched-coefficient problems routinely have feasible sets with
        // empty interior (boundary-only witnesses, t* = 0).
        let w = witness_of(&x);
        let (res, eig) = check_witness(problem, &w);
        if res <= res_tol && eig >= -eig_tol {
            return Ok(finish(SdpStatus::Feasible, w, res, eig, iter));
        }
        note_near(&mut best_near, &mut best_near_gap, &w, res, eig);
        // Near-witness: run Douglas–Rachford splitting between the
        // constraint affine set (cached Gram factorization) and the PSD cone
        // to finish off a boundary-feasible point, and re-check.
        if res <= 1e-3 * (1.0 + bnorm) && eig >= -1e-2 && polish_tries < 6 && m <= 6000 {
            polish_tries += 1;
            let pol = polisher.get_or_insert_with(|| Polisher::new(problem));
            if let Some((wp, resp, eigp)) =
                dr_feasibility(problem, pol, &w, res_tol, eig_tol, dbg)
            {
                if resp <= res_tol && eigp >= -eig_tol {
                    if dbg {
                        eprintln!("sdp polish accept iter {iter}: res {resp:.2e} eig {eigp:.2e}");
                    }
                    return Ok(finish(SdpStatus::Feasible, wp, resp, eigp, iter));
                }
                note_near(&mut best_near, &mut best_near_gap, &wp, resp, eigp);
            }
        }

        // Farkas ray check: Σ y_k A_k ⪯ δ on the main blocks with bᵀy > 0
        // certifies infeasibility of the original problem.
        let ynorm = y.iter().fold(0.0f64, |a, v: &f64| a.max(v.abs()));
        if ynorm > 0.0 {
            let by: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
            if by > 1e-3 * ynorm * (1.0 + bnorm) {
                let aty = ph.adjoint(&y);
                let lmax = aty.0[..ph.nb()]
                    .iter()
                    .map(|blk| -min_eig(&blk.mapv(|v| -v)))
                    .fold(f64::NEG_INFINITY, f64::max);
                if dbg {
                    eprintln!(
                        "sdp farkas candidate iter {iter}: by {by:.3e} ynorm {ynorm:.3e} lmax {lmax:.3e}"
                    );
                }
                // Any witness M would satisfy ⟨b,y⟩ ≤ λmax(Σyₖ Aₖ)·tr(M), so
                // this gate rules out all witnesses of trace up to 1e7: a
                // decisively positive ⟨b,y⟩ combined with a near-negative
                // operator is treated as a proof of infeasibility.
                if lmax.is_finite() && lmax <= 1e-7 * by {
                    return Ok(finish(SdpStatus::Infeasible, Vec::new(), f64::INFINITY, 0.0, iter));
                }
            }
        }

        let mu = x.dot(&z) / n_total as f64;
        let ax = ph.apply(&x);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut rd = cobj.clone();
        rd.axpy(-1.0, &ph.adjoint(&y));
        rd.axpy(-1.0, &z);
        let rp_norm = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rd_norm = rd.0.iter().flat_map(|m| m.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
        if dbg {
            eprintln!(
                "sdp iter {iter}: res {res:.2e} eig {eig:.2e} rp {rp_norm:.2e} rd {rd_norm:.2e} mu {mu:.2e}"
            );
        }
        if rp_norm < tol * (1.0 + bnorm) && rd_norm < tol * 10.0 && mu < tol * 10.0 {
            if dbg {
                eprintln!("sdp exit: converged with nonpositive phase-I value");
            }
            // Converged with t* ≤ 0: the phase-I optimum is non-positive, so
            // no strictly feasible point exists; without a Farkas ray we
            // cannot rule out boundary feasibility.
            let (bw, br, be) = best_near.take().unwrap_or((Vec::new(), rp_norm, 0.0));
            return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
        }

        // Nesterov–Todd scaling point W with W Z W = X, per block.
        let mut w_blocks = Vec::with_capacity(ph.sizes.len());
        for (xb, zb) in x.0.iter().zip(&z.0) {
            let xh = sym_fn(xb, |l| if l > 0.0 { l.sqrt() } else { f64::NAN });
            let w = xh.as_ref().and_then(|xh| {
                let s = xh.dot(zb).dot(xh);
                let sih = sym_fn(&s, |l| if l > 0.0 { l.powf(-0.5) } else { f64::NAN })?;
                Some(xh.dot(&sih).dot(xh))
            });
            match w {
                Some(w) => w_blocks.push(w),
                None => {
                    if dbg {
                        eprintln!("sdp exit: NT scaling breakdown at iter {iter}");
                    }
                    let (bw, br, be) =
                        best_near.take().unwrap_or((Vec::new(), rp_norm, 0.0));
                    return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
                }
            }
        }
        let w = BlockMat(w_blocks);

        let sigma: f64 = if rp_norm < tol * (1.0 + bnorm) { 0.2 } else { 0.4 };
        let zinv = {
            let mut blocks = Vec::with_capacity(ph.sizes.len());
            for zb in &z.0 {
                match sym_fn(zb, |l| if l > 0.0 { 1.0 / l } else { f64::NAN }) {
                    Some(b) => blocks.push(b),
                    None => {
                        if dbg { eprintln!("sdp exit: Z inverse breakdown at iter {iter}"); }
                        let (bw, br, be) =
                            best_near.take().unwrap_or((Vec::new(), rp_norm, 0.0));
                        return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
                    }
                }
            }
            BlockMat(blocks)
        };

        // Schur system: A(W Aᵀ(Δy) W) = rp − A(σμ Z⁻¹ − X − W Rd W).
        let wrdw = BlockMat(
            w.0.iter().zip(&rd.0).map(|(wb, rb)| wb.dot(rb).dot(wb)).collect(),
        );
        let mut rhs_mat = BlockMat::zeros(&ph.sizes);
        rhs_mat.axpy(sigma * mu, &zinv);
        rhs_mat.axpy(-1.0, &x);
        rhs_mat.axpy(-1.0, &wrdw);
        let a_rhs = ph.apply_hom(&rhs_mat);
        let rhs: Vec<f64> = rp.iter().zip(&a_rhs).map(|(r, a)| r - a).collect();

        // Dense Schur complement S_kl = ⟨A_k, W A_l W⟩. Exploits constraint
        // sparsity (A_l·W is accumulated row-wise from the entries, then one
        // dense product with W) and the symmetry of S (lower triangle only).
        let nb = ph.nb();
        let mut schur = Array2::<f64>::zeros((m, m));
        let mut alw: Vec<Array2<f64>> =
            ph.sizes[..nb].iter().map(|&s| Array2::zeros((s, s))).collect();
        let mut wal: Vec<Array2<f64>> = alw.clone();
        let wp2 = w.0[nb][[0, 0]].powi(2) + w.0[nb + 1][[0, 0]].powi(2);
        let mut touched = vec![false; nb];
        // Flattened per-constraint coefficient stream (off-diagonal entries
        // pre-doubled) indexing into a symmetrized W·A_l·W buffer, so the inner
        // accumulation is a single gather-multiply pass per constraint pair.
        let mut blk_off = vec![0usize; nb + 1];
        for b in 0..nb {
            blk_off[b + 1] = blk_off[b] + ph.sizes[b] * ph.sizes[b];
        }
        let total_nnz: usize = problem.constraints.iter().map(|c| c.entries.len()).sum();
        let mut idx: Vec<u32> = Vec::with_capacity(total_nnz);
        let mut val: Vec<f64> = Vec::with_capacity(total_nnz);
        let mut row_ptr = vec![0usize; m + 1];
        for (k, c) in problem.constraints.iter().enumerate() {
            for e in &c.entries {
                idx.push((blk_off[e.block] + e.i * ph.sizes[e.block] + e.j) as u32);
                val.push(if e.i == e.j { e.value } else { 2.0 * e.value });
            }
            row_ptr[k + 1] = idx.len();
        }
        let mut flat = vec![0.0f64; blk_off[nb]];
        for l in 0..m {
            let cl = &problem.constraints[l];
            for t in touched.iter_mut() {
                *t = false;
            }
            for e in &cl.entries {
                if !touched[e.block] {
                    alw[e.block].fill(0.0);
                    touched[e.block] = true;
                }
            }
            for e in &cl.entries {
                let wb = &w.0[e.block];
                let axpy_row = |dst: &mut Array2<f64>, di: usize, si: usize, v: f64| {
                    let src = wb.row(si);
                    let mut row = dst.row_mut(di);
                    if let (Some(d), Some(s)) = (row.as_slice_mut(), src.as_slice()) {
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += v * *sv;
                        }
                    } else {
                        for (dv, sv) in row.iter_mut().zip(src.iter()) {
                            *dv += v * *sv;
                        }
                    }
                };
                axpy_row(&mut alw[e.block], e.i, e.j, e.value);
                if e.i != e.j {
                    axpy_row(&mut alw[e.block], e.j, e.i, e.value);
                }
            }
            for b in 0..nb {
                if touched[b] {
                    wal[b] = w.0[b].dot(&alw[b]);
                }
            }
            for b in 0..nb {
                let sz = ph.sizes[b];
                let seg = &mut flat[blk_off[b]..blk_off[b + 1]];
                if !touched[b] {
                    seg.fill(0.0);
                    continue;
                }
                if let Some(ws) = wal[b].as_slice() {
                    for i in 0..sz {
                        for j in 0..sz {
                            seg[i * sz + j] = 0.5 * (ws[i * sz + j] + ws[j * sz + i]);
                        }
                    }
                } else {
                    let wb = &wal[b];
                    for i in 0..sz {
                        for j in 0..sz {
                            seg[i * sz + j] = 0.5 * (wb[[i, j]] + wb[[j, i]]);
                        }
                    }
                }
            }
            let tphase = ph.traces[l] * wp2;
            for k in l..m {
                let mut s = ph.traces[k] * tphase;
                let (lo, hi) = (row_ptr[k], row_ptr[k + 1]);
                for (v, ix) in val[lo..hi].iter().zip(&idx[lo..hi]) {
                    s += v * flat[*ix as usize];
                }
                schur[[k, l]] = s;
                schur[[l, k]] = s;
            }
        }
        let dy = match solve_spd(&schur, &rhs) {
            Some(dy) => dy,
            None => {
                if dbg { eprintln!("sdp exit: Schur solve breakdown at iter {iter}"); }
                let (bw, br, be) = best_near.take().unwrap_or((Vec::new(), rp_norm, 0.0));
                return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
            }
        };

        let mut dz = rd.clone();
        dz.axpy(-1.0, &ph.adjoint(&dy));
        let wdzw = BlockMat(
            w.0.iter().zip(&dz.0).map(|(wb, db)| wb.dot(db).dot(wb)).collect(),
        );
        let mut dx = BlockMat::zeros(&ph.sizes);
        dx.axpy(sigma * mu, &zinv);
        dx.axpy(-1.0, &x);
        dx.axpy(-1.0, &wdzw);

        let (ap, ad) = match (max_step(&x, &dx), max_step(&z, &dz)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                if dbg { eprintln!("sdp exit: step computation breakdown at iter {iter}"); }
                let (bw, br, be) = best_near.take().unwrap_or((Vec::new(), rp_norm, 0.0));
                return Ok(finish(SdpStatus::Unknown, bw, br, be, iter));
            }
        };
        x.axpy(ap, &dx);
        for (k, d) in dy.iter().enumerate() {
            y[k] += ad * d;
        }
        z.axpy(ad, &dz);
    }
    let (bw, br, be) = best_near.take().unwrap_or((Vec::new(), f64::INFINITY, 0.0));
    Ok(finish(SdpStatus::Unknown, bw, br, be, max_iter))
}

impl<'a> PhaseOne<'a> {
    /// Same as [`Self::apply`]; alias used where the argument is a direction
    /// rather than an iterate.
    fn apply_hom(&self, x: &BlockMat) -> Vec<f64> {
        self.apply(x)
    }
}

/// Solve a symmetric positive (semi)definite system, regularizing the
/// diagonal on Cholesky failure to tolerate redundant constraints.
fn wit_comb(a: &[Vec<Vec<f64>>], ca: f64, b: &[Vec<Vec<f64>>], cb: f64) -> Vec<Vec<Vec<f64>>> {
    a.iter()
        .zip(b)
        .map(|(ma, mb)| {
            ma.iter()
                .zip(mb)
                .map(|(ra, rb)| {
                    ra.iter().zip(rb).map(|(x, y)| ca * x + cb * y).collect()
                })
                .collect()
        })
        .collect()
}

/// Douglas–Rachford feasibility refinement between the affine constraint set
/// and the PSD cone, starting from a near-feasible witness. Returns the best
/// iterate encountered (by worst-case violation relative to the tolerances),
/// stopping early once one passes the independent residual/eigenvalue check.
fn dr_feasibility(
    problem: &SdpProblem,
    pol: &Polisher,
    w0: &[Vec<Vec<f64>>],
    res_tol: f64,
    eig_tol: f64,
    dbg: bool,
) -> Option<(Vec<Vec<Vec<f64>>>, f64, f64)> {
    let gap_of = |res: f64, eig: f64| {
        (res / res_tol.max(1e-300)).max((-eig).max(0.0) / eig_tol.max(1e-300))
    };
    let mut z = w0.to_vec();
    let mut best: Option<(Vec<Vec<Vec<f64>>>, f64, f64)> = None;
    let mut best_gap = f64::INFINITY;
    let mut since_best = 0usize;
    for cycle in 0..20000 {
        let Some(xa) = pol.polish(problem, &z) else {
            if dbg {
                eprintln!("sdp polish: affine projection failed at cycle {cycle}");
            }
            return best;
        };
        let (resa, eiga) = check_witness(problem, &xa);
        if resa <= res_tol && eiga >= -eig_tol {
            return Some((xa, resa, eiga));
        }
        let reflected = wit_comb(&xa, 2.0, &z, -1.0);
        let xc = clip_psd(&reflected);
        let (resc, eigc) = check_witness(problem, &xc);
        if resc <= res_tol && eigc >= -eig_tol {
            return Some((xc, resc, eigc));
        }
        // Over-relaxed update z ← z + ρ(P_C(2 P_A z − z) − P_A z).
        let rho = 1.7;
        z = wit_comb(&wit_comb(&z, 1.0, &xc, rho), 1.0, &xa, -rho);
        let (gap_a, gap_c) = (gap_of(resa, eiga), gap_of(resc, eigc));
        let gap = gap_a.min(gap_c);
        if gap < best_gap {
            best = Some(if gap_a <= gap_c { (xa, resa, eiga) } else { (xc, resc, eigc) });
        }
        if gap < 0.995 * best_gap {
            best_gap = best_gap.min(gap);
            since_best = 0;
        } else {
            best_gap = best_gap.min(gap);
            since_best += 1;
            if since_best > 200 {
                if dbg {
                    eprintln!(
                        "sdp polish stall at cycle {cycle}: res {resa:.2e}/{resc:.2e} eig {eiga:.2e}/{eigc:.2e}"
                    );
                }
                return best;
            }
        }
    }
    if dbg {
        eprintln!("sdp polish exhausted budget (best gap {best_gap:.2e})");
    }
    best
}

/// Project each block onto the PSD cone by clipping negative eigenvalues.
fn clip_psd(w: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    w.iter()
        .map(|m| {
            let n = m.len();
            if n == 0 {
                return Vec::new();
            }
            let a = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[i][j] + m[j][i]));
            match a.eigh(UPLO::Lower) {
                Ok((ev, v)) => {
                    let clipped: Array1<f64> = ev.iter().map(|&l| l.max(0.0)).collect();
                    let b = (&v * &clipped).dot(&v.t());
                    (0..n).map(|i| (0..n).map(|j| b[[i, j]]).collect()).collect()
                }
                Err(_) => m.clone(),
            }
        })
        .collect()
}

fn solve_spd(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    use ndarray_linalg::Solve;
    let n = a.nrows();
    let diag_max = (0..n).map(|i| a[[i, i]].abs()).fold(1e-300, f64::max);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut reg = a.clone();
        for i in 0..n {
            reg[[i, i]] += ridge;
        }
        if let Ok(sol) = reg.solve(&Array1::from_vec(b.to_vec())) {
            if sol.iter().all(|v| v.is_finite()) {
                return Some(sol.to_vec());
            }
        }
        ridge = if ridge == 0.0 { diag_max * 1e-12 } else { ridge * 100.0 };
    }
    None
}

// ---------------------------------------------------------------------------
// SDPA sparse interchange
// ---------------------------------------------------------------------------

/// Write the problem in SDPA sparse ".dat-s" form: `mDIM`, `nBLOCK`, block
/// sizes (negative for diagonal blocks), the `b` vector, then entries
/// `k blk i j v` with 1-based upper-triangle indices (`k = 0` would be the
/// objective, which is identically zero here and therefore omitted).
pub fn export_sdpa(problem: &SdpProblem, path: &Path) -> Result<(), SdpError> {
    problem.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "{}", problem.constraints.len());
    let _ = writeln!(out, "{}", problem.blocks.len());
    let sizes: Vec<String> = problem
        .blocks
        .iter()
        .map(|b| if b.diag { format!("-{}", b.size) } else { format!("{}", b.size) })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let bvec: Vec<String> = problem.constraints.iter().map(|c| format!("{}", c.b)).collect();
    let _ = writeln!(out, "{}", bvec.join(" "));
    for (k, c) in problem.constraints.iter().enumerate() {
        for e in &c.entries {
            let _ = writeln!(out, "{} {} {} {} {}", k + 1, e.block + 1, e.i + 1, e.j + 1, e.value);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read an SDPA sparse ".dat-s" file produced by [`export_sdpa`] (or any
/// feasibility problem with zero objective). Constraint labels are not part
/// of the format and come back empty.
pub fn import_sdpa(path: &Path) -> Result<SdpProblem, SdpError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| SdpError::Parse { line: 0, msg: format!("missing {what}") })
    };
    let (ln, mline) = next("constraint count")?;
    let m: usize = mline
        .parse()
        .map_err(|_| SdpError::Parse { line: ln, msg: "bad constraint count".into() })?;
    let (ln, _nline) = {
        let (ln, nline) = next("block count")?;
        let _: usize = nline
            .parse()
            .map_err(|_| SdpError::Parse { line: ln, msg: "bad block count".into() })?;
        (ln, nline)
    };
    let _ = ln;
    let (ln, sline) = next("block sizes")?;
    let mut blocks = Vec::new();
    for (bi, tok) in sline.split_whitespace().enumerate() {
        let v: i64 = tok
            .parse()
            .map_err(|_| SdpError::Parse { line: ln, msg: format!("bad block size {tok}") })?;
        blocks.push(SdpBlock {
            name: format!("block{}", bi + 1),
            size: v.unsigned_abs() as usize,
            diag: v < 0,
        });
    }
    // An empty b line (m = 0) is indistinguishable from no line at all once
    // blank lines are filtered, so only read it when constraints exist.
    let (ln, bline) = if m > 0 { next("b vector")? } else { (0, "") };
    let b: Vec<f64> = bline
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| SdpError::Parse { line: ln, msg: format!("bad rhs {t}") }))
        .collect::<Result<_, _>>()?;
    if b.len() != m {
        return Err(SdpError::Parse { line: ln, msg: format!("{} rhs values for {m} constraints", b.len()) });
    }
    let mut constraints: Vec<SdpConstraint> =
        b.iter().map(|&b| SdpConstraint { entries: Vec::new(), b, label: String::new() }).collect();
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpError::Parse { line: ln, msg: "expected 'k blk i j v'".into() });
        }
        let parse_idx = |t: &str| -> Result<usize, SdpError> {
            t.parse().map_err(|_| SdpError::Parse { line: ln, msg: format!("bad index {t}") })
        };
        let k = parse_idx(toks[0])?;
        let blk = parse_idx(toks[1])?;
        let i = parse_idx(toks[2])?;
        let j = parse_idx(toks[3])?;
        let v: f64 = toks[4]
            .parse()
            .map_err(|_| SdpError::Parse { line: ln, msg: format!("bad value {}", toks[4]) })?;
        if k == 0 {
            if v != 0.0 {
                return Err(SdpError::Parse {
                    line: ln,
                    msg: "nonzero objective entry in feasibility problem".into(),
                });
            }
            continue;
        }
        if k > m || blk == 0 || blk > blocks.len() {
            return Err(SdpError::Parse { line: ln, msg: "index out of range".into() });
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if i == 0 || j > blocks[blk - 1].size {
            return Err(SdpError::Parse { line: ln, msg: "matrix index out of range".into() });
        }
        constraints[k - 1].entries.push(SdpEntry { block: blk - 1, i: i - 1, j: j - 1, value: v });
    }
    let problem = SdpProblem { blocks, constraints };
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn entry(block: usize, i: usize, j: usize, value: f64) -> SdpEntry {
        SdpEntry { block, i, j, value }
    }

    #[test]
    fn scalar_equality_feasible() {
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 1)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], 1.0, "m=1");
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        assert!((r.block_values[0][0][0] - 1.0).abs() < 1e-6);
        assert!(r.max_residual < 1e-7);
    }

    #[test]
    fn scalar_equality_infeasible() {
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 1)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], -1.0, "m=-1");
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Infeasible);
    }

    #[test]
    fn no_constraints_is_trivially_feasible() {
        let p = SdpProblem::new(vec![SdpBlock::dense("m", 3)]);
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        assert_eq!(r.max_residual, 0.0);
    }

    /// Build a random instance from a known strictly positive witness; the
    /// solver must recover feasibility with small replayed residual.
    #[test]
    fn witness_constructed_instance_is_feasible() {
        let mut rng = StdRng::seed_from_u64(7);
        let sizes = [3usize, 2];
        let mut p = SdpProblem::new(vec![SdpBlock::dense("a", 3), SdpBlock::dense("b", 2)]);
        // Witness M⋆ = Gᵀ G + 0.5 I per block.
        let mut witness = Vec::new();
        for &n in &sizes {
            let g: Vec<Vec<f64>> =
                (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        m[i][j] += g[k][i] * g[k][j];
                    }
                }
                m[i][i] += 0.5;
            }
            witness.push(m);
        }
        for k in 0..6 {
            let mut entries = Vec::new();
            let mut b = 0.0;
            for (bi, &n) in sizes.iter().enumerate() {
                for i in 0..n {
                    for j in i..n {
                        if rng.gen_bool(0.5) {
                            let v: f64 = rng.gen_range(-2.0..2.0);
                            entries.push(entry(bi, i, j, v));
                            b += if i == j {
                                v * witness[bi][i][j]
                            } else {
                                2.0 * v * witness[bi][i][j]
                            };
                        }
                    }
                }
            }
            p.add_constraint(entries, b, format!("row{k}"));
        }
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        assert!(r.max_residual < 1e-7, "residual {}", r.max_residual);
        assert!(r.min_eigenvalue >= -1e-8);
        let (res, eig) = check_witness(&p, &r.block_values);
        assert!(res < 1e-7 && eig >= -1e-8);
    }

    #[test]
    fn trace_forced_negative_is_infeasible() {
        // 2×2 PSD block with both diagonal entries pinned negative.
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 2)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], -0.5, "m00");
        p.add_constraint(vec![entry(0, 1, 1, 1.0)], -2.0, "m11");
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Infeasible);
    }

    #[test]
    fn redundant_constraints_are_tolerated() {
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 2)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0)], 2.0, "d0");
        p.add_constraint(vec![entry(0, 0, 0, 2.0)], 4.0, "d0 doubled");
        p.add_constraint(vec![entry(0, 0, 1, 1.0)], 0.5, "offdiag");
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SdpStatus::Feasible);
        assert!(r.max_residual < 1e-7);
    }

    #[test]
    fn determinism_for_fixed_input() {
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 2)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0), entry(0, 1, 1, 1.0)], 3.0, "trace");
        p.add_constraint(vec![entry(0, 0, 1, 1.0)], 0.7, "off");
        let r1 = solve(&p, 1e-8).unwrap();
        let r2 = solve(&p, 1e-8).unwrap();
        assert_eq!(r1.status, r2.status);
        assert_eq!(r1.block_values, r2.block_values);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn sdpa_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.dat-s");
        let mut p = SdpProblem::new(vec![
            SdpBlock::dense("m1", 2),
            SdpBlock { name: "d".into(), size: 3, diag: true },
        ]);
        p.add_constraint(
            vec![entry(0, 0, 1, 0.125), entry(1, 2, 2, -7.25e-3)],
            1.5,
            "r1",
        );
        p.add_constraint(vec![entry(0, 1, 1, -3.0)], -0.1, "r2");
        export_sdpa(&p, &path).unwrap();
        let q = import_sdpa(&path).unwrap();
        assert_eq!(q.constraints.len(), p.constraints.len());
        assert_eq!(q.blocks.len(), p.blocks.len());
        for (bp, bq) in p.blocks.iter().zip(&q.blocks) {
            assert_eq!(bp.size, bq.size);
            assert_eq!(bp.diag, bq.diag);
        }
        for (cp, cq) in p.constraints.iter().zip(&q.constraints) {
            assert_eq!(cp.b, cq.b);
            assert_eq!(cp.entries, cq.entries);
        }
    }

    #[test]
    fn sdpa_header_only_for_empty_constraints() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.dat-s");
        let p = SdpProblem::new(vec![SdpBlock::dense("m", 2)]);
        export_sdpa(&p, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        let q = import_sdpa(&path).unwrap();
        assert!(q.constraints.is_empty());
        assert_eq!(q.blocks[0].size, 2);
    }

    #[test]
    fn sdpa_parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dat-s");
        std::fs::write(&path, "1\n1\n2\n1.0\n1 1 1 oops 3.0\n").unwrap();
        match import_sdpa(&path) {
            Err(SdpError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn export_import_solve_matches_direct_solve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.dat-s");
        let mut p = SdpProblem::new(vec![SdpBlock::dense("m", 2)]);
        p.add_constraint(vec![entry(0, 0, 0, 1.0), entry(0, 1, 1, 1.0)], 2.0, "tr");
        p.add_constraint(vec![entry(0, 0, 1, 1.0)], 0.3, "off");
        let direct = solve(&p, 1e-8).unwrap();
        export_sdpa(&p, &path).unwrap();
        let reimported = import_sdpa(&path).unwrap();
        let via_file = solve(&reimported, 1e-8).unwrap();
        assert_eq!(direct.status, via_file.status);
        for (a, b) in direct.block_values.iter().zip(&via_file.block_values) {
            for (ra, rb) in a.iter().zip(b) {
                for (va, vb) in ra.iter().zip(rb) {
                    assert!((va - vb).abs() < 1e-9);
                }
            }
        }
    }
}
