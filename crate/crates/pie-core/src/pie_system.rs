//! The PIE system record and feedback interconnection.
//!
//! A PIE with inputs and outputs is the twelve-operator tuple
//!
//! ```text
//!   T v_t + T_w w_t + T_r r_t = A v + B_w w + B_r r
//!   z = C_z v + D_zw w + D_zr r
//!   q = C_q v + D_qw w + D_qr r
//! ```
//!
//! over a mixed state space, with exogenous input `w`, feedback input `r`,
//! regulated output `z` and feedback output `q`. Channel roles are explicit
//! labels — interconnection wires `q` of one system into `r` of the other by
//! declared label, never by dimension inference.

use crate::pi_algebra::{PiError, PiOperator, ZSpace};
use crate::polykernel::Domain;
use serde::{Deserialize, Serialize};

/// The twelve-operator PIE record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieSystem {
    /// State space of `v`.
    pub vs: ZSpace,
    /// Exogenous input space of `w`.
    pub ws: ZSpace,
    /// Feedback input space of `r`.
    pub rs: ZSpace,
    /// Regulated output space of `z`.
    pub zs: ZSpace,
    /// Feedback output space of `q`.
    pub qs: ZSpace,
    pub t: PiOperator,
    pub t_w: PiOperator,
    pub t_r: PiOperator,
    pub a: PiOperator,
    pub b_w: PiOperator,
    pub b_r: PiOperator,
    pub c_z: PiOperator,
    pub d_zw: PiOperator,
    pub d_zr: PiOperator,
    pub c_q: PiOperator,
    pub d_qw: PiOperator,
    pub d_qr: PiOperator,
}

/// Validation report produced by [`PieSystem::validate`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PieReport {
    pub defects: Vec<String>,
    /// Component sizes `(n0, ns, nx, nsx)` per channel, in order v, w, r, z, q.
    pub channel_dims: Vec<[usize; 4]>,
    pub zero_channels: Vec<String>,
}

impl PieSystem {
    /// Empty space over a domain, used for absent channels.
    fn empty(domain: Domain) -> ZSpace {
        ZSpace::new(0, 0, 0, 0, domain)
    }

    /// Autonomous PIE `T v_t = A v` with no input/output channels.
    pub fn autonomous(t: PiOperator, a: PiOperator) -> Self {
        let vs = t.dom;
        let e = Self::empty(vs.domain);
        PieSystem {
            vs,
            ws: e,
            rs: e,
            zs: e,
            qs: e,
            t,
            a,
            t_w: PiOperator::zero(&e, &vs),
            t_r: PiOperator::zero(&e, &vs),
            b_w: PiOperator::zero(&e, &vs),
            b_r: PiOperator::zero(&e, &vs),
            c_z: PiOperator::zero(&vs, &e),
            d_zw: PiOperator::zero(&e, &e),
            d_zr: PiOperator::zero(&e, &e),
            c_q: PiOperator::zero(&vs, &e),
            d_qw: PiOperator::zero(&e, &e),
            d_qr: PiOperator::zero(&e, &e),
        }
    }

    /// A zero system with the given channel spaces (all operators zero).
    pub fn zero(vs: ZSpace, ws: ZSpace, rs: ZSpace, zs: ZSpace, qs: ZSpace) -> Self {
        PieSystem {
            vs,
            ws,
            rs,
            zs,
            qs,
            t: PiOperator::zero(&vs, &vs),
            t_w: PiOperator::zero(&ws, &vs),
            t_r: PiOperator::zero(&rs, &vs),
            a: PiOperator::zero(&vs, &vs),
            b_w: PiOperator::zero(&ws, &vs),
            b_r: PiOperator::zero(&rs, &vs),
            c_z: PiOperator::zero(&vs, &zs),
            d_zw: PiOperator::zero(&ws, &zs),
            d_zr: PiOperator::zero(&rs, &zs),
            c_q: PiOperator::zero(&vs, &qs),
            d_qw: PiOperator::zero(&ws, &qs),
            d_qr: PiOperator::zero(&rs, &qs),
        }
    }

    /// True when the system has no input/output channels at all.
    pub fn is_autonomous(&self) -> bool {
        self.ws.is_empty() && self.rs.is_empty() && self.zs.is_empty() && self.qs.is_empty()
    }

    /// Space-consistency report: shape defects, channel dimensions, zero channels.
    pub fn validate(&self) -> PieReport {
        let mut rep = PieReport::default();
        let rows: [(&str, &PiOperator, &ZSpace, &ZSpace); 12] = [
            ("T", &self.t, &self.vs, &self.vs),
            ("T_w", &self.t_w, &self.ws, &self.vs),
            ("T_r", &self.t_r, &self.rs, &self.vs),
            ("A", &self.a, &self.vs, &self.vs),
            ("B_w", &self.b_w, &self.ws, &self.vs),
            ("B_r", &self.b_r, &self.rs, &self.vs),
            ("C_z", &self.c_z, &self.vs, &self.zs),
            ("D_zw", &self.d_zw, &self.ws, &self.zs),
            ("D_zr", &self.d_zr, &self.rs, &self.zs),
            ("C_q", &self.c_q, &self.vs, &self.qs),
            ("D_qw", &self.d_qw, &self.ws, &self.qs),
            ("D_qr", &self.d_qr, &self.rs, &self.qs),
        ];
        for (name, op, dom, cod) in rows {
            if !op.dom.compatible(dom) {
                rep.defects.push(format!("{name}: domain {:?} != {:?}", op.dom.dims(), dom.dims()));
            }
            if !op.cod.compatible(cod) {
                rep.defects
                    .push(format!("{name}: codomain {:?} != {:?}", op.cod.dims(), cod.dims()));
            }
        }
        for (label, sp) in
            [("v", &self.vs), ("w", &self.ws), ("r", &self.rs), ("z", &self.zs), ("q", &self.qs)]
        {
            rep.channel_dims.push(sp.dims());
            if sp.is_empty() {
                rep.zero_channels.push(label.to_string());
            }
        }
        rep
    }
}

/// Stack operators block-wise over product spaces.
///
/// `grid[i][j]` maps the `j`-th domain summand into the `i`-th codomain
/// summand; `None` is the zero operator. Kernel parts are embedded at the
/// component offsets induced by the space stacking.
pub fn stack_ops(
    grid: &[Vec<Option<&PiOperator>>],
    cod_spaces: &[ZSpace],
    dom_spaces: &[ZSpace],
) -> Result<PiOperator, PiError> {
    let cod = cod_spaces
        .iter()
        .skip(1)
        .fold(cod_spaces[0], |acc, s| acc.stack(s));
    let dom = dom_spaces
        .iter()
        .skip(1)
        .fold(dom_spaces[0], |acc, s| acc.stack(s));
    // Component offsets of each summand within the product space.
    let offsets = |spaces: &[ZSpace]| -> Vec<[usize; 4]> {
        let mut acc = [0usize; 4];
        let mut out = Vec::with_capacity(spaces.len());
        for sp in spaces {
            out.push(acc);
            for c in 0..4 {
                acc[c] += sp.comp_dim(c);
            }
        }
        out
    };
    let cod_off = offsets(cod_spaces);
    let dom_off = offsets(dom_spaces);
    let mut out = PiOperator::zero(&dom, &cod);
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let Some(op) = cell else { continue };
            if !op.cod.compatible(&cod_spaces[i]) || !op.dom.compatible(&dom_spaces[j]) {
                return Err(PiError::SpaceMismatch(format!(
                    "stack_ops cell ({i},{j}): operator spaces do not match summand spaces"
                )));
            }
            for ci in 0..4 {
                for cj in 0..4 {
                    let blk = op.block(ci, cj);
                    if blk.is_zero() {
                        continue;
                    }
                    for (idx, part) in blk.parts.iter().enumerate() {
                        if part.is_zero() {
                            continue;
                        }
                        let out_blk = &mut out.blocks[ci * 4 + cj];
                        out_blk.parts[idx].add_at(cod_off[i][ci], dom_off[j][cj], part)?;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Feedback interconnection: wires `q` of `g1` into `r` of `g2` and `q` of
/// `g2` into `r` of `g1`, per the closed-loop operator formulas.
///
/// Exactly one side must have zero feedthrough from its `r` input to its `q`
/// output, otherwise the loop is algebraic. The closed loop stacks states
/// `[v1; v2]`, exogenous inputs `[w1; w2]` and regulated outputs `[z1; z2]`;
/// the feedback channels are consumed.
pub fn pie_interconnect(g1: &PieSystem, g2: &PieSystem) -> Result<PieSystem, PiError> {
    if !g1.qs.compatible(&g2.rs) || !g2.qs.compatible(&g1.rs) {
        return Err(PiError::SpaceMismatch(
            "interconnect: feedback channel spaces do not match".into(),
        ));
    }
    let g1_loopfree = g1.d_qr.is_zero();
    let g2_loopfree = g2.d_qr.is_zero();
    if !g1_loopfree && !g2_loopfree {
        return Err(PiError::SpaceMismatch(
            "AlgebraicLoop: both feedback feedthroughs are nonzero".into(),
        ));
    }

    let vs = [g1.vs, g2.vs];
    let ws = [g1.ws, g2.ws];
    let zs = [g1.zs, g2.zs];

    // Closed-loop expressions for the feedback signals in terms of (v, w):
    //   with g1 loop-free:  q1 = C_q1 v1 + D_qw1 w1
    //                       r1 = C_q2 v2 + D_qw2 w2 + D_qr2 q1
    //   with g2 loop-free:  q2 = C_q2 v2 + D_qw2 w2
    //                       q1 = C_q1 v1 + D_qw1 w1 + D_qr1 q2
    // r2 = q1 and r1 = q2 always.
    //
    // Represent r1 and r2 as operator rows [on v1, v2, w1, w2].
    let row = |c1: &PiOperator,
               c2: &PiOperator,
               d1: &PiOperator,
               d2: &PiOperator|
     -> [PiOperator; 4] { [c1.clone(), c2.clone(), d1.clone(), d2.clone()] };

    let (r1_row, r2_row) = if g1_loopfree {
        let q1 = row(
            &g1.c_q,
            &PiOperator::zero(&g2.vs, &g1.qs),
            &g1.d_qw,
            &PiOperator::zero(&g2.ws, &g1.qs),
        );
        let mut r1 = row(
            &PiOperator::zero(&g1.vs, &g2.qs),
            &g2.c_q,
            &PiOperator::zero(&g1.ws, &g2.qs),
            &g2.d_qw,
        );
        for k in 0..4 {
            r1[k] = r1[k].add(&g2.d_qr.compose(&q1[k])?)?;
        }
        (r1, q1)
    } else {
        let q2 = row(
            &PiOperator::zero(&g1.vs, &g2.qs),
            &g2.c_q,
            &PiOperator::zero(&g1.ws, &g2.qs),
            &g2.d_qw,
        );
        let mut q1 = row(
            &g1.c_q,
            &PiOperator::zero(&g2.vs, &g1.qs),
            &g1.d_qw,
            &PiOperator::zero(&g2.ws, &g1.qs),
        );
        for k in 0..4 {
            q1[k] = q1[k].add(&g1.d_qr.compose(&q2[k])?)?;
        }
        (q2, q1)
    };

    // Row assembly helper: base row [on v1,v2,w1,w2] plus R-coupling ∘ r-row.
    let couple = |base: [PiOperator; 4],
                  coup1: &PiOperator,
                  coup2: &PiOperator|
     -> Result<[PiOperator; 4], PiError> {
        let mut out = base;
        for k in 0..4 {
            out[k] = out[k].add(&coup1.compose(&r1_row[k])?)?;
            out[k] = out[k].add(&coup2.compose(&r2_row[k])?)?;
        }
        Ok(out)
    };

    let z_v1 = |op: &PiOperator| PiOperator::zero(&g2.vs, &op.cod);
    let z_w2 = |op: &PiOperator| PiOperator::zero(&g2.ws, &op.cod);
    let z_v2 = |op: &PiOperator| PiOperator::zero(&g1.vs, &op.cod);
    let z_w1 = |op: &PiOperator| PiOperator::zero(&g1.ws, &op.cod);

    // T rows.
    let t1 = couple(
        [g1.t.clone(), z_v1(&g1.t), g1.t_w.clone(), z_w2(&g1.t)],
        &g1.t_r,
        &PiOperator::zero(&g2.rs, &g1.vs),
    )?;
    let t2 = couple(
        [z_v2(&g2.t), g2.t.clone(), z_w1(&g2.t), g2.t_w.clone()],
        &PiOperator::zero(&g1.rs, &g2.vs),
        &g2.t_r,
    )?;
    // A rows.
    let a1 = couple(
        [g1.a.clone(), z_v1(&g1.a), g1.b_w.clone(), z_w2(&g1.a)],
        &g1.b_r,
        &PiOperator::zero(&g2.rs, &g1.vs),
    )?;
    let a2 = couple(
        [z_v2(&g2.a), g2.a.clone(), z_w1(&g2.a), g2.b_w.clone()],
        &PiOperator::zero(&g1.rs, &g2.vs),
        &g2.b_r,
    )?;
    // z rows.
    let zr1 = couple(
        [g1.c_z.clone(), z_v1(&g1.c_z), g1.d_zw.clone(), z_w2(&g1.c_z)],
        &g1.d_zr,
        &PiOperator::zero(&g2.rs, &g1.zs),
    )?;
    let zr2 = couple(
        [z_v2(&g2.c_z), g2.c_z.clone(), z_w1(&g2.c_z), g2.d_zw.clone()],
        &PiOperator::zero(&g1.rs, &g2.zs),
        &g2.d_zr,
    )?;

    let vsl = &vs[..];
    let wsl = &ws[..];
    let zsl = &zs[..];
    let t = stack_ops(
        &[vec![Some(&t1[0]), Some(&t1[1])], vec![Some(&t2[0]), Some(&t2[1])]],
        vsl,
        vsl,
    )?;
    let t_w = stack_ops(
        &[vec![Some(&t1[2]), Some(&t1[3])], vec![Some(&t2[2]), Some(&t2[3])]],
        vsl,
        wsl,
    )?;
    let a = stack_ops(
        &[vec![Some(&a1[0]), Some(&a1[1])], vec![Some(&a2[0]), Some(&a2[1])]],
        vsl,
        vsl,
    )?;
    let b_w = stack_ops(
        &[vec![Some(&a1[2]), Some(&a1[3])], vec![Some(&a2[2]), Some(&a2[3])]],
        vsl,
        wsl,
    )?;
    let c_z = stack_ops(
        &[vec![Some(&zr1[0]), Some(&zr1[1])], vec![Some(&zr2[0]), Some(&zr2[1])]],
        zsl,
        vsl,
    )?;
    let d_zw = stack_ops(
        &[vec![Some(&zr1[2]), Some(&zr1[3])], vec![Some(&zr2[2]), Some(&zr2[3])]],
        zsl,
        wsl,
    )?;

    let vstack = g1.vs.stack(&g2.vs);
    let wstack = g1.ws.stack(&g2.ws);
    let zstack = g1.zs.stack(&g2.zs);
    let e = ZSpace::new(0, 0, 0, 0, g1.vs.domain);
    let mut out = PieSystem::zero(vstack, wstack, e, zstack, e);
    out.t = t;
    out.t_w = t_w;
    out.a = a;
    out.b_w = b_w;
    out.c_z = c_z;
    out.d_zw = d_zw;
    Ok(out)
}

/// Time trace of a PIE solution produced by the simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieSolutionTrace {
    /// Strictly increasing sample times.
    pub times: Vec<f64>,
    /// Norm of the fundamental state `v(t)` per sample.
    pub v_norms: Vec<f64>,
    /// Norm of the reconstructed primary state `T v(t)` per sample.
    pub state_norms: Vec<f64>,
    /// Which integrator produced the trace.
    pub provenance: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polykernel::{Poly, PolyMatrix, Var};

    fn dom01() -> Domain {
        Domain::new(0.0, 1.0)
    }

    /// Scalar finite-dimensional PIE with given (t, a) entries and 1-dim q/r.
    fn scalar_sys(tval: f64, aval: f64, cq: f64, br: f64, dqr: f64) -> PieSystem {
        let d = dom01();
        let vs = ZSpace::finite(1, d);
        let ch = ZSpace::finite(1, d);
        let e = ZSpace::new(0, 0, 0, 0, d);
        let mut g = PieSystem::zero(vs, e, ch, e, ch);
        let m = |v: f64| PolyMatrix::from_const(&[vec![v]], d);
        g.t.set_part(0, 0, 0, 0, m(tval)).unwrap();
        g.a.set_part(0, 0, 0, 0, m(aval)).unwrap();
        g.c_q.set_part(0, 0, 0, 0, m(cq)).unwrap();
        g.b_r.set_part(0, 0, 0, 0, m(br)).unwrap();
        if dqr != 0.0 {
            g.d_qr.set_part(0, 0, 0, 0, m(dqr)).unwrap();
        }
        g
    }

    #[test]
    fn zero_coupling_is_block_diagonal() {
        let g1 = scalar_sys(1.0, -1.0, 0.0, 0.0, 0.0);
        let g2 = scalar_sys(1.0, -2.0, 0.0, 0.0, 0.0);
        let cl = pie_interconnect(&g1, &g2).unwrap();
        let a = &cl.a.block(0, 0).parts[0];
        assert!((a.get(0, 0).eval(&[0.0; 6]) - -1.0).abs() < 1e-14);
        assert!((a.get(1, 1).eval(&[0.0; 6]) - -2.0).abs() < 1e-14);
        assert!(a.get(0, 1).is_zero() && a.get(1, 0).is_zero());
    }

    #[test]
    fn algebraic_loop_detected() {
        let g1 = scalar_sys(1.0, -1.0, 1.0, 1.0, 0.5);
        let g2 = scalar_sys(1.0, -2.0, 1.0, 1.0, 0.5);
        assert!(pie_interconnect(&g1, &g2).is_err());
    }

    #[test]
    fn scalar_feedback_matches_hand_computation() {
        // g1: v̇1 = -v1 + r1, q1 = v1 ; g2: v̇2 = -2 v2 + r2, q2 = 3 v2 + 0.5 r2.
        // Closed loop: r2 = q1 = v1, r1 = q2 = 3 v2 + 0.5 v1.
        // A = [[-1 + 0.5, 3], [1, -2]].
        let g1 = scalar_sys(1.0, -1.0, 1.0, 1.0, 0.0);
        let g2 = scalar_sys(1.0, -2.0, 3.0, 1.0, 0.5);
        let cl = pie_interconnect(&g1, &g2).unwrap();
        let a = &cl.a.block(0, 0).parts[0];
        let at = |i, j| a.get(i, j).eval(&[0.0; 6]);
        assert!((at(0, 0) - -0.5).abs() < 1e-14);
        assert!((at(0, 1) - 3.0).abs() < 1e-14);
        assert!((at(1, 0) - 1.0).abs() < 1e-14);
        assert!((at(1, 1) - -2.0).abs() < 1e-14);
        // Same loop with roles flipped must agree after permuting states.
        let cl2 = pie_interconnect(&g2, &g1).unwrap();
        let a2 = &cl2.a.block(0, 0).parts[0];
        let at2 = |i: usize, j: usize| a2.get(i, j).eval(&[0.0; 6]);
        assert!((at2(1, 1) - at(0, 0)).abs() < 1e-14);
        assert!((at2(0, 0) - at(1, 1)).abs() < 1e-14);
        assert!((at2(0, 1) - at(1, 0)).abs() < 1e-14);
        assert!((at2(1, 0) - at(0, 1)).abs() < 1e-14);
    }

    #[test]
    fn validate_reports_dims_and_defects() {
        let g = scalar_sys(1.0, -1.0, 0.0, 0.0, 0.0);
        let rep = g.validate();
        assert!(rep.defects.is_empty());
        assert_eq!(rep.channel_dims[0], [1, 0, 0, 0]);
        let mut bad = g.clone();
        bad.a = PiOperator::zero(&ZSpace::finite(2, dom01()), &ZSpace::finite(1, dom01()));
        assert!(!bad.validate().defects.is_empty());
    }

    #[test]
    fn infinite_dimensional_feedback_round_trip() {
        // g1 state in L2[x] with q tapping ∫ v; g2 finite integrator feeding back.
        let d = dom01();
        let vs1 = ZSpace::new(0, 0, 1, 0, d);
        let fin = ZSpace::finite(1, d);
        let e = ZSpace::new(0, 0, 0, 0, d);
        let mut g1 = PieSystem::zero(vs1, e, fin, e, fin);
        g1.t.set_part(2, 2, 0, 0, PolyMatrix::identity(1, d)).unwrap();
        g1.a.set_part(2, 2, 0, 0, PolyMatrix::from_poly(Poly::constant(-1.0), d)).unwrap();
        // q1 = ∫_0^1 v dx ; r1 enters as B_r = embedding of x.
        g1.c_q.set_part(0, 2, 0, 0, PolyMatrix::from_poly(Poly::constant(1.0), d)).unwrap();
        g1.b_r.set_part(2, 0, 0, 0, PolyMatrix::from_poly(Poly::var(Var::X), d)).unwrap();
        let mut g2 = PieSystem::zero(fin, e, fin, e, fin);
        g2.t.set_part(0, 0, 0, 0, PolyMatrix::identity(1, d)).unwrap();
        g2.a.set_part(0, 0, 0, 0, PolyMatrix::from_const(&[vec![-3.0]], d)).unwrap();
        g2.c_q.set_part(0, 0, 0, 0, PolyMatrix::identity(1, d)).unwrap();
        g2.b_r.set_part(0, 0, 0, 0, PolyMatrix::identity(1, d)).unwrap();
        let cl = pie_interconnect(&g1, &g2).unwrap();
        assert!(cl.validate().defects.is_empty());
        assert_eq!(cl.vs.dims(), [1, 0, 1, 0]);
        // A block L2[x] <- R coupling: B_r1 ∘ C_q2 = x ↦ x·(1)·v2.
        let emb = cl.a.block(2, 0).part(0, 0);
        assert!(emb.get(0, 0).max_coeff_diff(&Poly::var(Var::X)) < 1e-14);
        // A block R <- L2[x] coupling: B_r2 ∘ C_q1 = ∫ v dx tap.
        let tap = cl.a.block(0, 2).part(0, 0);
        assert!(tap.get(0, 0).max_coeff_diff(&Poly::constant(1.0)) < 1e-14);
    }
}
