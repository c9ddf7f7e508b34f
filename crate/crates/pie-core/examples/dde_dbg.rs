use ndarray::Array2;
use ndarray_linalg::Eig;
use ndarray_linalg::Solve;
use pie_core::converters::{dde_to_pie, dpde_to_pie};
use pie_core::pde_models::{dde_example, heat_example};
use pie_core::pi_algebra::ZFunction;
use pie_core::pie_system::PieSystem;
use pie_core::polykernel::{Poly, PolyMatrix, Var};

fn basis(g: &PieSystem, deg: u32) -> Vec<ZFunction> {
    let dims = g.vs.dims();
    let mut out = Vec::new();
    for c in 0..4 {
        for row in 0..dims[c] {
            let vars: &[&[(Var, u32)]] = match c {
                0 => &[&[]],
                1 => &[&[(Var::S, 1)]],
                2 => &[&[(Var::X, 1)]],
                _ => &[&[(Var::S, 1), (Var::X, 1)]],
            };
            let _ = vars;
            let degs: Vec<Vec<(Var, u32)>> = match c {
                0 => vec![vec![]],
                1 => (0..=deg).map(|k| vec![(Var::S, k)]).collect(),
                2 => (0..=deg).map(|k| vec![(Var::X, k)]).collect(),
                _ => (0..=deg)
                    .flat_map(|k| (0..=deg).map(move |l| vec![(Var::S, k), (Var::X, l)]))
                    .collect(),
            };
            for spec in degs {
                let mut p = Poly::constant(1.0);
                for (v, k) in spec {
                    p = p.mul(&Poly::monomial(v, k, 1.0), 24).unwrap();
                }
                let mut m = PolyMatrix::zeros(dims[c], 1, g.vs.domain);
                m.set(row, 0, p);
                let mut z = ZFunction::zero(&g.vs);
                z.set_comp(c, m);
                out.push(z);
            }
        }
    }
    out
}

fn spectrum(g: &PieSystem, deg: u32, label: &str) {
    let vb = basis(g, deg);
    let n = vb.len();
    let tg = Array2::from_shape_fn((n, n), |(i, j)| {
        vb[i].inner(&g.t.apply(&vb[j]).unwrap()).unwrap()
    });
    let ag = Array2::from_shape_fn((n, n), |(i, j)| {
        vb[i].inner(&g.a.apply(&vb[j]).unwrap()).unwrap()
    });
    // Solve the pencil λ·Tg c = Ag c via inv on Ag side to avoid singular Tg:
    // use eig of pencil through (Ag, Tg): solve Tg⁻¹Ag if possible else QZ-free
    // fallback: shift-invert around σ: (Ag − σTg)⁻¹ Tg has eigs 1/(λ−σ).
    let sigma = 0.123;
    let shifted = &ag - &(tg.mapv(|v| v * sigma));
    let mut inv_tg_cols = Array2::zeros((n, n));
    for j in 0..n {
        let col = shifted.solve(&tg.column(j).to_owned()).unwrap();
        inv_tg_cols.column_mut(j).assign(&col);
    }
    let (ev, _) = inv_tg_cols.eig().unwrap();
    let mut lams: Vec<(f64, f64)> = ev
        .iter()
        .filter(|m| m.norm() > 1e-8)
        .map(|m| {
            let inv = 1.0 / m;
            (sigma + inv.re, inv.im)
        })
        .collect();
    lams.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let top: Vec<String> =
        lams.iter().take(5).map(|(re, im)| format!("{re:.4}{im:+.4}i")).collect();
    println!("{label}: rightmost {}", top.join(", "));
}

fn main() {
    let s = dde_to_pie(&dde_example(0.3)).unwrap();
    spectrum(&PieSystem::autonomous(s.t.clone(), s.a.clone()), 8, "dde tau=0.3");
    let s = dpde_to_pie(&heat_example(0.5, 0.5)).unwrap();
    spectrum(&PieSystem::autonomous(s.t.clone(), s.a.clone()), 6, "heat r=0.5 tau=0.5");
    let s = dpde_to_pie(&heat_example(1.0, 0.5)).unwrap();
    spectrum(&PieSystem::autonomous(s.t.clone(), s.a.clone()), 6, "heat r=1.0 tau=0.5");
}
