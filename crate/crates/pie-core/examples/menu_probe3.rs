use pie_core::converters::dpde_to_pie;
use pie_core::lpi_stability::{ConeMenu, LpiAssembler};
use pie_core::pde_models::heat_example;
use pie_core::pie_system::PieSystem;
use pie_core::sdp_backend::solve;
use std::time::Instant;

fn main() {
    let s = dpde_to_pie(&heat_example(1.9, 0.5)).unwrap();
    let g = PieSystem::autonomous(s.t.clone(), s.a.clone());
    let m1 = ConeMenu {
        degree_x: 1,
        degree_s: 1,
        enrich_x: 1,
        enrich_s: 0,
        upper_x: true,
        upper_s: true,
    };
    let m2 = ConeMenu {
        degree_x: 4,
        degree_s: 2,
        enrich_x: 1,
        enrich_s: 0,
        upper_x: true,
        upper_s: true,
    };
    let asm = LpiAssembler::with_menus(&g, 1e-2, m1, m2).unwrap();
    println!("n1 {}, n2 {}", asm.p1.dim(), asm.p2.dim());
    let p = asm.problem_at(0.139).unwrap();
    println!("keep {}/{}, m {}", p.keep1.len(), p.keep2.len(), p.problem.constraints.len());
    let t = Instant::now();
    let r = solve(&p.problem, 1e-8).unwrap();
    println!(
        "{:?} res {:.2e} eig {:.2e} iters {} in {:?}",
        r.status,
        r.max_residual,
        r.min_eigenvalue,
        r.iterations,
        t.elapsed()
    );
}
