use pie_core::converters::dpde_to_pie;
use pie_core::lpi_stability::{ConeMenu, LpiAssembler};
use pie_core::pde_models::heat_example;
use pie_core::pie_system::PieSystem;
use pie_core::sdp_backend::solve;
use std::time::Instant;

fn main() {
    let s = dpde_to_pie(&heat_example(1.9, 0.5)).unwrap();
    let g = PieSystem::autonomous(s.t.clone(), s.a.clone());
    let m = |dx: u32, ds: u32, ex: u32, es: u32, ux: bool, us: bool| ConeMenu {
        degree_x: dx,
        degree_s: ds,
        enrich_x: ex,
        enrich_s: es,
        upper_x: ux,
        upper_s: us,
    };
    let variants: Vec<(&str, ConeMenu, ConeMenu)> = vec![
        ("F: z2 es0 noUp", m(1, 1, 1, 1, true, true), m(4, 3, 1, 0, false, false)),
        ("G: both es0 noUp", m(1, 1, 1, 0, false, false), m(4, 3, 1, 0, false, false)),
        ("C: z1 es0, z2 es0", m(1, 1, 1, 0, true, true), m(4, 3, 1, 0, true, true)),
        ("D: C + ds2=2", m(1, 1, 1, 0, true, true), m(4, 2, 1, 0, true, true)),
    ];
    for (name, m1, m2) in variants {
        let t0 = Instant::now();
        let asm = match LpiAssembler::with_menus(&g, 1e-2, m1, m2) {
            Ok(a) => a,
            Err(e) => {
                println!("{name}: assembler error {e}");
                continue;
            }
        };
        println!(
            "{name}: n1 {}, n2 {}, built in {:?}",
            asm.p1.dim(),
            asm.p2.dim(),
            t0.elapsed()
        );
        for alpha in [0.0, 0.139] {
            let t1 = Instant::now();
            match asm.problem_at(alpha) {
                Ok(p) => {
                    let nnz: usize =
                        p.problem.constraints.iter().map(|c| c.entries.len()).sum();
                    println!(
                        "{name} alpha {alpha}: keep {}/{}, m {}, nnz {}",
                        p.keep1.len(),
                        p.keep2.len(),
                        p.problem.constraints.len(),
                        nnz,
                    );
                    let t2 = Instant::now();
                    let r = solve(&p.problem, 1e-8).unwrap();
                    println!(
                        "{name} alpha {alpha}: {:?} res {:.2e} eig {:.2e} iters {} in {:?}",
                        r.status,
                        r.max_residual,
                        r.min_eigenvalue,
                        r.iterations,
                        t2.elapsed()
                    );
                    let _ = t1;
                }
                Err(e) => println!("{name} alpha {alpha}: {e} in {:?}", t1.elapsed()),
            }
        }
    }
}
