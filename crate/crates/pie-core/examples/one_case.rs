use pie_core::converters::dpde_to_pie;
use pie_core::lpi_stability::auto_assembler;
use pie_core::pde_models::heat_example;
use pie_core::pie_system::PieSystem;
use pie_core::sdp_backend::solve;
use std::time::Instant;

fn main() {
    let s = dpde_to_pie(&heat_example(1.9, 0.5)).unwrap();
    let g = PieSystem::autonomous(s.t.clone(), s.a.clone());
    let t0 = Instant::now();
    let asm = auto_assembler(&g, 1e-2, 1).unwrap();
    println!("assembler built in {:?} (n1 {}, n2 {})", t0.elapsed(), asm.p1.dim(), asm.p2.dim());
    for alpha in [0.0, 0.139] {
        let t1 = Instant::now();
        match asm.problem_at(alpha) {
            Ok(p) => {
                let nnz: usize = p.problem.constraints.iter().map(|c| c.entries.len()).sum();
                let maxe = p.problem.constraints.iter().map(|c| c.entries.len()).max().unwrap();
                println!(
                    "alpha {alpha}: keep {}/{}, m {}, nnz {} (max/constraint {}), assembled in {:?}",
                    p.keep1.len(),
                    p.keep2.len(),
                    p.problem.constraints.len(),
                    nnz,
                    maxe,
                    t1.elapsed()
                );
                let t2 = Instant::now();
                let r = solve(&p.problem, 1e-8).unwrap();
                println!(
                    "alpha {alpha}: {:?} res {:.2e} eig {:.2e} iters {} in {:?}",
                    r.status,
                    r.max_residual,
                    r.min_eigenvalue,
                    r.iterations,
                    t2.elapsed()
                );
            }
            Err(e) => println!("alpha {alpha}: {e} in {:?}", t1.elapsed()),
        }
    }
}
