use pie_core::lpi_stability::auto_assembler;
use pie_core::pi_algebra::{PiOperator, ZSpace};
use pie_core::pie_system::PieSystem;
use pie_core::polykernel::{Domain, Poly, PolyMatrix, Var};
use pie_core::sdp_backend::solve;

fn main() {
    // Delay-free heat u_t = u_xx on [0,1], Dirichlet: fundamental v = u_xx,
    // u = Tv with kernels Low: (x-θ) - x(1-θ), Up: -x(1-θ); A = I.
    let dom = Domain::new(0.0, 1.0);
    let vs = ZSpace::new(0, 0, 1, 0, dom);
    let x = Poly::monomial(Var::X, 1, 1.0);
    let th = Poly::monomial(Var::Theta, 1, 1.0);
    let one = Poly::constant(1.0);
    let x_th = x.add(&th.scale(-1.0));
    let corr = x.mul(&one.add(&th.scale(-1.0)), 24).unwrap().scale(-1.0);
    let mut t = PiOperator::zero(&vs, &vs);
    let mut kl = PolyMatrix::zeros(1, 1, dom);
    kl.set(0, 0, x_th.add(&corr));
    t.set_part(2, 2, 1, 0, kl).unwrap();
    let mut ku = PolyMatrix::zeros(1, 1, dom);
    ku.set(0, 0, corr.clone());
    t.set_part(2, 2, 2, 0, ku).unwrap();
    let mut a = PiOperator::zero(&vs, &vs);
    let mut ka = PolyMatrix::zeros(1, 1, dom);
    ka.set(0, 0, Poly::constant(1.0));
    a.set_part(2, 2, 0, 0, ka).unwrap();
    let g = PieSystem::autonomous(t, a);
    for (d, dx2) in [(1u32, 3u32), (1, 4), (1, 5), (2, 5), (2, 6)] {
        let asm = pie_core::lpi_stability::LpiAssembler::new(&g, 1e-2, d, dx2, 0).unwrap();
        println!("-- d {d} dx2 {dx2}");
        for alpha in [0.0, 1.0, 4.0, 8.0] {
            match asm.problem_at(alpha) {
                Ok(p) => {
                    let r = solve(&p.problem, 1e-8).unwrap();
                    println!(
                        "  alpha {alpha}: {:?} res {:.2e} eig {:.2e} (keep {}/{}, m {})",
                        r.status,
                        r.max_residual,
                        r.min_eigenvalue,
                        p.keep1.len(),
                        p.keep2.len(),
                        p.problem.constraints.len()
                    );
                }
                Err(e) => println!("  alpha {alpha}: {e}"),
            }
        }
    }
}
