use blacksol_core::evolve::*;
use blacksol_core::grid::*;

fn main() {
    let g = Grid::new(20.0, 4001).unwrap();
    let psi0 = blacksol_core::soliton::black_soliton(&g);
    let mut state = EvolutionState::new(psi0.clone(), 1e-2);
    for k in 0..1000 {
        if let Err(e) = step_nonlinear(&mut state, 0.0, None) {
            println!("step {k} failed: {e}");
            return;
        }
        if k % 200 == 0 || k == 999 {
            let dev = state.psi.zip_map(&psi0, |a, b| a - b);
            let mut worst = (0.0, 0.0);
            for (i, z) in dev.values().iter().enumerate() {
                if z.norm() > worst.1 { worst = (g.node(i), z.norm()); }
            }
            println!("t = {:5.2}: max dev {:.3e} at x = {:.2}", state.time, worst.1, worst.0);
        }
    }
}
