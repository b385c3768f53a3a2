//! VR-TOS against stochastic TOS and the proximal SAGA / SVRG baselines whose
//! prox of g + h is approximated by ten Douglas-Rachford sweeps.

use vrtos::data::{generate_synthetic, Task};
use vrtos::model::{LossKind, SmoothModel};
use vrtos::penalties::OverlappingGroupLasso;
use vrtos::solvers::{reference_solution, run, Problem, SolverConfig, SolverKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (1000, 300);
    let data = generate_synthetic(n, p, 0.03, Task::Logistic, 4)?;
    let model = SmoothModel::new(data, LossKind::Logistic, 1.0 / n as f64)?;
    let mut halves = OverlappingGroupLasso::successive(p, 10, 2, 1.0 / n as f64)?.split()?.into_iter();
    let (g, h) = (halves.next().expect("two families"), halves.next().expect("two families"));
    let problem = Problem::pair(model, g, h)?;
    let p_star = problem.objective(&reference_solution(&problem, 1e-12, 100_000)?.solution);

    println!("{:>9} {:>7} {:>10} {:>10} {:>12}", "solver", "epochs", "grads", "proxes", "P - P*");
    for kind in [SolverKind::VrTos, SolverKind::Stos, SolverKind::Saga, SolverKind::ProxSvrg] {
        let config = SolverConfig {
            max_epochs: 30,
            ..SolverConfig::default()
        };
        let r = run(&problem, kind, &config)?;
        let last = r.trace.last().expect("rows");
        println!(
            "{:>9} {:>7} {:>10} {:>10} {:>12.3e}",
            kind.name(),
            last.epoch,
            last.grad_evals,
            last.prox_evals,
            last.objective - p_star
        );
    }
    Ok(())
}
