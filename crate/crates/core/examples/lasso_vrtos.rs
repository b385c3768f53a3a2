//! Sparse logistic regression with an l1 + group-lasso penalty, solved by
//! VR-TOS with SAGA and SVRG memory. Prints the trace of the SAGA run.

use vrtos::data::{generate_synthetic, Task};
use vrtos::memory::MemoryScheme;
use vrtos::model::{LossKind, SmoothModel};
use vrtos::penalties::{GroupLassoPenalty, L1Penalty};
use vrtos::solvers::{reference_solution, run, Problem, SolverConfig, SolverKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (500, 120);
    let data = generate_synthetic(n, p, 0.1, Task::Logistic, 1)?;
    let model = SmoothModel::new(data, LossKind::Logistic, 1.0 / n as f64)?;
    let problem = Problem::pair(
        model,
        GroupLassoPenalty::contiguous(p, 6, 0.01)?,
        L1Penalty::new(p, 0.002)?,
    )?;
    let p_star = problem.objective(&reference_solution(&problem, 1e-12, 100_000)?.solution);

    for (name, scheme) in [("saga", MemoryScheme::Saga), ("svrg", MemoryScheme::Svrg { q: 1.0 })] {
        let config = SolverConfig {
            scheme,
            max_epochs: 40,
            trace_every: 5,
            ..SolverConfig::default()
        };
        let result = run(&problem, SolverKind::VrTos, &config)?;
        let x = &result.solution;
        println!(
            "{name}: step {:.3e}, P(x) - P* = {:.2e}, {} nonzeros",
            result.step_size,
            problem.objective(x) - p_star,
            x.iter().filter(|v| v.abs() > 1e-10).count()
        );
        if name == "saga" {
            print!("{}", result.trace.to_csv());
        }
    }
    Ok(())
}
