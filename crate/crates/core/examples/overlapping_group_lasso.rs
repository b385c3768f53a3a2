//! Overlapping group lasso (groups of 10 sharing 2 coordinates) as two
//! disjoint group-lasso terms plus an l1 term, solved by the k-term solver.

use std::sync::Arc;

use vrtos::data::{generate_synthetic, Task};
use vrtos::model::{LossKind, SmoothModel};
use vrtos::penalties::{L1Penalty, OverlappingGroupLasso, Penalty, Regularizer};
use vrtos::solvers::{reference_solution, run, Problem, SolverConfig, SolverKind};

#[derive(Debug)]
struct Total(OverlappingGroupLasso, L1Penalty);

impl Regularizer for Total {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) + self.1.value(x)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, p) = (600, 200);
    let lambda = 1.0 / n as f64;
    let data = generate_synthetic(n, p, 0.05, Task::Logistic, 3)?;
    let model = SmoothModel::new(data, LossKind::Logistic, lambda)?;
    let ogl = OverlappingGroupLasso::successive(p, 10, 2, lambda)?;
    let l1 = L1Penalty::new(p, 0.1 * lambda)?;

    let mut terms: Vec<Arc<dyn Penalty>> = Vec::new();
    for family in ogl.split()? {
        terms.push(Arc::new(family));
    }
    terms.push(Arc::new(l1.clone()));
    println!("{} groups split into {} proximal terms", ogl.groups().len(), terms.len());

    let problem = Problem::new(model, terms)?.with_objective_term(Arc::new(Total(ogl, l1)));
    let reference = reference_solution(&problem, 1e-10, 100_000)?;
    let p_star = problem.objective(&reference.solution);
    let config = SolverConfig {
        max_epochs: 100,
        trace_every: 10,
        ..SolverConfig::default()
    };
    let r = run(&problem, SolverKind::VrTosK, &config)?;
    for row in r.trace.rows() {
        println!(
            "epoch {:>3}  P - P* = {:.3e}  residual = {:.3e}  nnz = {}",
            row.epoch,
            row.objective - p_star,
            row.residual,
            row.nnz
        );
    }
    Ok(())
}
