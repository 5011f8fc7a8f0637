//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;
use weakhj_core::hamiltonian::XMap;
use weakhj_core::{
    CouplingLaw, DiscountedFamily, KineticHamiltonian, Monotonicity, ScalarProblem, SystemSpec,
    TorusGrid,
};

pub fn cmap(c: f64) -> XMap {
    Arc::new(move |_| c)
}

pub fn sin_scalar_problem(n: usize) -> ScalarProblem {
    let grid = TorusGrid::standard(n).unwrap();
    weakhj_core::standalone_problem(
        KineticHamiltonian::quadratic(grid.length()),
        |x: f64, u: f64| u - x.sin(),
        Monotonicity::Increasing,
        1.0,
        1.0,
        grid,
    )
    .unwrap()
}

pub fn chi016_system(n: usize) -> SystemSpec {
    let grid = TorusGrid::standard(n).unwrap();
    SystemSpec::new(
        vec![
            KineticHamiltonian::quadratic_with_potential(|x: f64| x.sin(), grid.length()).unwrap(),
            KineticHamiltonian::quadratic(grid.length()),
        ],
        CouplingLaw::Linear {
            lambda: vec![vec![cmap(1.0), cmap(-0.4)], vec![cmap(-0.4), cmap(1.0)]],
            monotone: true,
        },
        vec![0.0, 0.0],
        grid,
    )
    .unwrap()
}

pub fn asym_family(n: usize) -> DiscountedFamily {
    let grid = TorusGrid::standard(n).unwrap();
    DiscountedFamily::new(
        KineticHamiltonian::quadratic_with_potential(|x: f64| x.sin(), grid.length()).unwrap(),
        KineticHamiltonian::quadratic_with_potential(|x: f64| (2.0 * x).cos(), grid.length())
            .unwrap(),
        cmap(2.0),
        cmap(1.0),
        grid,
    )
    .unwrap()
}
