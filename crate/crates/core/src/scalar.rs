//! Single-equation machinery: the monotone Lax-Friedrichs discretization,
//! the stationary solver for the strictly increasing case, the sign-flip
//! transform F(x, p, u) = H(x, -p, -u), and explicit time marching.

use crate::error::{Error, Result};
use crate::geometry::{GridField, SpaceTimeField, TorusGrid};
use crate::hamiltonian::{KineticHamiltonian, Monotonicity, SystemSpec, MAX_COMPONENTS};
use std::sync::Arc;

/// Zeroth-order term of a frozen-partner equation: (x, u, frozen values) -> real.
pub type FrozenCoupling = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

/// Dissipation coefficient policy for the Lax-Friedrichs flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity {
    /// 1.1 x max sampled |dh/dp| over |p| <= 2 (initial Lipschitz estimate + 1),
    /// re-estimated if gradients grow.
    Auto,
    Fixed(f64),
}

/// Numerical parameters shared by the stationary and evolutionary solvers.
#[derive(Debug, Clone)]
pub struct SchemeParams {
    pub viscosity: Viscosity,
    /// CFL number in (0, 1] for the dt cap cfl * spacing / sigma.
    pub cfl: f64,
    /// Explicit step override; always capped by the stability limits.
    pub pseudo_dt: Option<f64>,
    /// Residual sup-norm tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// Sweep cap for coupled alternating iterations.
    pub max_sweeps: usize,
    /// Keep every k-th frame in trajectories.
    pub store_stride: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            viscosity: Viscosity::Auto,
            cfl: 0.45,
            pseudo_dt: None,
            tol: 1e-8,
            max_iters: 200_000,
            max_sweeps: 400,
            store_stride: 1,
        }
    }
}

impl SchemeParams {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_viscosity(mut self, sigma: f64) -> Self {
        self.viscosity = Viscosity::Fixed(sigma);
        self
    }
}

/// Single equation H(x, Du, u, v(x)) = 0 with the partner components frozen.
#[derive(Clone)]
pub struct ScalarProblem {
    kinetic: KineticHamiltonian,
    coupling: FrozenCoupling,
    monotonicity: Monotonicity,
    modulus: f64,
    theta: f64,
    frozen: Vec<GridField>,
    grid: TorusGrid,
}

impl std::fmt::Debug for ScalarProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarProblem")
            .field("monotonicity", &self.monotonicity)
            .field("modulus", &self.modulus)
            .field("theta", &self.theta)
            .field("frozen", &self.frozen.len())
            .finish()
    }
}

impl ScalarProblem {
    /// Builds a problem and certifies the declared monotonicity class and
    /// modulus against sampled difference quotients of the u-term.
    pub fn new(
        kinetic: KineticHamiltonian,
        coupling: FrozenCoupling,
        monotonicity: Monotonicity,
        modulus: f64,
        theta: f64,
        frozen: Vec<GridField>,
        grid: TorusGrid,
    ) -> Result<Self> {
        for f in &frozen {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        let p = ScalarProblem {
            kinetic,
            coupling,
            monotonicity,
            modulus,
            theta,
            frozen,
            grid,
        };
        p.validate_samples()?;
        Ok(p)
    }

    fn validate_samples(&self) -> Result<()> {
        if self.monotonicity != Monotonicity::None && !(self.modulus > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "declared monotone with non-positive modulus {}",
                self.modulus
            )));
        }
        let us = [-10.0, -4.0, -1.0, 0.0, 1.0, 4.0, 10.0];
        let tol = 1e-9 * (1.0 + self.theta);
        let n = self.grid.n();
        for k in (0..n).step_by((n / 8).max(1)) {
            for a in 0..us.len() {
                for c in 0..us.len() {
                    if a == c {
                        continue;
                    }
                    let ga = self.coupling_at_node(k, us[a]);
                    let gc = self.coupling_at_node(k, us[c]);
                    let quot = (ga - gc) / (us[a] - us[c]);
                    if quot.abs() > self.theta + tol {
                        return Err(Error::InvalidSpec(format!(
                            "u-term difference quotient {quot:.4} exceeds declared theta {}",
                            self.theta
                        )));
                    }
                    match self.monotonicity {
                        Monotonicity::Increasing if quot < self.modulus - tol => {
                            return Err(Error::InvalidSpec(format!(
                                "u-term declared increasing (modulus {}) but quotient is {quot:.4}",
                                self.modulus
                            )));
                        }
                        Monotonicity::Decreasing if quot > -self.modulus + tol => {
                            return Err(Error::InvalidSpec(format!(
                                "u-term declared decreasing (modulus {}) but quotient is {quot:.4}",
                                self.modulus
                            )));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn kinetic(&self) -> &KineticHamiltonian {
        &self.kinetic
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn frozen(&self) -> &[GridField] {
        &self.frozen
    }

    /// u-term at node k.
    pub fn coupling_at_node(&self, k: usize, u: f64) -> f64 {
        let mut buf = [0.0; MAX_COMPONENTS];
        for (s, f) in self.frozen.iter().enumerate() {
            buf[s] = f.values()[k];
        }
        (self.coupling)(self.grid.node(k), u, &buf[..self.frozen.len()])
    }

    /// u-term at an off-grid point; frozen fields by periodic interpolation.
    pub fn coupling_interp(&self, x: f64, u: f64) -> f64 {
        let mut buf = [0.0; MAX_COMPONENTS];
        for (s, f) in self.frozen.iter().enumerate() {
            buf[s] = f.interp(x);
        }
        (self.coupling)(x, u, &buf[..self.frozen.len()])
    }

    /// The transformed problem F(x, p, u) = H(x, -p, -u): kinetic reflected
    /// in p, u-term reflected in u, monotonicity class flipped, frozen
    /// partner unchanged. Applying it twice restores the original.
    pub fn f_transform(&self) -> ScalarProblem {
        let inner = self.coupling.clone();
        ScalarProblem {
            kinetic: self.kinetic.reflected(),
            coupling: Arc::new(move |x, u, v: &[f64]| inner(x, -u, v)),
            monotonicity: self.monotonicity.flipped(),
            modulus: self.modulus,
            theta: self.theta,
            frozen: self.frozen.clone(),
            grid: self.grid,
        }
    }
}

/// Lax-Friedrichs numerical Hamiltonian
/// h(x, (p_l + p_r)/2) - (sigma/2)(p_r - p_l).
pub fn numerical_hamiltonian(
    h: &KineticHamiltonian,
    x: f64,
    p_left: f64,
    p_right: f64,
    sigma: f64,
) -> f64 {
    h.value(x, 0.5 * (p_left + p_right)) - 0.5 * sigma * (p_right - p_left)
}

/// Dissipation coefficient: 1.1 x max sampled |dh/dp| over
/// |p| <= 2 (lip + 1), where lip is the worst Lipschitz estimate of
/// `fields`, rounded up onto a 5% geometric lattice. The quantization makes
/// the coefficient insensitive to sub-percent gradient jitter, so a field
/// polished at its own auto coefficient re-certifies at exactly that
/// coefficient.
pub fn auto_sigma(kinetic: &KineticHamiltonian, grid: TorusGrid, fields: &[&GridField]) -> f64 {
    let lip = fields
        .iter()
        .map(|f| f.lipschitz_estimate())
        .fold(0.0, f64::max);
    let range = 2.0 * (lip + 1.0);
    let raw = (1.1 * kinetic.max_slope(grid.length(), range)).max(1e-6);
    const STEP: f64 = 1.05;
    STEP.powf((raw.ln() / STEP.ln()).ceil())
}

fn resolve_sigma(prob: &ScalarProblem, params: &SchemeParams, fields: &[&GridField]) -> f64 {
    match params.viscosity {
        Viscosity::Fixed(s) => s,
        Viscosity::Auto => auto_sigma(&prob.kinetic, prob.grid, fields),
    }
}

fn step_cap(prob: &ScalarProblem, params: &SchemeParams, sigma: f64) -> f64 {
    let dx = prob.grid.spacing();
    let theta = prob.theta.max(prob.modulus);
    let mut dt = params.cfl * dx / sigma.max(1e-9);
    if theta > 0.0 {
        dt = dt.min(0.5 / theta);
    }
    if let Some(h) = params.pseudo_dt {
        dt = dt.min(h);
    }
    dt
}

/// Writes the stationary scheme residual of `u` into `out`; returns the sup.
fn residual_into(prob: &ScalarProblem, u: &[f64], sigma: f64, out: &mut [f64]) -> f64 {
    let n = u.len();
    let dx = prob.grid.spacing();
    let mut sup = 0.0f64;
    for k in 0..n {
        let um = u[(k + n - 1) % n];
        let up = u[(k + 1) % n];
        let pl = (u[k] - um) / dx;
        let pr = (up - u[k]) / dx;
        let x = prob.grid.node(k);
        let v = numerical_hamiltonian(&prob.kinetic, x, pl, pr, sigma)
            + prob.coupling_at_node(k, u[k]);
        out[k] = v;
        sup = sup.max(v.abs());
    }
    sup
}

/// Stationary scheme residual sup-norm with an explicit dissipation
/// coefficient.
pub fn residual_with(prob: &ScalarProblem, u: &GridField, sigma: f64) -> f64 {
    let mut buf = vec![0.0; u.len()];
    residual_into(prob, u.values(), sigma, &mut buf)
}

/// Stationary scheme residual sup-norm; the discrete stand-in for "is a
/// viscosity solution". Dissipation chosen by the auto rule from `u`.
pub fn residual(prob: &ScalarProblem, u: &GridField) -> f64 {
    let sigma = auto_sigma(&prob.kinetic, prob.grid, &[u]);
    residual_with(prob, u, sigma)
}

/// Pseudo-time marching of the monotone scheme to its fixed point, for a
/// strictly increasing u-term. Converges by discrete comparison; the output
/// carries scheme residual at most `params.tol`.
pub fn solve_increasing(prob: &ScalarProblem, params: &SchemeParams) -> Result<GridField> {
    let init = GridField::zeros(prob.grid);
    solve_increasing_from(prob, params, &init)
}

/// Same as [`solve_increasing`] but warm-started.
pub fn solve_increasing_from(
    prob: &ScalarProblem,
    params: &SchemeParams,
    init: &GridField,
) -> Result<GridField> {
    if prob.monotonicity != Monotonicity::Increasing || !(prob.modulus > 0.0) {
        return Err(Error::InvalidSpec(
            "solve_increasing requires a strictly increasing u-term with positive modulus".into(),
        ));
    }
    if init.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    let mut u = init.values().to_vec();
    let mut sigma = resolve_sigma(prob, params, &[init]);
    let mut dt = step_cap(prob, params, sigma);
    let mut res = vec![0.0; u.len()];
    let mut history = Vec::new();
    let mut covered = 2.0 * (init.lipschitz_estimate() + 1.0);
    let mut recertify_rounds = 0;

    for it in 0..params.max_iters {
        let sup = residual_into(prob, &u, sigma, &mut res);
        if it % 128 == 0 {
            history.push(sup);
        }
        if !sup.is_finite() || sup > 1e10 {
            return Err(Error::NonConvergence {
                iters: it,
                residual: sup,
                history,
            });
        }
        if sup <= params.tol {
            // certify the output against its own auto dissipation, so the
            // residual read by callers matches the one converged here; the
            // sigma(u(sigma)) map contracts, so this settles in a few rounds
            if params.viscosity == Viscosity::Auto && recertify_rounds < 16 {
                let f = GridField::from_values(prob.grid, u.clone())?;
                let s = auto_sigma(&prob.kinetic, prob.grid, &[&f]);
                if (s - sigma).abs() > 1e-12 * (1.0 + sigma) {
                    sigma = s;
                    dt = step_cap(prob, params, sigma);
                    recertify_rounds += 1;
                    continue;
                }
            }
            return GridField::from_values(prob.grid, u);
        }
        for k in 0..u.len() {
            u[k] -= dt * res[k];
        }
        // gradients can outgrow the sampled slope range; re-estimate upward
        if params.viscosity == Viscosity::Auto && it % 512 == 511 {
            let f = GridField::from_values(prob.grid, u.clone())?;
            let lip = f.lipschitz_estimate();
            if 2.0 * (lip + 1.0) > covered {
                covered = 2.0 * (lip + 1.0);
                let s = auto_sigma(&prob.kinetic, prob.grid, &[&f]);
                if s > sigma {
                    sigma = s;
                    dt = step_cap(prob, params, sigma);
                }
            }
        }
    }
    let sup = residual_into(prob, &u, sigma, &mut res);
    Err(Error::NonConvergence {
        iters: params.max_iters,
        residual: sup,
        history,
    })
}

/// Explicit monotone time marching for
/// d_t u + H(x, Du, u, v(x)) = 0, u(0) = phi. Frames at multiples of dt up
/// to T; the first frame is phi. dt obeys both cfl spacing / sigma and
/// 1/(2 Theta).
pub fn evolve_scalar(
    phi: &GridField,
    prob: &ScalarProblem,
    t_final: f64,
    params: &SchemeParams,
) -> Result<SpaceTimeField> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidSpec(format!("T must be positive, got {t_final}")));
    }
    if phi.grid() != prob.grid {
        return Err(Error::GridMismatch);
    }
    let sigma = resolve_sigma(prob, params, &[phi]);
    let dt_cap = step_cap(prob, params, sigma);
    let steps = (t_final / dt_cap).ceil() as usize;
    let dt = t_final / steps as f64;
    let stride = params.store_stride.max(1);

    // a-priori growth bound (Gronwall form), abort at 10x
    let mut res = vec![0.0; phi.len()];
    let drive = residual_into(prob, phi.values(), sigma, &mut res);
    let phi_sup = phi.sup_norm();
    let bound_at = |t: f64| {
        10.0 * (phi_sup + 1.0 + drive * t) * (prob.theta * t).exp()
    };

    let mut traj = SpaceTimeField::new(phi.clone(), dt * stride as f64)?;
    let mut u = phi.values().to_vec();
    for s in 0..steps {
        residual_into(prob, &u, sigma, &mut res);
        for k in 0..u.len() {
            u[k] -= dt * res[k];
        }
        let t = (s + 1) as f64 * dt;
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() || sup > bound_at(t) {
            return Err(Error::Instability {
                t,
                sup,
                bound: bound_at(t),
            });
        }
        if (s + 1) % stride == 0 || s + 1 == steps {
            traj.push(GridField::from_values(prob.grid, u.clone())?)?;
        }
    }
    Ok(traj)
}

/// Damped Newton iteration on the discrete stationary system
/// R_k(u) = 0, R_k = LF flux + u-term at node k. Used to land exactly on a
/// discrete root from a nearby candidate (the pseudo-time flow is unstable
/// for decreasing u-terms, so marching cannot do this).
pub fn newton_polish(
    prob: &ScalarProblem,
    start: &GridField,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GridField> {
    let n = start.len();
    let dx = prob.grid.spacing();
    let mut u = start.values().to_vec();
    let mut res = vec![0.0; n];
    let mut sup = residual_into(prob, &u, sigma, &mut res);

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup_d = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    for _ in 0..max_iter {
        if sup <= tol {
            return GridField::from_values(prob.grid, u);
        }
        for k in 0..n {
            let um = u[(k + n - 1) % n];
            let up = u[(k + 1) % n];
            let pc = (up - um) / (2.0 * dx);
            let x = prob.grid.node(k);
            let dd = 1e-6 * (1.0 + pc.abs());
            let hp = (prob.kinetic.value(x, pc + dd) - prob.kinetic.value(x, pc - dd)) / (2.0 * dd);
            let du = 1e-6 * (1.0 + u[k].abs());
            let gu = (prob.coupling_at_node(k, u[k] + du) - prob.coupling_at_node(k, u[k] - du))
                / (2.0 * du);
            sub[k] = -hp / (2.0 * dx) - sigma / (2.0 * dx);
            diag[k] = sigma / dx + gu;
            sup_d[k] = hp / (2.0 * dx) - sigma / (2.0 * dx);
            rhs[k] = -res[k];
        }
        let delta = solve_cyclic_tridiagonal(&sub, &diag, &sup_d, &rhs)?;
        // backtracking line search on the residual sup-norm
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let cand: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lam * d).collect();
            let s = residual_into(prob, &cand, sigma, &mut res);
            if s < sup {
                u = cand;
                sup = s;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if sup <= tol {
        GridField::from_values(prob.grid, u)
    } else {
        Err(Error::NonConvergence {
            iters: max_iter,
            residual: sup,
            history: vec![sup],
        })
    }
}

/// Thomas algorithm with a Sherman-Morrison correction for the periodic
/// corner entries. `sub[k]` multiplies x_{k-1}, `sup[k]` multiplies x_{k+1},
/// indices mod n.
fn solve_cyclic_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= sup[n - 1] * sub[0] / gamma;

    let thomas = |b: &[f64], d: &[f64]| -> Result<Vec<f64>> {
        let mut c_star = vec![0.0; n];
        let mut d_star = vec![0.0; n];
        let mut denom = b[0];
        if denom.abs() < 1e-300 {
            return Err(Error::InvalidSpec("singular tridiagonal system".into()));
        }
        c_star[0] = sup[0] / denom;
        d_star[0] = d[0] / denom;
        for k in 1..n {
            denom = b[k] - sub[k] * c_star[k - 1];
            if denom.abs() < 1e-300 {
                return Err(Error::InvalidSpec("singular tridiagonal system".into()));
            }
            if k < n - 1 {
                c_star[k] = sup[k] / denom;
            }
            d_star[k] = (d[k] - sub[k] * d_star[k - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d_star[n - 1];
        for k in (0..n - 1).rev() {
            x[k] = d_star[k] - c_star[k] * x[k + 1];
        }
        Ok(x)
    };

    let y = thomas(&b, rhs)?;
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = sup[n - 1];
    let z = thomas(&b, &uvec)?;
    // v = (1, 0, ..., 0, sub[0]/gamma)
    let vy = y[0] + sub[0] / gamma * y[n - 1];
    let vz = z[0] + sub[0] / gamma * z[n - 1];
    let factor = vy / (1.0 + vz);
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect())
}

impl SystemSpec {
    /// Single-equation view of component `i` with the other components
    /// frozen (ascending index order).
    pub fn component_problem(&self, i: usize, frozen: Vec<GridField>) -> Result<ScalarProblem> {
        if i >= self.m() {
            return Err(Error::InvalidSpec(format!("component {i} out of range")));
        }
        if frozen.len() != self.m() - 1 {
            return Err(Error::InvalidSpec(format!(
                "component {i} needs {} frozen partners, got {}",
                self.m() - 1,
                frozen.len()
            )));
        }
        let spec = self.clone();
        let m = self.m();
        let coupling: FrozenCoupling = Arc::new(move |x, u, others: &[f64]| {
            let mut buf = [0.0; MAX_COMPONENTS];
            let mut oi = 0;
            for (j, slot) in buf.iter_mut().enumerate().take(m) {
                if j == i {
                    *slot = u;
                } else {
                    *slot = others[oi];
                    oi += 1;
                }
            }
            spec.coupling_value(i, x, &buf[..m])
        });
        let modulus = match self.class(i) {
            Monotonicity::None => 0.0,
            _ => self.modulus(i)?,
        };
        ScalarProblem::new(
            self.kinetic(i).clone(),
            coupling,
            self.class(i),
            modulus,
            self.theta(),
            frozen,
            self.grid(),
        )
    }
}

/// Standalone single equation h(x, Du) + g(x, u) = 0 without frozen
/// partners, as a [`ScalarProblem`].
pub fn standalone_problem<G>(
    kinetic: KineticHamiltonian,
    g: G,
    monotonicity: Monotonicity,
    modulus: f64,
    theta: f64,
    grid: TorusGrid,
) -> Result<ScalarProblem>
where
    G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
{
    ScalarProblem::new(
        kinetic,
        Arc::new(move |x, u, _| g(x, u)),
        monotonicity,
        modulus,
        theta,
        Vec::new(),
        grid,
    )
}
