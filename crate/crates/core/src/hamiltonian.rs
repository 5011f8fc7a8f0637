//! Weakly coupled system specification, the Legendre transform, and the
//! structural constants used by the sup-norm bounds of the alternating
//! iteration: λ_ii, Θ, b_ij, χ, ℍ_i, δ, C, μ, A, B, b̄_ij, κ, κ̄, κ̃.

use crate::error::{Error, Result};
use crate::geometry::TorusGrid;
use serde::Serialize;
use std::sync::Arc;

/// Map x -> real on the circle.
pub type XMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Map (x, p) -> real.
pub type XPMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Map (x, u_1..u_m) -> real.
pub type CouplingMap = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Monotonicity class of a Hamiltonian in its own unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    /// No declared monotonicity. Such components can be evolved in time but
    /// are rejected by the stationary solvers.
    None,
}

impl Monotonicity {
    pub fn flipped(self) -> Self {
        match self {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
            Monotonicity::None => Monotonicity::None,
        }
    }
}

/// Kinetic part h(x, p) of one component, coercive in p.
#[derive(Clone)]
pub struct KineticHamiltonian {
    eval: XPMap,
    p_bound_hint: f64,
}

impl std::fmt::Debug for KineticHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KineticHamiltonian")
            .field("p_bound_hint", &self.p_bound_hint)
            .finish()
    }
}

const X_SAMPLES: usize = 48;

impl KineticHamiltonian {
    /// Wraps an evaluation map after a sampled coercivity check on the circle
    /// of circumference `domain_length`: for |p| at and beyond the hint, the
    /// worst value over x must exceed the p = 0 level by at least 1.
    pub fn new<F>(eval: F, p_bound_hint: f64, domain_length: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_arc(Arc::new(eval), p_bound_hint, domain_length)
    }

    pub fn from_arc(eval: XPMap, p_bound_hint: f64, domain_length: f64) -> Result<Self> {
        if !(p_bound_hint > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "p_bound_hint must be positive, got {p_bound_hint}"
            )));
        }
        let h = KineticHamiltonian {
            eval,
            p_bound_hint,
        };
        let zero_max = (0..X_SAMPLES)
            .map(|k| h.value(k as f64 * domain_length / X_SAMPLES as f64, 0.0))
            .fold(f64::NEG_INFINITY, f64::max);
        for factor in [1.0, 1.25, 1.5, 2.0] {
            let r = p_bound_hint * factor;
            let worst = (0..X_SAMPLES)
                .map(|k| {
                    let x = k as f64 * domain_length / X_SAMPLES as f64;
                    h.value(x, r).min(h.value(x, -r))
                })
                .fold(f64::INFINITY, f64::min);
            if !(worst >= zero_max + 1.0 - 1e-9) {
                return Err(Error::InvalidSpec(format!(
                    "kinetic Hamiltonian not coercive at sampled |p| = {r}: \
                     min over x is {worst:.4}, needs {:.4}",
                    zero_max + 1.0
                )));
            }
        }
        Ok(h)
    }

    /// h(x, p) = p^2.
    pub fn quadratic(domain_length: f64) -> Self {
        Self::new(|_, p| p * p, 2.0, domain_length).expect("p^2 is coercive")
    }

    /// h(x, p) = p^2 + V(x).
    pub fn quadratic_with_potential<V>(pot: V, domain_length: f64) -> Result<Self>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let vmax = (0..X_SAMPLES)
            .map(|k| pot(k as f64 * domain_length / X_SAMPLES as f64).abs())
            .fold(0.0, f64::max);
        let hint = (2.0 * vmax + 2.0).sqrt().max(2.0);
        Self::new(move |x, p| p * p + pot(x), hint, domain_length)
    }

    pub fn value(&self, x: f64, p: f64) -> f64 {
        (self.eval)(x, p)
    }

    pub fn p_bound_hint(&self) -> f64 {
        self.p_bound_hint
    }

    /// New kinetic with p reflected: x, p -> h(x, -p).
    pub fn reflected(&self) -> KineticHamiltonian {
        let inner = self.eval.clone();
        KineticHamiltonian {
            eval: Arc::new(move |x, p| inner(x, -p)),
            p_bound_hint: self.p_bound_hint,
        }
    }

    /// Max of |dh/dp| over sampled x and |p| <= p_range (central differences).
    pub fn max_slope(&self, domain_length: f64, p_range: f64) -> f64 {
        let np = 97;
        let dd = 1e-5 * (1.0 + p_range);
        let mut m = 0.0f64;
        for k in 0..X_SAMPLES {
            let x = k as f64 * domain_length / X_SAMPLES as f64;
            for j in 0..np {
                let p = -p_range + 2.0 * p_range * j as f64 / (np - 1) as f64;
                let d = (self.value(x, p + dd) - self.value(x, p - dd)) / (2.0 * dd);
                m = m.max(d.abs());
            }
        }
        m
    }

    /// Sampled min over (x, p) of h; the minimum of a coercive Hamiltonian is
    /// attained inside |p| <= p_bound_hint.
    pub fn min_value(&self, domain_length: f64) -> f64 {
        let np = 201;
        let r = self.p_bound_hint;
        let mut m = f64::INFINITY;
        for k in 0..128 {
            let x = k as f64 * domain_length / 128.0;
            for j in 0..np {
                let p = -r + 2.0 * r * j as f64 / (np - 1) as f64;
                m = m.min(self.value(x, p));
            }
        }
        m
    }
}

/// Legendre transform sup_p { q p - h(x, p) } over a p-grid of step
/// radius/400 on [-radius, radius], refined by three Newton polish steps on
/// the discrete argmax. Errors if the maximum sits on the search boundary.
pub fn legendre(h: &KineticHamiltonian, x: f64, q: f64, radius: f64) -> Result<f64> {
    if radius < h.p_bound_hint() {
        return Err(Error::InvalidSpec(format!(
            "legendre radius {radius} below p_bound_hint {}",
            h.p_bound_hint()
        )));
    }
    let step = radius / 400.0;
    let npts = 801usize;
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0usize;
    for k in 0..npts {
        let p = -radius + step * k as f64;
        let v = q * p - h.value(x, p);
        if v > best {
            best = v;
            argmax = k;
        }
    }
    if argmax == 0 || argmax == npts - 1 {
        return Err(Error::RadiusTooSmall { radius, q });
    }
    // Newton polish on the smooth-sampled objective
    let f = |p: f64| q * p - h.value(x, p);
    let mut p = -radius + step * argmax as f64;
    let lo = p - step;
    let hi = p + step;
    let dd = step * 0.25;
    for _ in 0..3 {
        let fp = f(p);
        let fplus = f(p + dd);
        let fminus = f(p - dd);
        let d1 = (fplus - fminus) / (2.0 * dd);
        let d2 = (fplus - 2.0 * fp + fminus) / (dd * dd);
        if !(d2 < -1e-12) {
            break;
        }
        let pn = (p - d1 / d2).clamp(lo, hi);
        if f(pn) >= fp {
            p = pn;
        } else {
            break;
        }
    }
    Ok(best.max(f(p)))
}

/// Batch discrete Legendre transform: for all `qs` (ascending), the max over
/// the p-grid of q p - h(x, p), via the upper envelope of lines. Exact for
/// the discrete family; no polish. Errors if an extreme-slope line is ever
/// optimal (search radius too small for that q).
pub fn legendre_batch(
    h: &KineticHamiltonian,
    x: f64,
    qs: &[f64],
    radius: f64,
) -> Result<Vec<f64>> {
    let step = radius / 400.0;
    let npts = 801usize;
    // lines: value at q is p_k * q + (-h(x, p_k))
    let slopes: Vec<f64> = (0..npts).map(|k| -radius + step * k as f64).collect();
    let intercepts: Vec<f64> = slopes.iter().map(|&p| -h.value(x, p)).collect();

    // upper hull over lines with strictly increasing slopes
    let mut hull: Vec<usize> = Vec::with_capacity(npts);
    for k in 0..npts {
        while hull.len() >= 2 {
            let l1 = hull[hull.len() - 2];
            let l2 = hull[hull.len() - 1];
            // l2 dominated iff intersection(l1,k) lies left of intersection(l1,l2)
            let lhs = (intercepts[l1] - intercepts[k]) * (slopes[l2] - slopes[l1]);
            let rhs = (intercepts[l1] - intercepts[l2]) * (slopes[k] - slopes[l1]);
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }

    let mut out = Vec::with_capacity(qs.len());
    let mut ptr = 0usize;
    for &q in qs {
        while ptr + 1 < hull.len() {
            let a = hull[ptr];
            let b = hull[ptr + 1];
            if slopes[b] * q + intercepts[b] >= slopes[a] * q + intercepts[a] {
                ptr += 1;
            } else {
                break;
            }
        }
        let k = hull[ptr];
        if k == 0 || k == npts - 1 {
            return Err(Error::RadiusTooSmall { radius, q });
        }
        out.push(slopes[k] * q + intercepts[k]);
    }
    Ok(out)
}

/// Coupling law of the system: zeroth-order terms of every component.
#[derive(Clone)]
pub enum CouplingLaw {
    /// H_i = h_i + sum_j lambda[i][j](x) u_j. Requires lambda_ii(x) > 0
    /// (every component strictly increasing). With `monotone` set, the
    /// off-diagonal sign pattern lambda_ij(x) < 0 is validated as well.
    Linear {
        lambda: Vec<Vec<XMap>>,
        monotone: bool,
    },
    /// H_i = h_i + terms[i](x, u_1..u_m) with declared constants.
    Nonlinear {
        terms: Vec<CouplingMap>,
        theta: f64,
        moduli: Vec<f64>,
        classes: Vec<Monotonicity>,
        declared_b: Option<Vec<Vec<f64>>>,
        /// Sampling box certifying the cross-to-self ratio bounds.
        sample_box: f64,
    },
}

impl std::fmt::Debug for CouplingLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CouplingLaw::Linear { monotone, .. } => {
                write!(f, "CouplingLaw::Linear(monotone={monotone})")
            }
            CouplingLaw::Nonlinear { theta, .. } => {
                write!(f, "CouplingLaw::Nonlinear(theta={theta})")
            }
        }
    }
}

pub const DEFAULT_SAMPLE_BOX: f64 = 10.0;

/// An m-component weakly coupled system on a torus grid.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    m: usize,
    kinetic: Vec<KineticHamiltonian>,
    coupling: CouplingLaw,
    rhs: Vec<f64>,
    grid: TorusGrid,
}

pub const MAX_COMPONENTS: usize = 8;

impl SystemSpec {
    pub fn new(
        kinetic: Vec<KineticHamiltonian>,
        coupling: CouplingLaw,
        rhs: Vec<f64>,
        grid: TorusGrid,
    ) -> Result<Self> {
        let m = kinetic.len();
        if m < 2 {
            return Err(Error::InvalidSpec(format!("need m >= 2 components, got {m}")));
        }
        if m > MAX_COMPONENTS {
            return Err(Error::InvalidSpec(format!(
                "at most {MAX_COMPONENTS} components supported, got {m}"
            )));
        }
        if rhs.len() != m {
            return Err(Error::InvalidSpec("rhs length != m".into()));
        }
        match &coupling {
            CouplingLaw::Linear { lambda, monotone } => {
                if lambda.len() != m || lambda.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidSpec("lambda matrix is not m x m".into()));
                }
                for i in 0..m {
                    for k in 0..grid.n() {
                        let x = grid.node(k);
                        let d = lambda[i][i](x);
                        if !(d > 0.0) {
                            return Err(Error::InvalidSpec(format!(
                                "lambda_{{{i}{i}}}({x:.4}) = {d}: diagonal must be positive"
                            )));
                        }
                        if *monotone {
                            for j in 0..m {
                                if j != i && !(lambda[i][j](x) < 0.0) {
                                    return Err(Error::InvalidSpec(format!(
                                        "monotone coupling requires lambda_{{{i}{j}}} < 0, \
                                         got {} at x = {x:.4}",
                                        lambda[i][j](x)
                                    )));
                                }
                            }
                        }
                    }
                }
            }
            CouplingLaw::Nonlinear {
                terms,
                theta,
                moduli,
                classes,
                sample_box,
                ..
            } => {
                if terms.len() != m || moduli.len() != m || classes.len() != m {
                    return Err(Error::InvalidSpec(
                        "nonlinear coupling lists must all have length m".into(),
                    ));
                }
                if !(*theta > 0.0) || !(*sample_box > 0.0) {
                    return Err(Error::InvalidSpec("theta and sample_box must be positive".into()));
                }
                validate_nonlinear(terms, *theta, moduli, classes, *sample_box, grid, m)?;
            }
        }
        Ok(SystemSpec {
            m,
            kinetic,
            coupling,
            rhs,
            grid,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn kinetic(&self, i: usize) -> &KineticHamiltonian {
        &self.kinetic[i]
    }

    pub fn coupling(&self) -> &CouplingLaw {
        &self.coupling
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    pub fn class(&self, i: usize) -> Monotonicity {
        match &self.coupling {
            CouplingLaw::Linear { .. } => Monotonicity::Increasing,
            CouplingLaw::Nonlinear { classes, .. } => classes[i],
        }
    }

    /// Strict monotonicity modulus lambda_ii of component i.
    pub fn modulus(&self, i: usize) -> Result<f64> {
        match &self.coupling {
            CouplingLaw::Linear { lambda, .. } => {
                let mut m = f64::INFINITY;
                for k in 0..self.grid.n() {
                    m = m.min(lambda[i][i](self.grid.node(k)));
                }
                Ok(m)
            }
            CouplingLaw::Nonlinear { moduli, classes, .. } => {
                if classes[i] == Monotonicity::None {
                    return Err(Error::InvalidSpec(format!(
                        "component {i} has no monotonicity modulus"
                    )));
                }
                Ok(moduli[i])
            }
        }
    }

    /// Uniform Lipschitz constant of the zeroth-order terms in u.
    pub fn theta(&self) -> f64 {
        match &self.coupling {
            CouplingLaw::Linear { lambda, .. } => {
                let mut t: f64 = 0.0;
                for i in 0..self.m {
                    for k in 0..self.grid.n() {
                        let x = self.grid.node(k);
                        let row: f64 = (0..self.m).map(|j| lambda[i][j](x).abs()).sum();
                        t = t.max(row);
                    }
                }
                t
            }
            CouplingLaw::Nonlinear { theta, .. } => *theta,
        }
    }

    /// Zeroth-order term of component i at (x, u), rhs included.
    pub fn coupling_value(&self, i: usize, x: f64, u: &[f64]) -> f64 {
        let g = match &self.coupling {
            CouplingLaw::Linear { lambda, .. } => {
                (0..self.m).map(|j| lambda[i][j](x) * u[j]).sum::<f64>()
            }
            CouplingLaw::Nonlinear { terms, .. } => terms[i](x, u),
        };
        g - self.rhs[i]
    }

    /// Full Hamiltonian H_i(x, p, u_1..u_m).
    pub fn hamiltonian_value(&self, i: usize, x: f64, p: f64, u: &[f64]) -> f64 {
        self.kinetic[i].value(x, p) + self.coupling_value(i, x, u)
    }

    /// The constant ℍ_i = max over nodes of |H_i(x, 0, 0, ..., 0)|.
    pub fn h_sup(&self, i: usize) -> f64 {
        let zeros = [0.0; MAX_COMPONENTS];
        let mut m = 0.0f64;
        for k in 0..self.grid.n() {
            let x = self.grid.node(k);
            m = m.max(self.hamiltonian_value(i, x, 0.0, &zeros[..self.m]).abs());
        }
        m
    }
}

fn validate_nonlinear(
    terms: &[CouplingMap],
    theta: f64,
    moduli: &[f64],
    classes: &[Monotonicity],
    sample_box: f64,
    grid: TorusGrid,
    m: usize,
) -> Result<()> {
    let b = sample_box;
    let samples = [-b, -b / 2.0, 0.0, b / 2.0, b];
    let xs: Vec<f64> = (0..8).map(|k| grid.node(k * grid.n() / 8)).collect();
    let tol = 1e-9 * (1.0 + theta);
    for i in 0..m {
        for &x in &xs {
            for arg in 0..m {
                for &base in &samples {
                    for &a in &samples {
                        for &c in &samples {
                            if a == c {
                                continue;
                            }
                            let mut ua = [0.0; MAX_COMPONENTS];
                            let mut uc = [0.0; MAX_COMPONENTS];
                            for slot in 0..m {
                                ua[slot] = base;
                                uc[slot] = base;
                            }
                            ua[arg] = a;
                            uc[arg] = c;
                            let ga = terms[i](x, &ua[..m]);
                            let gc = terms[i](x, &uc[..m]);
                            let quot = (ga - gc) / (a - c);
                            if quot.abs() > theta + tol {
                                return Err(Error::InvalidSpec(format!(
                                    "declared Theta = {theta} does not dominate sampled \
                                     difference quotient {quot:.4} of g_{i} in u_{arg}"
                                )));
                            }
                            if arg == i {
                                match classes[i] {
                                    Monotonicity::Increasing => {
                                        if quot < moduli[i] - tol {
                                            return Err(Error::InvalidSpec(format!(
                                                "component {i} declared increasing with modulus \
                                                 {} but sampled quotient is {quot:.4}",
                                                moduli[i]
                                            )));
                                        }
                                    }
                                    Monotonicity::Decreasing => {
                                        if quot > -moduli[i] + tol {
                                            return Err(Error::InvalidSpec(format!(
                                                "component {i} declared decreasing with modulus \
                                                 {} but sampled quotient is {quot:.4}",
                                                moduli[i]
                                            )));
                                        }
                                    }
                                    Monotonicity::None => {}
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Cross/self monotonicity ratios b_ij. Linear case: exact node-wise max of
/// |lambda_ij / lambda_ii|. Nonlinear case: sampled ratio bound over the
/// configured box; a declared matrix wins, with a warning on disagreement.
pub fn coupling_constants(spec: &SystemSpec) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let m = spec.m();
    let grid = spec.grid();
    let mut b = vec![vec![0.0; m]; m];
    let mut warnings = Vec::new();
    match spec.coupling() {
        CouplingLaw::Linear { lambda, .. } => {
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let mut worst = 0.0f64;
                    for k in 0..grid.n() {
                        let x = grid.node(k);
                        let d = lambda[i][i](x);
                        if d.abs() < 1e-14 {
                            return Err(Error::LambdaVanishes { x });
                        }
                        worst = worst.max((lambda[i][j](x) / d).abs());
                    }
                    b[i][j] = worst;
                }
            }
        }
        CouplingLaw::Nonlinear {
            terms,
            declared_b,
            sample_box,
            ..
        } => {
            let bx = *sample_box;
            let samples = [-bx, -bx / 2.0, -bx / 5.0, bx / 5.0, bx / 2.0, bx];
            let xs: Vec<f64> = (0..grid.n()).step_by((grid.n() / 16).max(1)).map(|k| grid.node(k)).collect();
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let mut worst = 0.0f64;
                    for &x in &xs {
                        for &uj in &samples {
                            for &vj in &samples {
                                if uj == vj {
                                    continue;
                                }
                                // numerator quotient in the j-slot at u_i = 0
                                let mut a = [0.0; MAX_COMPONENTS];
                                let mut c = [0.0; MAX_COMPONENTS];
                                a[j] = uj;
                                c[j] = vj;
                                let num =
                                    (terms[i](x, &a[..m]) - terms[i](x, &c[..m])) / (uj - vj);
                                for &ui in &samples {
                                    for &vi in &samples {
                                        if ui == vi {
                                            continue;
                                        }
                                        for &vslot in &[-bx, 0.0, bx] {
                                            let mut p = [0.0; MAX_COMPONENTS];
                                            let mut q = [0.0; MAX_COMPONENTS];
                                            for slot in 0..m {
                                                if slot != i {
                                                    p[slot] = vslot;
                                                    q[slot] = vslot;
                                                }
                                            }
                                            p[i] = ui;
                                            q[i] = vi;
                                            let den = (terms[i](x, &p[..m])
                                                - terms[i](x, &q[..m]))
                                                / (ui - vi);
                                            if den.abs() > 1e-12 {
                                                worst = worst.max((num / den).abs());
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    b[i][j] = worst;
                }
            }
            if let Some(decl) = declared_b {
                for i in 0..m {
                    for j in 0..m {
                        if i != j && b[i][j] > decl[i][j] * (1.0 + 1e-6) {
                            warnings.push(format!(
                                "declared b_{{{i}{j}}} = {} but sampling found {:.4}; \
                                 using the declared value",
                                decl[i][j], b[i][j]
                            ));
                        }
                    }
                }
                b = decl.clone();
            }
        }
    }
    Ok((b, warnings))
}

/// Maximum cycle product of b over distinct intermediate indices; the
/// coupling-strength constant. For m = 2 this is b_12 b_21.
pub fn chi_from_matrix(b: &[Vec<f64>]) -> f64 {
    let (product, _) = worst_cycle(b);
    product
}

pub fn chi(spec: &SystemSpec) -> Result<f64> {
    let (b, _) = coupling_constants(spec)?;
    Ok(chi_from_matrix(&b))
}

/// Enumerates every cycle q -> a_1 -> ... -> a_l -> q with distinct a_i drawn
/// from the complement of {q}; returns the max product and the maximizing
/// cycle (q first).
pub fn worst_cycle(b: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let m = b.len();
    let mut best = 0.0f64;
    let mut best_cycle = Vec::new();
    let mut stack = Vec::new();
    for q in 0..m {
        let mut used = vec![false; m];
        used[q] = true;
        dfs(b, q, q, 1.0, &mut used, &mut stack, &mut best, &mut best_cycle);
    }
    (best, best_cycle)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    b: &[Vec<f64>],
    q: usize,
    last: usize,
    prod: f64,
    used: &mut [bool],
    stack: &mut Vec<usize>,
    best: &mut f64,
    best_cycle: &mut Vec<usize>,
) {
    let m = b.len();
    for a in 0..m {
        if used[a] {
            continue;
        }
        let p = prod * b[last][a];
        stack.push(a);
        // closing the cycle here
        let closed = p * b[a][q];
        if !stack.is_empty() && closed > *best {
            *best = closed;
            best_cycle.clear();
            best_cycle.push(q);
            best_cycle.extend_from_slice(stack);
        }
        used[a] = true;
        dfs(b, q, a, p, used, stack, best, best_cycle);
        used[a] = false;
        stack.pop();
    }
}

/// Result of the chain condition check for m >= 2 systems.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub holds: bool,
    pub worst_product: f64,
    /// Maximizing cycle, starting index first.
    pub worst_cycle: Vec<usize>,
}

/// True iff every cycle product over distinct intermediate indices is < 1.
pub fn check_chain_condition(spec: &SystemSpec) -> Result<ChainReport> {
    let (b, _) = coupling_constants(spec)?;
    let (worst_product, worst_cycle) = worst_cycle(&b);
    Ok(ChainReport {
        holds: worst_product < 1.0,
        worst_product,
        worst_cycle,
    })
}

/// All derived constants of the iteration bounds.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsLedger {
    /// ℍ_i = max over nodes of |H_i(x, 0, ..., 0)|.
    pub h_sup: Vec<f64>,
    /// Uniform u-Lipschitz constant Θ.
    pub theta: f64,
    /// Strict monotonicity moduli λ_ii.
    pub modulus: Vec<f64>,
    /// Ratio matrix b_ij (diagonal zero).
    pub b: Vec<Vec<f64>>,
    /// Radius of the velocity ball on which the Lagrangian bound C holds.
    pub delta: f64,
    /// C = max over nodes and |q| <= delta of L_i(x, q, 0, 0).
    pub lagrangian_bound: f64,
    /// mu = diam(M) / delta, with diam of the circle = length / 2.
    pub mu: f64,
    /// A = Θ mu e^{Θ mu}.
    pub a_const: f64,
    /// B = C mu e^{Θ mu}.
    pub b_const: f64,
    /// b̄_ij = (1 + A) b_ij + A (diagonal zero).
    pub b_bar: Vec<Vec<f64>>,
    /// κ = b_12 b_21.
    pub kappa: f64,
    /// κ̄ = b̄_12 b̄_21.
    pub kappa_bar: f64,
    /// κ̃ = b_12 b̄_21.
    pub kappa_tilde: f64,
    /// Max cycle product (equals κ when m = 2).
    pub chi: f64,
    pub warnings: Vec<String>,
}

const DELTA_MENU_DEPTH: u32 = 9; // 2^0 .. 2^-8
const LAGRANGIAN_CAP: f64 = 1e6;

/// Assembles the full ledger. The velocity radius delta is the largest entry
/// of the dyadic menu {1, 1/2, ..., 2^-8} for which the Lagrangian bound C is
/// finite and at most 1e6.
pub fn bounds_ledger(spec: &SystemSpec) -> Result<BoundsLedger> {
    let m = spec.m();
    let grid = spec.grid();
    let (b, warnings) = coupling_constants(spec)?;
    let theta = spec.theta();
    let mut h_sup = Vec::with_capacity(m);
    let mut modulus = Vec::with_capacity(m);
    for i in 0..m {
        h_sup.push(spec.h_sup(i));
        modulus.push(spec.modulus(i)?);
    }

    let zeros = [0.0; MAX_COMPONENTS];
    let mut chosen: Option<(f64, f64)> = None;
    'menu: for k in 0..DELTA_MENU_DEPTH {
        let delta = 0.5f64.powi(k as i32);
        let mut c_delta = f64::NEG_INFINITY;
        for i in 0..m {
            let zero_order = |x: f64| spec.coupling_value(i, x, &zeros[..m]);
            for node in 0..grid.n() {
                let x = grid.node(node);
                for jq in 0..33 {
                    let q = -delta + 2.0 * delta * jq as f64 / 32.0;
                    let mut radius = spec.kinetic(i).p_bound_hint().max(2.0 * delta);
                    let mut val = None;
                    for _ in 0..5 {
                        match legendre(spec.kinetic(i), x, q, radius) {
                            Ok(v) => {
                                val = Some(v);
                                break;
                            }
                            Err(Error::RadiusTooSmall { .. }) => radius *= 2.0,
                            Err(e) => return Err(e),
                        }
                    }
                    match val {
                        Some(v) => c_delta = c_delta.max(v - zero_order(x)),
                        // sup not attained within any radius: this delta is
                        // outside the finite domain of the Lagrangian
                        None => continue 'menu,
                    }
                }
            }
        }
        if c_delta.is_finite() && c_delta <= LAGRANGIAN_CAP {
            chosen = Some((delta, c_delta));
            break;
        }
    }
    let (delta, c_bound) = chosen.ok_or(Error::LagrangianUnbounded)?;

    let mu = grid.diameter() / delta;
    let a_const = theta * mu * (theta * mu).exp();
    let b_const = c_bound * mu * (theta * mu).exp();
    let mut b_bar = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                b_bar[i][j] = (1.0 + a_const) * b[i][j] + a_const;
            }
        }
    }
    let kappa = b[0][1] * b[1][0];
    let kappa_bar = b_bar[0][1] * b_bar[1][0];
    let kappa_tilde = b[0][1] * b_bar[1][0];
    let chi = chi_from_matrix(&b);

    Ok(BoundsLedger {
        h_sup,
        theta,
        modulus,
        b,
        delta,
        lagrangian_bound: c_bound,
        mu,
        a_const,
        b_const,
        b_bar,
        kappa,
        kappa_bar,
        kappa_tilde,
        chi,
        warnings,
    })
}

/// Sampled superlinearity indicator: min over x of h(x, p)/|p| at growing
/// radii. Superlinear Hamiltonians show strictly increasing ratios; merely
/// coercive ones (like |p|) level off. Diagnostic only.
pub fn superlinearity_diagnostic(
    h: &KineticHamiltonian,
    domain_length: f64,
) -> (bool, Vec<(f64, f64)>) {
    let mut samples = Vec::new();
    for factor in [1.0, 2.0, 4.0, 8.0] {
        let r = h.p_bound_hint() * factor;
        let worst = (0..X_SAMPLES)
            .map(|k| {
                let x = k as f64 * domain_length / X_SAMPLES as f64;
                h.value(x, r).min(h.value(x, -r)) / r
            })
            .fold(f64::INFINITY, f64::min);
        samples.push((r, worst));
    }
    let increasing = samples.windows(2).all(|w| w[1].1 > w[0].1 * 1.05);
    (increasing, samples)
}

/// Feasibility of the three structural inequalities over the dyadic menu of
/// velocity radii. For each admissible delta the constants (C, mu, A) are
/// recomputed; an entry records the largest delta making the inequality
/// hold, if any.
#[derive(Debug, Clone, Serialize)]
pub struct CaseFeasibility {
    /// b_12 b_21 < 1; delta-independent.
    pub case_a: bool,
    /// ((1+A) b_12 + A)((1+A) b_21 + A) < 1 at the recorded delta.
    pub case_b_delta: Option<f64>,
    /// b_12 ((1+A) b_21 + A) < 1 at the recorded delta.
    pub case_c_delta: Option<f64>,
    /// Per-menu-entry (delta, A).
    pub menu: Vec<(f64, f64)>,
}

/// Scans an extended dyadic menu for an amplification A making the
/// decreasing-case inequalities feasible. A = Theta mu e^{Theta mu} shrinks
/// as delta grows (mu = diam/delta), so superlinear kinetic parts, whose
/// Lagrangian bound stays finite at every radius, admit large delta and
/// recover feasibility whenever b_12 b_21 < 1; merely coercive ones are
/// capped at the radius where the bound blows up.
pub fn case_feasibility(spec: &SystemSpec) -> Result<CaseFeasibility> {
    if spec.m() != 2 {
        return Err(Error::TwoComponentOnly { m: spec.m() });
    }
    let (b, _) = coupling_constants(spec)?;
    let theta = spec.theta();
    let grid = spec.grid();
    let zeros = [0.0; MAX_COMPONENTS];
    let mut menu = Vec::new();
    let mut case_b_delta = None;
    let mut case_c_delta = None;
    for k in -8i32..(DELTA_MENU_DEPTH as i32) {
        let delta = 0.5f64.powi(k);
        // C at this delta, when finite
        let mut c_delta = f64::NEG_INFINITY;
        let mut feasible = true;
        'outer: for i in 0..2 {
            for node in (0..grid.n()).step_by((grid.n() / 32).max(1)) {
                let x = grid.node(node);
                for jq in 0..9 {
                    let q = -delta + 2.0 * delta * jq as f64 / 8.0;
                    let mut radius = spec.kinetic(i).p_bound_hint().max(2.0 * delta);
                    let mut ok = false;
                    for _ in 0..5 {
                        match legendre(spec.kinetic(i), x, q, radius) {
                            Ok(v) => {
                                let zero_order = spec.coupling_value(i, x, &zeros[..2]);
                                c_delta = c_delta.max(v - zero_order);
                                ok = true;
                                break;
                            }
                            Err(Error::RadiusTooSmall { .. }) => radius *= 2.0,
                            Err(e) => return Err(e),
                        }
                    }
                    if !ok {
                        feasible = false;
                        break 'outer;
                    }
                }
            }
        }
        if !feasible || !(c_delta.is_finite() && c_delta <= LAGRANGIAN_CAP) {
            continue;
        }
        let mu = grid.diameter() / delta;
        let a = theta * mu * (theta * mu).exp();
        menu.push((delta, a));
        let bb12 = (1.0 + a) * b[0][1] + a;
        let bb21 = (1.0 + a) * b[1][0] + a;
        if bb12 * bb21 < 1.0 && case_b_delta.is_none() {
            case_b_delta = Some(delta);
        }
        if b[0][1] * bb21 < 1.0 && case_c_delta.is_none() {
            case_c_delta = Some(delta);
        }
    }
    Ok(CaseFeasibility {
        case_a: b[0][1] * b[1][0] < 1.0,
        case_b_delta,
        case_c_delta,
        menu,
    })
}

/// Which pair of monotonicity classes the alternating iteration runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IterationCase {
    /// Both components increasing.
    A,
    /// Both components decreasing.
    B,
    /// Component 1 increasing, component 2 decreasing.
    C,
    /// More than two components.
    MGeneral,
}

fn geom_sum(r: f64, upto: isize) -> f64 {
    if upto < 0 {
        return 0.0;
    }
    let mut s = 0.0;
    let mut t = 1.0;
    for _ in 0..=upto {
        s += t;
        t *= r;
    }
    s
}

/// Finite geometric-sum sup-norm bound for the alternating iteration.
/// Component 0 bounds ‖u_1^n‖, component 1 bounds ‖u_2^{n+1}‖, with the empty
/// sum convention for n = 0. Only stated for two-component systems.
pub fn predicted_sup_bound(
    ledger: &BoundsLedger,
    n: usize,
    case: IterationCase,
    component: usize,
) -> Result<f64> {
    if ledger.h_sup.len() != 2 {
        return Err(Error::TwoComponentOnly {
            m: ledger.h_sup.len(),
        });
    }
    if component > 1 {
        return Err(Error::InvalidSpec(format!("component index {component} out of range")));
    }
    let n = n as isize;
    let r1 = ledger.h_sup[0] / ledger.modulus[0];
    let r2 = ledger.h_sup[1] / ledger.modulus[1];
    let a = ledger.a_const;
    let bc = ledger.b_const;
    let b12 = ledger.b[0][1];
    let b21 = ledger.b[1][0];
    let bb12 = ledger.b_bar[0][1];
    let bb21 = ledger.b_bar[1][0];
    let v = match case {
        IterationCase::A => {
            let k = ledger.kappa;
            match component {
                0 => r1 * geom_sum(k, n) + b12 * r2 * geom_sum(k, n - 1),
                _ => r2 * geom_sum(k, n) + b21 * r1 * geom_sum(k, n),
            }
        }
        IterationCase::B => {
            let k = ledger.kappa_bar;
            match component {
                0 => {
                    (1.0 + a) * r1 * geom_sum(k, n)
                        + bb12 * (1.0 + a) * r2 * geom_sum(k, n - 1)
                        + (geom_sum(k, n) + bb12 * geom_sum(k, n - 1)) * bc
                }
                _ => {
                    (1.0 + a) * r2 * geom_sum(k, n)
                        + bb21 * (1.0 + a) * r1 * geom_sum(k, n)
                        + (geom_sum(k, n) + bb21 * geom_sum(k, n)) * bc
                }
            }
        }
        IterationCase::C => {
            let k = ledger.kappa_tilde;
            match component {
                0 => {
                    r1 * geom_sum(k, n)
                        + b12 * (1.0 + a) * r2 * geom_sum(k, n - 1)
                        + b12 * bc * geom_sum(k, n - 1)
                }
                _ => {
                    (1.0 + a) * r2 * geom_sum(k, n)
                        + bb21 * r1 * geom_sum(k, n)
                        + bc * geom_sum(k, n)
                }
            }
        }
        IterationCase::MGeneral => {
            return Err(Error::TwoComponentOnly { m: 3 });
        }
    };
    Ok(v)
}
