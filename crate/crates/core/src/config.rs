//! JSON system descriptions.
//!
//! A config file carries a grid block plus either a weakly coupled system
//! (component list and coupling law) or a two-component critical family,
//! or both:
//!
//! ```json
//! {
//!   "grid": { "n": 256, "length": 6.283185307179586 },
//!   "components": [
//!     { "kinetic": { "kind": "quadratic" } },
//!     { "kinetic": { "kind": "quadratic_plus_potential", "potential": "sin(x)" } }
//!   ],
//!   "coupling": { "kind": "linear", "matrix": [["1", "-0.4"], ["-0.4", "1"]],
//!                 "monotone": true },
//!   "rhs": [0.0, 0.0],
//!   "critical": { "h1": { "kind": "quadratic" }, "h2": { "kind": "quadratic" },
//!                 "lambda1": "1", "lambda2": "1" }
//! }
//! ```
//!
//! Kinetic kinds: `quadratic` (p^2), `quadratic_plus_potential` (p^2 + V(x)
//! with V an expression in x), `custom` (an expression in x and p, with an
//! explicit `p_bound_hint`). Matrix entries and lambda weights are
//! expressions in x; nonlinear coupling terms are expressions in x, u1..um.

use crate::critical::DiscountedFamily;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::TorusGrid;
use crate::hamiltonian::{
    CouplingLaw, KineticHamiltonian, Monotonicity, SystemSpec, XMap, DEFAULT_SAMPLE_BOX,
    MAX_COMPONENTS,
};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
pub struct ConfigFile {
    pub grid: GridCfg,
    #[serde(default)]
    pub components: Option<Vec<ComponentCfg>>,
    #[serde(default)]
    pub coupling: Option<CouplingCfg>,
    #[serde(default)]
    pub rhs: Option<Vec<f64>>,
    /// Initial data for evolution commands, one expression in x per
    /// component; zeros when absent.
    #[serde(default)]
    pub initial: Option<Vec<String>>,
    #[serde(default)]
    pub critical: Option<CriticalCfg>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridCfg {
    pub n: usize,
    #[serde(default)]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ComponentCfg {
    pub kinetic: KineticCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticCfg {
    Quadratic,
    QuadraticPlusPotential {
        potential: String,
    },
    Custom {
        expression: String,
        p_bound_hint: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingCfg {
    Linear {
        matrix: Vec<Vec<String>>,
        #[serde(default)]
        monotone: bool,
    },
    Nonlinear {
        terms: Vec<String>,
        theta: f64,
        lambda: Vec<f64>,
        monotonicity: Vec<String>,
        #[serde(default)]
        b: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        sample_box: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
pub struct CriticalCfg {
    pub h1: KineticCfg,
    pub h2: KineticCfg,
    pub lambda1: String,
    pub lambda2: String,
}

impl ConfigFile {
    pub fn parse_str(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn grid(&self, n_override: Option<usize>) -> Result<TorusGrid> {
        let n = n_override.unwrap_or(self.grid.n);
        let length = self.grid.length.unwrap_or(std::f64::consts::TAU);
        TorusGrid::new(n, length)
    }

    /// Builds the weakly coupled system described by the component list.
    pub fn build_system(&self, n_override: Option<usize>) -> Result<SystemSpec> {
        let grid = self.grid(n_override)?;
        let comps = self
            .components
            .as_ref()
            .ok_or_else(|| Error::Config("config has no `components` section".into()))?;
        let coupling_cfg = self
            .coupling
            .as_ref()
            .ok_or_else(|| Error::Config("config has no `coupling` section".into()))?;
        let m = comps.len();
        let kinetic = comps
            .iter()
            .map(|c| build_kinetic(&c.kinetic, grid.length()))
            .collect::<Result<Vec<_>>>()?;
        let coupling = build_coupling(coupling_cfg, m)?;
        let rhs = match &self.rhs {
            Some(r) => r.clone(),
            None => vec![0.0; m],
        };
        SystemSpec::new(kinetic, coupling, rhs, grid)
    }

    /// Initial data fields for evolution commands (zeros when the config
    /// has no `initial` block).
    pub fn build_initial(&self, spec: &SystemSpec) -> Result<Vec<crate::geometry::GridField>> {
        use crate::geometry::GridField;
        match &self.initial {
            None => Ok((0..spec.m()).map(|_| GridField::zeros(spec.grid())).collect()),
            Some(exprs) => {
                if exprs.len() != spec.m() {
                    return Err(Error::Config("initial data count != m".into()));
                }
                exprs
                    .iter()
                    .map(|src| {
                        let e = Expr::parse(src, &["x"])?;
                        GridField::sample(spec.grid(), |x| e.eval(&[x]))
                    })
                    .collect()
            }
        }
    }

    /// Builds the critical family from the `critical` block.
    pub fn build_family(&self, n_override: Option<usize>) -> Result<DiscountedFamily> {
        let grid = self.grid(n_override)?;
        let cfg = self
            .critical
            .as_ref()
            .ok_or_else(|| Error::Config("config has no `critical` section".into()))?;
        DiscountedFamily::new(
            build_kinetic(&cfg.h1, grid.length())?,
            build_kinetic(&cfg.h2, grid.length())?,
            compile_xmap(&cfg.lambda1)?,
            compile_xmap(&cfg.lambda2)?,
            grid,
        )
    }
}

fn compile_xmap(src: &str) -> Result<XMap> {
    let e = Expr::parse(src, &["x"])?;
    Ok(Arc::new(move |x| e.eval(&[x])))
}

fn build_kinetic(cfg: &KineticCfg, length: f64) -> Result<KineticHamiltonian> {
    match cfg {
        KineticCfg::Quadratic => Ok(KineticHamiltonian::quadratic(length)),
        KineticCfg::QuadraticPlusPotential { potential } => {
            let e = Expr::parse(potential, &["x"])?;
            KineticHamiltonian::quadratic_with_potential(move |x| e.eval(&[x]), length)
        }
        KineticCfg::Custom {
            expression,
            p_bound_hint,
        } => {
            let e = Expr::parse(expression, &["x", "p"])?;
            KineticHamiltonian::new(move |x, p| e.eval(&[x, p]), *p_bound_hint, length)
        }
    }
}

fn build_coupling(cfg: &CouplingCfg, m: usize) -> Result<CouplingLaw> {
    match cfg {
        CouplingCfg::Linear { matrix, monotone } => {
            if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
                return Err(Error::Config("coupling matrix is not m x m".into()));
            }
            let mut lambda = Vec::with_capacity(m);
            for row in matrix {
                let mut lrow: Vec<XMap> = Vec::with_capacity(m);
                for entry in row {
                    lrow.push(compile_xmap(entry)?);
                }
                lambda.push(lrow);
            }
            Ok(CouplingLaw::Linear {
                lambda,
                monotone: *monotone,
            })
        }
        CouplingCfg::Nonlinear {
            terms,
            theta,
            lambda,
            monotonicity,
            b,
            sample_box,
        } => {
            if terms.len() != m || lambda.len() != m || monotonicity.len() != m {
                return Err(Error::Config(
                    "nonlinear coupling lists must all have length m".into(),
                ));
            }
            if m > MAX_COMPONENTS {
                return Err(Error::Config(format!("at most {MAX_COMPONENTS} components")));
            }
            let mut vars: Vec<String> = vec!["x".into()];
            for i in 1..=m {
                vars.push(format!("u{i}"));
            }
            let var_refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
            let compiled = terms
                .iter()
                .map(|t| Expr::parse(t, &var_refs))
                .collect::<Result<Vec<_>>>()?;
            let gs = compiled
                .into_iter()
                .map(|e| {
                    let f: crate::hamiltonian::CouplingMap = Arc::new(move |x, u: &[f64]| {
                        let mut buf = [0.0; MAX_COMPONENTS + 1];
                        buf[0] = x;
                        buf[1..=u.len()].copy_from_slice(u);
                        e.eval(&buf[..=u.len()])
                    });
                    f
                })
                .collect();
            let classes = monotonicity
                .iter()
                .map(|s| match s.as_str() {
                    "increasing" => Ok(Monotonicity::Increasing),
                    "decreasing" => Ok(Monotonicity::Decreasing),
                    "none" => Ok(Monotonicity::None),
                    other => Err(Error::Config(format!(
                        "monotonicity must be increasing|decreasing|none, got `{other}`"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CouplingLaw::Nonlinear {
                terms: gs,
                theta: *theta,
                moduli: lambda.clone(),
                classes,
                declared_b: b.clone(),
                sample_box: sample_box.unwrap_or(DEFAULT_SAMPLE_BOX),
            })
        }
    }
}
