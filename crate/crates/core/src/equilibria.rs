//! Spatially homogeneous equilibria.
//!
//! The uninfected state is `(Lambda, 0, 0)`. The infected state is found by
//! reducing the steady-state system to one scalar equation in `H`:
//! summing the H and I equations gives `I = (lambda - d H) / alpha`, and the
//! I and V equations give `V = gamma I / mu`. What remains is `psi(H) = 0`,
//! where `psi` is strictly increasing on `[0, Lambda]` when `gamma > 0`,
//! negative at 0 and of the sign of `R0 - 1` at `Lambda`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{basic_reproduction_number, incidence_unchecked, reaction_unchecked, ModelParams, PointState};

/// Relative bracket width at which bisection stops.
pub const DEFAULT_ROOT_TOL: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;
/// Residual bound for `reaction(E*)`, relative to [`residual_scale`].
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn uninfected_equilibrium(p: &ModelParams) -> PointState {
    PointState::new(p.healthy_capacity(), 0.0, 0.0)
}

/// I and V on the steady-state manifold, as functions of H.
pub fn back_substitute(p: &ModelParams, h: f64) -> PointState {
    let i = (p.production - p.healthy_death * h) / p.infected_death;
    let v = p.net_yield() * i / p.clearance;
    PointState::new(h, i, v)
}

/// Scalar equilibrium function whose root in `(0, Lambda)` is `H*`.
pub fn psi(p: &ModelParams, x: f64) -> Result<f64> {
    let cap = p.healthy_capacity();
    if !(0.0..=cap).contains(&x) {
        return Err(Error::Domain(format!("psi is defined on [0, {cap}], got {x}")));
    }
    Ok(psi_unchecked(p, x))
}

fn psi_unchecked(p: &ModelParams, x: f64) -> f64 {
    let s = back_substitute(p, x);
    let [a0, a1, a2, a3] = p.saturation;
    let infectivity = p.transmission * x / (a0 + a1 * x + a2 * s.v + a3 * x * s.v);
    (1.0 - p.infection_block) * p.net_yield() * infectivity - p.infected_removal() * p.clearance
}

/// Why no infected equilibrium was returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Absence {
    /// `R0 <= 1`.
    BelowThreshold { r0: f64 },
    /// `gamma <= 0`: infected cells produce no net virions.
    NonPositiveNetYield { gamma: f64 },
}

impl fmt::Display for Absence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Absence::BelowThreshold { r0 } => write!(f, "R0={r0} <= 1"),
            Absence::NonPositiveNetYield { gamma } => write!(f, "gamma={gamma} <= 0"),
        }
    }
}

/// A located infected equilibrium and its residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfectedEquilibrium {
    pub state: PointState,
    pub psi_residual: f64,
    pub reaction_residual: f64,
    pub scale: f64,
    pub bisections: usize,
}

/// Scale making residual tolerances dimension-aware:
/// `max(lambda, (alpha+rho) I*, mu V*)`.
pub fn residual_scale(p: &ModelParams, s: PointState) -> f64 {
    p.production
        .max(p.infected_removal() * s.i.abs())
        .max(p.clearance * s.v.abs())
}

/// Locates `E*` by bisection on `psi` over `[0, Lambda]`.
///
/// `tol` is the relative bracket width (times `Lambda`) at which bisection
/// stops. Returns `Ok(Err(reason))` when no infected equilibrium exists.
pub fn infected_equilibrium(p: &ModelParams, tol: f64) -> Result<std::result::Result<InfectedEquilibrium, Absence>> {
    let gamma = p.net_yield();
    let r0 = basic_reproduction_number(p);
    if r0 <= 1.0 {
        return Ok(Err(Absence::BelowThreshold { r0 }));
    }
    if gamma <= 0.0 {
        return Ok(Err(Absence::NonPositiveNetYield { gamma }));
    }

    let cap = p.healthy_capacity();
    let (mut lo, mut hi) = (0.0, cap);
    let width_target = tol * cap;
    let mut iterations = 0;
    while hi - lo > width_target {
        if iterations == MAX_BISECTIONS {
            return Err(Error::RootNotConverged {
                iterations,
                width: hi - lo,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket is down to adjacent floats
            break;
        }
        if psi_unchecked(p, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let h = 0.5 * (lo + hi);
    let state = back_substitute(p, h);
    let scale = residual_scale(p, state);
    let reaction_residual = reaction_unchecked(p, state).sup_norm();
    if reaction_residual > RESIDUAL_TOL * scale {
        return Err(Error::ResidualTooLarge {
            residual: reaction_residual,
            limit: RESIDUAL_TOL * scale,
        });
    }
    Ok(Ok(InfectedEquilibrium {
        state,
        psi_residual: psi_unchecked(p, h).abs(),
        reaction_residual,
        scale,
        bisections: iterations,
    }))
}

/// Both homogeneous equilibria of one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub uninfected: PointState,
    pub infected: Option<InfectedEquilibrium>,
    pub absence: Option<Absence>,
    pub gamma: f64,
}

impl EquilibriumReport {
    pub fn compute(p: &ModelParams) -> Result<Self> {
        let located = infected_equilibrium(p, DEFAULT_ROOT_TOL)?;
        let (infected, absence) = match located {
            Ok(e) => (Some(e), None),
            Err(a) => (None, Some(a)),
        };
        Ok(Self {
            uninfected: uninfected_equilibrium(p),
            infected,
            absence,
            gamma: p.net_yield(),
        })
    }

    pub fn infected_state(&self) -> Option<PointState> {
        self.infected.map(|e| e.state)
    }

    /// Flat `key=value` lines for run reports. Floats use the shortest
    /// representation that round-trips.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("E0.H".to_string(), self.uninfected.h.to_string()),
            ("E0.I".to_string(), self.uninfected.i.to_string()),
            ("E0.V".to_string(), self.uninfected.v.to_string()),
            ("gamma".to_string(), self.gamma.to_string()),
            ("Estar.exists".to_string(), self.infected.is_some().to_string()),
        ];
        match (&self.infected, &self.absence) {
            (Some(e), _) => {
                out.push(("Estar.H".into(), e.state.h.to_string()));
                out.push(("Estar.I".into(), e.state.i.to_string()));
                out.push(("Estar.V".into(), e.state.v.to_string()));
                out.push(("Estar.psi_residual".into(), e.psi_residual.to_string()));
                out.push(("Estar.reaction_residual".into(), e.reaction_residual.to_string()));
                out.push(("Estar.residual_scale".into(), e.scale.to_string()));
            }
            (None, Some(a)) => out.push(("Estar.absent_reason".into(), a.to_string())),
            (None, None) => {}
        }
        out
    }
}

/// `incidence(E*) - (alpha+rho) I*`, the I-equation residual at a candidate.
pub fn infection_balance(p: &ModelParams, s: PointState) -> f64 {
    incidence_unchecked(p, s.h, s.v) - p.infected_removal() * s.i
}
