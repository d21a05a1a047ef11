//! Runtime monitors attached to [`solver::run`](crate::solver::run).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lyapunov;
use crate::model::{ModelParams, PointState};
use crate::solver::{comparison_bounds, FieldState, Monitor, MonitorContext, MonitorSample};

/// Relative slack on the a-priori bounds `Hm`, `Vm`.
pub const BOUND_REL_TOL: f64 = 1e-6;
/// Absolute slack on the comparison envelopes.
pub const ENVELOPE_ABS_TOL: f64 = 1e-6;
/// Positivity floor relative to `max(Hm, Vm)`.
pub const POSITIVITY_REL_TOL: f64 = 1e-9;

fn bound_scale(ctx: &MonitorContext<'_>) -> f64 {
    ctx.derived.cells_bound.max(ctx.derived.virions_bound)
}

/// Smallest nodal value; flags anything below `-1e-9 max(Hm, Vm)`.
#[derive(Debug, Default)]
pub struct Positivity;

impl Monitor for Positivity {
    fn name(&self) -> &str {
        "positivity"
    }

    fn columns(&self) -> Vec<String> {
        vec!["min_value".into()]
    }

    fn observe(&mut self, s: &FieldState, ctx: &MonitorContext<'_>) -> MonitorSample {
        let min = s.min_value();
        let floor = -POSITIVITY_REL_TOL * bound_scale(ctx);
        MonitorSample {
            values: vec![min],
            violation: (min < floor).then(|| format!("min value {min:e} below {floor:e}")),
        }
    }
}

/// Membership of every node in the invariant box, with `H + I <= Hm` as
/// the cell bound.
#[derive(Debug, Default)]
pub struct InvariantRegion;

impl Monitor for InvariantRegion {
    fn name(&self) -> &str {
        "sigma"
    }

    fn columns(&self) -> Vec<String> {
        vec!["sigma_ok".into()]
    }

    fn observe(&mut self, s: &FieldState, ctx: &MonitorContext<'_>) -> MonitorSample {
        let dq = ctx.derived;
        let floor = -POSITIVITY_REL_TOL * bound_scale(ctx);
        let cells_cap = dq.cells_bound * (1.0 + BOUND_REL_TOL);
        let virions_cap = dq.virions_bound * (1.0 + BOUND_REL_TOL);
        let offender = s
            .points()
            .position(|q| q.h < floor || q.i < floor || q.v < floor || q.h + q.i > cells_cap || q.v > virions_cap);
        MonitorSample {
            values: vec![if offender.is_none() { 1.0 } else { 0.0 }],
            violation: offender.map(|k| format!("node {k} outside the invariant region: {:?}", s.point(k))),
        }
    }
}

/// Comparison envelopes `S(t)`, `V(t)` against `max_x (H + I)`, `max_x V`.
#[derive(Debug, Default)]
pub struct ComparisonEnvelope;

impl Monitor for ComparisonEnvelope {
    fn name(&self) -> &str {
        "comparison"
    }

    fn columns(&self) -> Vec<String> {
        ["Sbar", "Vbar", "max_cells", "max_virions"].map(String::from).to_vec()
    }

    fn observe(&mut self, s: &FieldState, ctx: &MonitorContext<'_>) -> MonitorSample {
        let (sbar, vbar) = comparison_bounds(
            ctx.params,
            ctx.derived,
            ctx.initial.cells_max,
            ctx.initial.virions_max,
            s.t,
        );
        let (cells, virions) = s.maxima();
        let violation = if cells > sbar + ENVELOPE_ABS_TOL {
            Some(format!("max(H+I)={cells} exceeds Sbar={sbar}"))
        } else if virions > vbar + ENVELOPE_ABS_TOL {
            Some(format!("max V={virions} exceeds Vbar={vbar}"))
        } else {
            None
        };
        MonitorSample {
            values: vec![sbar, vbar, cells, virions],
            violation,
        }
    }
}

/// `L1` always; `L2` when the restricted family applies, `E*` is known
/// and every nodal value exceeds `1e-12 max(Hm, Vm)`.
#[derive(Debug)]
pub struct LyapunovValues {
    estar: Option<PointState>,
}

impl LyapunovValues {
    pub fn new(p: &ModelParams, estar: Option<PointState>) -> Self {
        Self {
            estar: estar.filter(|_| p.lyapunov_restriction_holds()),
        }
    }
}

impl Monitor for LyapunovValues {
    fn name(&self) -> &str {
        "lyapunov"
    }

    fn columns(&self) -> Vec<String> {
        vec!["L1".into(), "L2".into()]
    }

    fn observe(&mut self, s: &FieldState, ctx: &MonitorContext<'_>) -> MonitorSample {
        let l1 = lyapunov::l1(ctx.params, ctx.grid, s);
        let l2 = match self.estar {
            Some(e) if s.min_value() > 1e-12 * bound_scale(ctx) => {
                lyapunov::l2(ctx.params, ctx.grid, e, s).unwrap_or(f64::NAN)
            }
            _ => f64::NAN,
        };
        MonitorSample {
            values: vec![l1, l2],
            violation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MonitorKind {
    Positivity,
    Sigma,
    Comparison,
    Lyapunov,
}

impl MonitorKind {
    pub const ALL: [MonitorKind; 4] = [
        MonitorKind::Positivity,
        MonitorKind::Sigma,
        MonitorKind::Comparison,
        MonitorKind::Lyapunov,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MonitorKind::Positivity => "positivity",
            MonitorKind::Sigma => "sigma",
            MonitorKind::Comparison => "comparison",
            MonitorKind::Lyapunov => "lyapunov",
        }
    }
}

impl fmt::Display for MonitorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MonitorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MonitorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("monitors", format!("unknown monitor `{s}`")))
    }
}

pub fn build_monitors(kinds: &[MonitorKind], p: &ModelParams, estar: Option<PointState>) -> Vec<Box<dyn Monitor>> {
    kinds
        .iter()
        .map(|k| -> Box<dyn Monitor> {
            match k {
                MonitorKind::Positivity => Box::new(Positivity),
                MonitorKind::Sigma => Box::new(InvariantRegion),
                MonitorKind::Comparison => Box::new(ComparisonEnvelope),
                MonitorKind::Lyapunov => Box::new(LyapunovValues::new(p, estar)),
            }
        })
        .collect()
}
