//! Model parameters, the Hattaf–Yousfi incidence, the reaction vector
//! field and the a-priori bounds that define the invariant region.

use crate::error::{Error, Result};

/// Config keys, in canonical emission order.
pub const PARAM_KEYS: [&str; 17] = [
    "lambda", "d", "beta", "eta", "epsilon", "rho", "alpha", "k", "mu", "u", "alpha0", "alpha1", "alpha2", "alpha3",
    "D1", "D2", "D3",
];

/// Biological, therapy and diffusion constants of the model.
///
/// Field names describe roles; the flat config format uses the short keys
/// listed in [`PARAM_KEYS`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Healthy hepatocyte production rate (`lambda`).
    pub production: f64,
    /// Healthy hepatocyte death rate (`d`).
    pub healthy_death: f64,
    /// Transmission rate (`beta`).
    pub transmission: f64,
    /// Efficacy of the infection-blocking drug, in [0, 1) (`eta`).
    pub infection_block: f64,
    /// Efficacy of the production-blocking drug, in [0, 1) (`epsilon`).
    pub production_block: f64,
    /// Cure rate of infected cells (`rho`).
    pub cure: f64,
    /// Infected cell death rate (`alpha`).
    pub infected_death: f64,
    /// Virion production per infected cell (`k`).
    pub virion_yield: f64,
    /// Virion clearance rate (`mu`).
    pub clearance: f64,
    /// Whether virions are lost on entering a target cell (`u`).
    pub absorption: bool,
    /// Incidence denominator `a0 + a1 H + a2 V + a3 H V` (`alpha0..alpha3`).
    pub saturation: [f64; 4],
    /// Diffusion coefficients of H, I and V (`D1..D3`).
    pub diffusion: [f64; 3],
}

impl ModelParams {
    /// Validates every constraint and returns the parameters unchanged.
    pub fn validated(self) -> Result<Self> {
        for key in PARAM_KEYS {
            let value = self.get(key).expect("known key");
            check_param(key, value)?;
        }
        Ok(self)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        let value = match key {
            "lambda" => self.production,
            "d" => self.healthy_death,
            "beta" => self.transmission,
            "eta" => self.infection_block,
            "epsilon" => self.production_block,
            "rho" => self.cure,
            "alpha" => self.infected_death,
            "k" => self.virion_yield,
            "mu" => self.clearance,
            "u" => self.u(),
            "alpha0" => self.saturation[0],
            "alpha1" => self.saturation[1],
            "alpha2" => self.saturation[2],
            "alpha3" => self.saturation[3],
            "D1" => self.diffusion[0],
            "D2" => self.diffusion[1],
            "D3" => self.diffusion[2],
            _ => return None,
        };
        Some(value)
    }

    /// Sets one parameter by config key. The value is range-checked but the
    /// rest of the parameter set is not revalidated.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        check_param(key, value)?;
        match key {
            "lambda" => self.production = value,
            "d" => self.healthy_death = value,
            "beta" => self.transmission = value,
            "eta" => self.infection_block = value,
            "epsilon" => self.production_block = value,
            "rho" => self.cure = value,
            "alpha" => self.infected_death = value,
            "k" => self.virion_yield = value,
            "mu" => self.clearance = value,
            "u" => self.absorption = value == 1.0,
            "alpha0" => self.saturation[0] = value,
            "alpha1" => self.saturation[1] = value,
            "alpha2" => self.saturation[2] = value,
            "alpha3" => self.saturation[3] = value,
            "D1" => self.diffusion[0] = value,
            "D2" => self.diffusion[1] = value,
            "D3" => self.diffusion[2] = value,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Absorption flag as the 0/1 factor multiplying the incidence in the
    /// virion equation.
    pub fn u(&self) -> f64 {
        if self.absorption {
            1.0
        } else {
            0.0
        }
    }

    /// Effective transmission `(1 - eta) * beta`.
    pub fn effective_transmission(&self) -> f64 {
        (1.0 - self.infection_block) * self.transmission
    }

    /// Effective virion yield `(1 - epsilon) * k`.
    pub fn effective_yield(&self) -> f64 {
        (1.0 - self.production_block) * self.virion_yield
    }

    /// Total removal rate of infected cells, `alpha + rho`.
    pub fn infected_removal(&self) -> f64 {
        self.infected_death + self.cure
    }

    /// `Lambda = lambda / d`, the healthy density at the uninfected state.
    pub fn healthy_capacity(&self) -> f64 {
        self.production / self.healthy_death
    }

    /// Net virion yield per infected cell, `(1-epsilon) k - u (alpha + rho)`.
    pub fn net_yield(&self) -> f64 {
        self.effective_yield() - self.u() * self.infected_removal()
    }

    /// Whether the incidence factorizes as `H V / ((1 + a1 H)(1 + a2 V))`
    /// and there is no absorption, the case in which the infected-state
    /// Lyapunov functional is available.
    pub fn lyapunov_restriction_holds(&self) -> bool {
        let [a0, a1, a2, a3] = self.saturation;
        let scale = a3.abs().max(a1 * a2).max(f64::MIN_POSITIVE);
        !self.absorption && a0 == 1.0 && (a3 - a1 * a2).abs() <= 1e-12 * scale
    }

    fn denominator(&self, h: f64, v: f64) -> f64 {
        let [a0, a1, a2, a3] = self.saturation;
        a0 + a1 * h + a2 * v + a3 * h * v
    }
}

fn check_param(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(key, "must be finite"));
    }
    let ok = match key {
        "lambda" | "d" | "alpha" | "k" | "mu" | "alpha0" | "D1" | "D2" | "D3" => value > 0.0,
        "beta" | "rho" | "alpha1" | "alpha2" | "alpha3" => value >= 0.0,
        "eta" | "epsilon" => (0.0..1.0).contains(&value),
        "u" => value == 0.0 || value == 1.0,
        _ => return Err(Error::UnknownKey(key.to_string())),
    };
    if ok {
        Ok(())
    } else {
        let rule = match key {
            "eta" | "epsilon" => "must lie in [0, 1)",
            "u" => "must be 0 or 1",
            "beta" | "rho" | "alpha1" | "alpha2" | "alpha3" => "must be >= 0",
            _ => "must be > 0",
        };
        Err(Error::invalid(key, format!("{rule} (got {value})")))
    }
}

/// Densities of healthy cells, infected cells and free virions at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointState {
    pub h: f64,
    pub i: f64,
    pub v: f64,
}

impl PointState {
    pub const fn new(h: f64, i: f64, v: f64) -> Self {
        Self { h, i, v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.h, self.i, self.v]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.i.is_finite() && self.v.is_finite()
    }

    pub fn sup_norm(&self) -> f64 {
        self.h.abs().max(self.i.abs()).max(self.v.abs())
    }
}

impl std::ops::Sub for PointState {
    type Output = PointState;

    fn sub(self, other: PointState) -> PointState {
        PointState::new(self.h - other.h, self.i - other.i, self.v - other.v)
    }
}

fn check_point(h: f64, v: f64) -> Result<()> {
    if !h.is_finite() || !v.is_finite() {
        return Err(Error::Domain(format!("non-finite density (H={h}, V={v})")));
    }
    Ok(())
}

/// Hattaf–Yousfi incidence `(1-eta) beta H V / (a0 + a1 H + a2 V + a3 H V)`.
pub fn incidence(p: &ModelParams, h: f64, v: f64) -> Result<f64> {
    check_point(h, v)?;
    if h < 0.0 || v < 0.0 {
        return Err(Error::Domain(format!("negative density (H={h}, V={v})")));
    }
    Ok(incidence_unchecked(p, h, v))
}

/// Incidence without input validation, for the inner loops of the solver.
#[inline]
pub fn incidence_unchecked(p: &ModelParams, h: f64, v: f64) -> f64 {
    p.effective_transmission() * h * v / p.denominator(h, v)
}

/// Reaction part `(F1, F2, F3)` of the system.
pub fn reaction(p: &ModelParams, s: PointState) -> Result<PointState> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("non-finite state {s:?}")));
    }
    Ok(reaction_unchecked(p, s))
}

#[inline]
pub fn reaction_unchecked(p: &ModelParams, s: PointState) -> PointState {
    let inc = incidence_unchecked(p, s.h, s.v);
    PointState {
        h: p.production - p.healthy_death * s.h - inc + p.cure * s.i,
        i: inc - p.infected_removal() * s.i,
        v: p.effective_yield() * s.i - p.clearance * s.v - p.u() * inc,
    }
}

/// Maxima of the initial data that enter the a-priori bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialBounds {
    /// `max_x (H0 + I0)`.
    pub cells_max: f64,
    /// `max_x V0`.
    pub virions_max: f64,
}

impl InitialBounds {
    /// Bounds from per-component maxima; `H0max + I0max` bounds `max (H0 + I0)`.
    pub fn from_component_maxima(h0: f64, i0: f64, v0: f64) -> Self {
        Self {
            cells_max: h0 + i0,
            virions_max: v0,
        }
    }
}

/// Constants derived from the parameters and the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub capacity: f64,
    pub net_yield: f64,
    /// `max(D1, D2)`.
    pub diffusion_max: f64,
    /// `min(d, alpha)`, decay rate of total cell density.
    pub cell_decay: f64,
    /// Upper bound on H and I.
    pub cells_bound: f64,
    /// Upper bound on V.
    pub virions_bound: f64,
    pub r0: f64,
    /// Sufficient threshold for global stability of the uninfected state.
    pub tau0: f64,
}

pub fn derived(p: &ModelParams, init: InitialBounds) -> DerivedQuantities {
    let capacity = p.healthy_capacity();
    let cell_decay = p.healthy_death.min(p.infected_death);
    let cells_bound = (p.production / cell_decay).max(init.cells_max);
    let virions_bound = (p.effective_yield() * cells_bound / p.clearance).max(init.virions_max);
    DerivedQuantities {
        capacity,
        net_yield: p.net_yield(),
        diffusion_max: p.diffusion[0].max(p.diffusion[1]),
        cell_decay,
        cells_bound,
        virions_bound,
        r0: basic_reproduction_number(p),
        tau0: tau0(p),
    }
}

/// Spectral radius of the next-generation operator at the uninfected state.
pub fn basic_reproduction_number(p: &ModelParams) -> f64 {
    let cap = p.healthy_capacity();
    let [a0, a1, _, _] = p.saturation;
    let infection = p.effective_transmission() * cap;
    p.effective_yield() * infection / (p.infected_removal() * (p.clearance * (a0 + a1 * cap) + p.u() * infection))
}

pub fn tau0(p: &ModelParams) -> f64 {
    p.effective_yield() * p.effective_transmission() * p.healthy_capacity()
        / (p.clearance * p.saturation[0] * p.infected_removal())
}

/// Lipschitz constants of the reaction terms on the invariant region.
///
/// Row `i` is `F_i`, column `j` the variable (H, I, V); the constants
/// contain `1/alpha1` and `1/alpha2`, so both must be positive.
pub fn lipschitz_constants(p: &ModelParams, cells_bound: f64, virions_bound: f64) -> Result<[[f64; 3]; 3]> {
    let [a0, a1, a2, _] = p.saturation;
    if a1 <= 0.0 || a2 <= 0.0 {
        return Err(Error::NotApplicable(
            "Lipschitz constants require alpha1 > 0 and alpha2 > 0".into(),
        ));
    }
    let b = p.effective_transmission();
    let u = p.u();
    let wrt_h = b * (1.0 / a2 + virions_bound / a0);
    let wrt_v = b * (1.0 / a1 + cells_bound / a0);
    Ok([
        [p.healthy_death + wrt_h, p.cure, wrt_v],
        [wrt_h, p.infected_removal(), wrt_v],
        [u * wrt_h, p.effective_yield(), p.clearance + u * wrt_v],
    ])
}

/// Default slack for [`in_sigma`]: `1e-9 * max(Hm, Vm)`.
pub fn default_sigma_tol(dq: &DerivedQuantities) -> f64 {
    1e-9 * dq.cells_bound.max(dq.virions_bound)
}

/// Membership in the invariant box `0 <= H, I <= Hm`, `0 <= V <= Vm`.
pub fn in_sigma(s: PointState, dq: &DerivedQuantities, tol: f64) -> bool {
    s.h >= -tol
        && s.i >= -tol
        && s.v >= -tol
        && s.h <= dq.cells_bound + tol
        && s.i <= dq.cells_bound + tol
        && s.v <= dq.virions_bound + tol
}

/// The two parameter sets used in the reference simulations. They differ
/// only in the virion clearance rate.
pub mod presets {
    use super::ModelParams;

    pub const fn reference(clearance: f64) -> ModelParams {
        ModelParams {
            production: 50.0,
            healthy_death: 5.0,
            transmission: 0.24,
            infection_block: 0.00004,
            production_block: 0.5,
            cure: 0.01,
            infected_death: 0.05,
            virion_yield: 2.0,
            clearance,
            absorption: true,
            saturation: [1.0, 0.1, 0.02, 0.03],
            diffusion: [0.1, 0.1, 0.1],
        }
    }

    /// Clearance 20: infection dies out.
    pub const fn set1() -> ModelParams {
        reference(20.0)
    }

    /// Clearance 2: infection persists.
    pub const fn set2() -> ModelParams {
        reference(2.0)
    }
}
