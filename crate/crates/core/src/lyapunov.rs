//! Lyapunov functionals for the uninfected and infected equilibria.
//!
//! `G1` is linear in (I, V) and certifies extinction when `tau0 < 1`.
//! `G2` is the Volterra-type functional about `E*`. Its integrals have
//! closed forms only when the incidence factorizes as
//! `H V / ((1 + a1 H)(1 + a2 V))` and absorption is off
//! (`u = 0`, `alpha0 = 1`, `alpha3 = alpha1 alpha2`), so `G2` is
//! restricted to that family. Within it, `dG2/dt <= 0` is guaranteed only
//! when `rho = 0`: the cure gain `rho I` enters the H block with the sign of
//! `H - H*` and can outweigh the dissipative terms.

use crate::error::{Error, Result};
use crate::model::{ModelParams, PointState};
use crate::solver::{FieldState, Grid1D};

/// `G1 = ((1-eps) k / (alpha + rho)) I + V`.
pub fn g1(p: &ModelParams, s: PointState) -> f64 {
    p.effective_yield() / p.infected_removal() * s.i + s.v
}

/// Spatial integral of [`g1`].
pub fn l1(p: &ModelParams, grid: &Grid1D, s: &FieldState) -> f64 {
    let values: Vec<f64> = s.points().map(|q| g1(p, q)).collect();
    grid.integrate(&values)
}

/// Upper bound `(tau0 - 1) mu V` on `dG1/dt` inside the invariant region.
pub fn g1_rate_bound(p: &ModelParams, s: PointState) -> f64 {
    (crate::model::tau0(p) - 1.0) * p.clearance * s.v
}

fn require_restriction(p: &ModelParams) -> Result<()> {
    if p.lyapunov_restriction_holds() {
        Ok(())
    } else {
        Err(Error::NotApplicable(
            "G2 needs u = 0, alpha0 = 1 and alpha3 = alpha1 * alpha2".into(),
        ))
    }
}

fn require_positive(what: &str, s: PointState) -> Result<()> {
    if s.h > 0.0 && s.i > 0.0 && s.v > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be strictly positive, got {s:?}")))
    }
}

/// The infected-state functional `G2(H, I, V)`.
pub fn g2(p: &ModelParams, estar: PointState, s: PointState) -> Result<f64> {
    require_restriction(p)?;
    require_positive("E*", estar)?;
    require_positive("state", s)?;
    let [_, a1, a2, _] = p.saturation;
    let bt = p.effective_transmission();
    let removal = p.infected_removal();
    let PointState { h: hs, i: is, v: vs } = estar;

    // H-block integrand: (alpha+rho) I* (1 + a1 tau)(1 + a2 V*) / ((1-eta) beta tau V*)
    let ch = removal * is * (1.0 + a2 * vs) / (bt * vs);
    let h_block = s.h - hs - ch * ((s.h / hs).ln() + a1 * (s.h - hs));

    let i_block = s.i - is - is * (s.i / is).ln();

    // V-block integrand: (alpha+rho) I* (1 + a1 H*)(1 + a2 tau) / ((1-eta) beta tau H*)
    let cv = removal * is * (1.0 + a1 * hs) / (bt * hs);
    // weight that cancels the (alpha+rho) I loss in the I-block; an extra
    // (1 + a2 V*) factor would leave dG2/dt > 0 at some states near E*
    let v_prefactor = removal / p.effective_yield();
    let v_block = v_prefactor * (s.v - vs - cv * ((s.v / vs).ln() + a2 * (s.v - vs)));

    Ok(h_block + i_block + v_block)
}

/// Spatial integral of [`g2`].
pub fn l2(p: &ModelParams, grid: &Grid1D, estar: PointState, s: &FieldState) -> Result<f64> {
    let values = s.points().map(|q| g2(p, estar, q)).collect::<Result<Vec<f64>>>()?;
    Ok(grid.integrate(&values))
}

/// The four ratios whose arithmetic mean is compared with their geometric
/// mean in the decay estimate for `G2`. Their product is identically 1.
pub fn amgm_terms(p: &ModelParams, estar: PointState, s: PointState) -> Result<[f64; 4]> {
    require_restriction(p)?;
    require_positive("E*", estar)?;
    require_positive("state", s)?;
    let [_, a1, a2, _] = p.saturation;
    let PointState { h: hs, i: is, v: vs } = estar;
    let (h, i, v) = (s.h, s.i, s.v);
    let hr = (1.0 + a1 * h) / (1.0 + a1 * hs);
    let vr = (1.0 + a2 * v) / (1.0 + a2 * vs);
    Ok([hs / h * hr, h * is * v / (hs * i * vs) / (hr * vr), i / is * vs / v, vr])
}

pub fn amgm_bracket_product(p: &ModelParams, estar: PointState, s: PointState) -> Result<f64> {
    Ok(amgm_terms(p, estar, s)?.iter().product())
}

/// `4 - sum of the four terms`; nonpositive whenever their product is 1.
pub fn amgm_bracket(p: &ModelParams, estar: PointState, s: PointState) -> Result<f64> {
    Ok(4.0 - amgm_terms(p, estar, s)?.iter().sum::<f64>())
}

/// The fully expanded `dG2/dt` as printed with the infected-state stability
/// theorem. It does not vanish at `E*` (its `-alpha I*(rho/alpha + I/I*)`
/// term equals `-(alpha+rho) I*` there), so it is reported for reference
/// only; decay is checked on the functional itself.
pub fn printed_dg2_dt(p: &ModelParams, estar: PointState, s: PointState) -> Result<f64> {
    let terms = amgm_terms(p, estar, s)?;
    let [_, a1, a2, _] = p.saturation;
    let PointState { h: hs, i: is, v: vs } = estar;
    let removal = p.infected_removal();
    let quad_h = -p.healthy_death * (s.h - hs).powi(2) / (s.h * (1.0 + a1 * hs));
    let quad_v = -a2 * removal * is * (s.v - vs).powi(2) / (vs * (1.0 + a2 * vs) * (1.0 + a2 * s.v));
    let cure = -p.infected_death * is * (p.cure / p.infected_death + s.i / is);
    Ok(quad_h + quad_v + cure + removal * is * (4.0 - terms.iter().sum::<f64>()))
}

/// Result of a forward-difference monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecayCheck {
    pub ok: bool,
    /// Index of the first sample that rose above its predecessor by more
    /// than the tolerance.
    pub first_violation: Option<usize>,
}

/// Checks `values[k+1] - values[k] <= tol * scale` for all `k`, with
/// `scale = max |values|` (1 if the series is identically zero).
pub fn decay_check(values: &[f64], tol: f64) -> Result<DecayCheck> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "decay check needs at least 2 samples, got {}",
            values.len()
        )));
    }
    let mut scale = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        scale = 1.0;
    }
    let first_violation = values
        .windows(2)
        .position(|w| {
            let rise = w[1] - w[0];
            rise.is_nan() || rise > tol * scale
        })
        .map(|k| k + 1);
    Ok(DecayCheck {
        ok: first_violation.is_none(),
        first_violation,
    })
}

/// Functional values along a trajectory with backward-difference rates.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    /// NaN where `L2` is undefined (restriction off, no `E*`, or a state
    /// component not yet above the positivity floor).
    pub l2: Vec<f64>,
    pub dl1dt: Vec<f64>,
    pub dl2dt: Vec<f64>,
    pub restriction_ok: bool,
}

/// Backward differences; the first entry is NaN.
pub fn finite_difference_rates(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    if !values.is_empty() {
        out.push(f64::NAN);
    }
    for k in 1..values.len() {
        out.push((values[k] - values[k - 1]) / (times[k] - times[k - 1]));
    }
    out
}

impl LyapunovTrace {
    pub fn from_series(times: Vec<f64>, l1: Vec<f64>, l2: Vec<f64>, restriction_ok: bool) -> Self {
        let dl1dt = finite_difference_rates(&times, &l1);
        let dl2dt = finite_difference_rates(&times, &l2);
        Self {
            times,
            l1,
            l2,
            dl1dt,
            dl2dt,
            restriction_ok,
        }
    }

    /// `L2` values where defined.
    pub fn l2_defined(&self) -> Vec<f64> {
        self.l2.iter().copied().filter(|x| x.is_finite()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{infected_equilibrium, DEFAULT_ROOT_TOL};
    use crate::model::presets;
    use approx::assert_relative_eq;

    fn restricted() -> ModelParams {
        let mut p = presets::set2();
        p.absorption = false;
        p.saturation[3] = p.saturation[1] * p.saturation[2];
        p
    }

    fn estar(p: &ModelParams) -> PointState {
        infected_equilibrium(p, DEFAULT_ROOT_TOL).unwrap().unwrap().state
    }

    #[test]
    fn g1_values() {
        let p = presets::set1();
        assert_eq!(g1(&p, PointState::new(7.0, 0.0, 0.0)), 0.0);
        assert_relative_eq!(
            g1(&p, PointState::new(10.0, 1.0, 0.0)),
            50.0 / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn l1_of_constant_field() {
        let p = presets::set1();
        let g = Grid1D::new(2.0, 11).unwrap();
        let s = PointState::new(3.0, 2.0, 1.0);
        assert_relative_eq!(
            l1(&p, &g, &FieldState::constant(&g, s)),
            2.0 * g1(&p, s),
            max_relative = 1e-14
        );
        assert_eq!(
            l1(&p, &g, &FieldState::constant(&g, PointState::new(3.0, 0.0, 0.0))),
            0.0
        );
    }

    #[test]
    fn g2_vanishes_at_equilibrium() {
        let p = restricted();
        let e = estar(&p);
        assert_eq!(g2(&p, e, e).unwrap(), 0.0);
    }

    #[test]
    fn g2_infected_block_only() {
        let p = restricted();
        let e = estar(&p);
        let s = PointState::new(e.h, 2.0 * e.i, e.v);
        // I - I* - I* ln(I/I*) at I = 2 I*
        let expected = e.i * (1.0 - std::f64::consts::LN_2);
        assert_relative_eq!(g2(&p, e, s).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn g2_errors() {
        let p = presets::set2();
        let e = PointState::new(1.0, 1.0, 1.0);
        assert!(matches!(g2(&p, e, e), Err(Error::NotApplicable(_))));
        let p = restricted();
        let e = estar(&p);
        assert!(matches!(
            g2(&p, e, PointState::new(1.0, 0.0, 1.0)),
            Err(Error::Domain(_))
        ));
        assert!(amgm_bracket_product(&p, e, PointState::new(-1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn g2_nonincreasing_along_the_vector_field_without_cure() {
        use crate::checks::sampling;
        use crate::model::reaction;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (p, e) = loop {
                let mut p = sampling::restricted_params(&mut rng);
                p.cure = 0.0;
                if let Ok(Ok(e)) = infected_equilibrium(&p, DEFAULT_ROOT_TOL) {
                    break (p, e.state);
                }
            };
            for _ in 0..20 {
                let s = sampling::state_near(&mut rng, e, 3.0);
                // central-difference gradient of the closed form
                let partial = |bump: fn(PointState, f64) -> PointState, x: f64| {
                    let h = 1e-6 * x;
                    (g2(&p, e, bump(s, h)).unwrap() - g2(&p, e, bump(s, -h)).unwrap()) / (2.0 * h)
                };
                let grad = [
                    partial(|q, h| PointState::new(q.h + h, q.i, q.v), s.h),
                    partial(|q, h| PointState::new(q.h, q.i + h, q.v), s.i),
                    partial(|q, h| PointState::new(q.h, q.i, q.v + h), s.v),
                ];
                let f = reaction(&p, s).unwrap();
                let terms = [grad[0] * f.h, grad[1] * f.i, grad[2] * f.v];
                let scale: f64 = terms.iter().map(|t| t.abs()).sum();
                let rate: f64 = terms.iter().sum();
                assert!(rate <= 1e-6 * scale, "rate {rate:e} scale {scale:e} at {s:?}");
            }
        }
    }

    #[test]
    fn cure_can_raise_g2() {
        use crate::model::reaction;
        let mut p = presets::set2();
        p.production = 2.847446427133128;
        p.healthy_death = 0.14329540439093624;
        p.transmission = 0.38097508705620153;
        p.infection_block = 0.8308245329750313;
        p.production_block = 0.36384804936321585;
        p.cure = 0.1816835605109991;
        p.infected_death = 0.058325823351242444;
        p.virion_yield = 14.67007311963389;
        p.clearance = 3.0664651048111065;
        p.absorption = false;
        p.saturation = [1.0, 0.20198834045094194, 0.00040936649193901165, 0.0];
        p.saturation[3] = p.saturation[1] * p.saturation[2];
        let e = estar(&p);
        let s = PointState::new(2.0 * e.h, 2.0 * e.i, 2.0 * e.v);
        // exact gradient of the closed form dotted with the vector field
        let fs = crate::model::incidence(&p, e.h, e.v).unwrap();
        let grad = [
            1.0 - fs / crate::model::incidence(&p, s.h, e.v).unwrap(),
            1.0 - e.i / s.i,
            p.infected_removal() / p.effective_yield() * (1.0 - fs / crate::model::incidence(&p, e.h, s.v).unwrap()),
        ];
        let f = reaction(&p, s).unwrap();
        let rate = grad[0] * f.h + grad[1] * f.i + grad[2] * f.v;
        assert!(rate > 0.0, "{rate}");
        // the excess is the cure gain routed through the H block
        assert!(p.cure * s.i * grad[0] > rate);
    }

    #[test]
    fn amgm_at_equilibrium() {
        let p = restricted();
        let e = estar(&p);
        let terms = amgm_terms(&p, e, e).unwrap();
        for t in terms {
            assert_relative_eq!(t, 1.0, max_relative = 1e-15);
        }
        assert_relative_eq!(amgm_bracket(&p, e, e).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn printed_rate_does_not_vanish_at_equilibrium() {
        let p = restricted();
        let e = estar(&p);
        let r = printed_dg2_dt(&p, e, e).unwrap();
        assert_relative_eq!(r, -p.infected_removal() * e.i, max_relative = 1e-12);
    }

    #[test]
    fn decay_check_examples() {
        let ok = decay_check(&[5.0, 4.0, 3.0, 2.5], 1e-8).unwrap();
        assert!(ok.ok && ok.first_violation.is_none());
        let bad = decay_check(&[5.0, 4.0, 4.1, 3.0], 1e-8).unwrap();
        assert_eq!(
            bad,
            DecayCheck {
                ok: false,
                first_violation: Some(2)
            }
        );
        // an uptick inside the tolerance band is accepted
        assert!(decay_check(&[1.0, 1.0 + 1e-10], 1e-8).unwrap().ok);
        assert!(decay_check(&[1.0], 1e-8).is_err());
        assert!(!decay_check(&[1.0, f64::NAN], 1e-8).unwrap().ok);
    }

    #[test]
    fn finite_differences() {
        let r = finite_difference_rates(&[0.0, 1.0, 3.0], &[4.0, 2.0, 0.0]);
        assert!(r[0].is_nan());
        assert_eq!(&r[1..], &[-2.0, -1.0]);
    }
}
