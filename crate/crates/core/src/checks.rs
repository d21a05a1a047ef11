//! Randomized invariant suite, run by `hcvlab check`. Every check draws
//! from a seeded ChaCha stream, so a seed reproduces a run exactly.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibria::{infected_equilibrium, psi, residual_scale, DEFAULT_ROOT_TOL, RESIDUAL_TOL};
use crate::lyapunov::{amgm_bracket_product, g2};
use crate::model::{
    basic_reproduction_number, derived, lipschitz_constants, presets, reaction_unchecked, tau0, InitialBounds,
    ModelParams, PointState,
};
use crate::solver::{laplacian_neumann, Grid1D};
use crate::stability::e0_characteristic;

/// Random parameter sets spanning both sides of `R0 = 1`.
pub mod sampling {
    use super::*;

    fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
        (rng.gen_range(lo.ln()..hi.ln())).exp()
    }

    pub fn params<R: Rng>(rng: &mut R) -> ModelParams {
        ModelParams {
            production: log_uniform(rng, 1.0, 100.0),
            healthy_death: log_uniform(rng, 0.1, 10.0),
            transmission: log_uniform(rng, 1e-3, 10.0),
            infection_block: rng.gen_range(0.0..0.9),
            production_block: rng.gen_range(0.0..0.9),
            cure: rng.gen_range(0.0..0.5),
            infected_death: log_uniform(rng, 0.01, 1.0),
            virion_yield: log_uniform(rng, 0.1, 20.0),
            clearance: log_uniform(rng, 0.1, 50.0),
            absorption: rng.gen_bool(0.5),
            saturation: [
                log_uniform(rng, 0.1, 2.0),
                rng.gen_range(0.0..0.5),
                rng.gen_range(0.0..0.5),
                rng.gen_range(0.0..0.5),
            ],
            diffusion: [
                log_uniform(rng, 0.01, 1.0),
                log_uniform(rng, 0.01, 1.0),
                log_uniform(rng, 0.01, 1.0),
            ],
        }
    }

    /// Parameters in the family where `G2` is defined.
    pub fn restricted_params<R: Rng>(rng: &mut R) -> ModelParams {
        let mut p = params(rng);
        p.absorption = false;
        p.saturation[0] = 1.0;
        p.saturation[3] = p.saturation[1] * p.saturation[2];
        p
    }

    /// Like [`restricted_params`] but with an infected equilibrium.
    pub fn restricted_persistent<R: Rng>(rng: &mut R) -> (ModelParams, PointState) {
        loop {
            let p = restricted_params(rng);
            if let Ok(Ok(e)) = infected_equilibrium(&p, DEFAULT_ROOT_TOL) {
                return (p, e.state);
            }
        }
    }

    /// Positive state whose components are within a factor `spread` of `centre`.
    pub fn state_near<R: Rng>(rng: &mut R, centre: PointState, spread: f64) -> PointState {
        let mut f = |c: f64| c * log_uniform(rng, 1.0 / spread, spread);
        PointState::new(f(centre.h), f(centre.i), f(centre.v))
    }

    /// Uniform point of the box `[0, Hm]^2 x [0, Vm]`.
    pub fn state_in_box<R: Rng>(rng: &mut R, cells: f64, virions: f64) -> PointState {
        PointState::new(
            rng.gen_range(0.0..=cells),
            rng.gen_range(0.0..=cells),
            rng.gen_range(0.0..=virions),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    pub failures: usize,
    /// First failing sample, if any.
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {} ({} samples, {} failures)",
            self.name, self.samples, self.failures
        )?;
        if let Some(d) = &self.detail {
            write!(f, ": {d}")?;
        }
        Ok(())
    }
}

struct Tally {
    name: &'static str,
    samples: usize,
    failures: usize,
    detail: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            failures: 0,
            detail: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(detail());
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            samples: self.samples,
            failures: self.failures,
            detail: self.detail,
        }
    }
}

fn quasi_positivity(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("quasi-positivity");
    for _ in 0..n {
        let p = sampling::params(rng);
        let s = sampling::state_in_box(rng, 100.0, 100.0);
        // each rate is nonnegative on the face where its own component is zero
        let ok = reaction_unchecked(&p, PointState { h: 0.0, ..s }).h >= 0.0
            && reaction_unchecked(&p, PointState { i: 0.0, ..s }).i >= 0.0
            && reaction_unchecked(&p, PointState { v: 0.0, ..s }).v >= 0.0;
        t.record(ok, || format!("{p:?} at {s:?}"));
    }
    t.finish()
}

fn threshold_order(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("R0 <= tau0");
    for _ in 0..n {
        let p = sampling::params(rng);
        let (r0, t0) = (basic_reproduction_number(&p), tau0(&p));
        t.record(r0 <= t0 * (1.0 + 1e-12), || format!("R0={r0} tau0={t0}"));
    }
    t.finish()
}

fn existence_dichotomy(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("E* exists iff R0 > 1 and gamma > 0");
    for _ in 0..n {
        let p = sampling::params(rng);
        let r0 = basic_reproduction_number(&p);
        if (r0 - 1.0).abs() < 1e-9 {
            continue;
        }
        let expected = r0 > 1.0 && p.net_yield() > 0.0;
        match infected_equilibrium(&p, DEFAULT_ROOT_TOL) {
            Ok(found) => t.record(found.is_ok() == expected, || {
                format!("R0={r0}, found={}", found.is_ok())
            }),
            Err(e) => t.record(false, || e.to_string()),
        }
    }
    t.finish()
}

fn estar_residual(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("E* residual and bounds");
    let mut tried = 0;
    while t.samples < n && tried < 100 * n {
        tried += 1;
        let p = sampling::params(rng);
        let Ok(Ok(e)) = infected_equilibrium(&p, DEFAULT_ROOT_TOL) else {
            continue;
        };
        let s = e.state;
        let res = reaction_unchecked(&p, s).sup_norm();
        let scale = residual_scale(&p, s);
        let ok = res <= RESIDUAL_TOL * scale && s.h > 0.0 && s.h < p.healthy_capacity() && s.i > 0.0 && s.v > 0.0;
        t.record(ok, || format!("E*={s:?} residual={res:e} scale={scale}"));
    }
    t.finish()
}

fn psi_monotone(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("psi increasing when gamma > 0");
    while t.samples < n {
        let p = sampling::params(rng);
        if p.net_yield() <= 0.0 {
            continue;
        }
        let cap = p.healthy_capacity();
        let values: Vec<f64> = (1..1000)
            .map(|k| psi(&p, cap * k as f64 / 1000.0).unwrap_or(f64::NAN))
            .collect();
        let bad = values
            .windows(2)
            .position(|w| w[0].is_nan() || w[1].is_nan() || w[1] <= w[0]);
        t.record(bad.is_none(), || format!("{p:?} at sample {bad:?}"));
    }
    t.finish()
}

fn e0_sign_law(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("sign C(mode 1) = sign(1 - R0)");
    for _ in 0..n {
        let p = sampling::params(rng);
        let r0 = basic_reproduction_number(&p);
        if (r0 - 1.0).abs() < 1e-9 {
            continue;
        }
        let c = e0_characteristic(&p, 0.0).c;
        t.record((c > 0.0) == (r0 < 1.0), || format!("R0={r0} C={c}"));
    }
    t.finish()
}

fn amgm_identity(rng: &mut ChaCha8Rng, n_params: usize, n_states: usize) -> CheckResult {
    let mut t = Tally::new("AM-GM product = 1");
    for _ in 0..n_params {
        let (p, e) = sampling::restricted_persistent(rng);
        for _ in 0..n_states {
            let s = sampling::state_near(rng, e, 100.0);
            match amgm_bracket_product(&p, e, s) {
                Ok(prod) => t.record((prod - 1.0).abs() <= 1e-12, || format!("product {prod} at {s:?}")),
                Err(err) => t.record(false, || err.to_string()),
            }
        }
    }
    t.finish()
}

fn g2_minimum(rng: &mut ChaCha8Rng, n_params: usize, n_states: usize) -> CheckResult {
    let mut t = Tally::new("G2(E*) = 0 and G2 >= 0");
    for _ in 0..n_params {
        let (p, e) = sampling::restricted_persistent(rng);
        let at = g2(&p, e, e).unwrap_or(f64::NAN);
        t.record(at.abs() <= 1e-9 * e.sup_norm(), || format!("G2(E*)={at}"));
        for _ in 0..n_states {
            let s = sampling::state_near(rng, e, 10.0);
            let v = g2(&p, e, s).unwrap_or(f64::NAN);
            t.record(v >= -1e-9 * e.sup_norm(), || format!("G2={v} at {s:?}"));
        }
    }
    t.finish()
}

fn lipschitz_set1(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("Lipschitz bound on the invariant box (set 1)");
    let p = presets::set1();
    let dq = derived(&p, InitialBounds::from_component_maxima(5.0, 5.0, 5.0));
    let k = match lipschitz_constants(&p, dq.cells_bound, dq.virions_bound) {
        Ok(k) => k,
        Err(e) => {
            t.record(false, || e.to_string());
            return t.finish();
        }
    };
    for _ in 0..n {
        let x = sampling::state_in_box(rng, dq.cells_bound, dq.virions_bound);
        let y = sampling::state_in_box(rng, dq.cells_bound, dq.virions_bound);
        t.record(lipschitz_holds(&p, &k, x, y), || format!("x={x:?} y={y:?}"));
    }
    t.finish()
}

/// `|F_i(x) - F_i(y)| <= sum_j K[i][j] |x_j - y_j|` for every component,
/// with roundoff slack `1e-12 (|F_i(x)| + |F_i(y)| + 1)`.
pub fn lipschitz_holds(p: &ModelParams, k: &[[f64; 3]; 3], x: PointState, y: PointState) -> bool {
    let (fx, fy) = (reaction_unchecked(p, x).to_array(), reaction_unchecked(p, y).to_array());
    let dx = (x - y).to_array().map(f64::abs);
    (0..3).all(|i| {
        let bound: f64 = (0..3).map(|j| k[i][j] * dx[j]).sum();
        (fx[i] - fy[i]).abs() <= bound + 1e-12 * (fx[i].abs() + fy[i].abs() + 1.0)
    })
}

fn laplacian_mass(rng: &mut ChaCha8Rng, n: usize) -> CheckResult {
    let mut t = Tally::new("Neumann Laplacian conserves mass");
    for _ in 0..n {
        let cells = rng.gen_range(3..200);
        let grid = Grid1D::new(rng.gen_range(0.1..10.0), cells).expect("valid grid");
        let f: Vec<f64> = (0..cells).map(|_| rng.gen_range(0.0..10.0)).collect();
        match laplacian_neumann(&f, grid.spacing()) {
            Ok(lap) => {
                let mass = grid.integrate(&lap);
                let scale: f64 = lap.iter().map(|x| x.abs()).sum::<f64>() * grid.spacing() + 1.0;
                t.record(mass.abs() <= 1e-10 * scale, || {
                    format!("integral {mass:e} on {cells} cells")
                });
            }
            Err(e) => t.record(false, || e.to_string()),
        }
    }
    t.finish()
}

/// Runs every check; `samples` scales the number of random draws.
pub fn run_checks(seed: u64, samples: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.max(1);
    vec![
        quasi_positivity(&mut rng, n),
        threshold_order(&mut rng, n),
        existence_dichotomy(&mut rng, n),
        estar_residual(&mut rng, (n / 10).max(1)),
        psi_monotone(&mut rng, (n / 100).max(1)),
        e0_sign_law(&mut rng, n),
        amgm_identity(&mut rng, (n / 10).max(1), 10),
        g2_minimum(&mut rng, (n / 10).max(1), 10),
        lipschitz_set1(&mut rng, n),
        laplacian_mass(&mut rng, (n / 10).max(1)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_reproducible() {
        let a = run_checks(7, 200);
        for r in &a {
            assert!(r.passed(), "{r}");
            assert!(r.samples > 0, "{r}");
        }
        assert_eq!(a, run_checks(7, 200));
    }

    #[test]
    fn lipschitz_rejects_a_shrunken_constant() {
        let p = presets::set1();
        let k = [[0.0; 3]; 3];
        let x = PointState::new(1.0, 1.0, 1.0);
        let y = PointState::new(2.0, 1.0, 1.0);
        assert!(!lipschitz_holds(&p, &k, x, y));
    }

    #[test]
    fn restricted_sampler_satisfies_restriction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (p, e) = sampling::restricted_persistent(&mut rng);
            assert!(p.lyapunov_restriction_holds());
            assert!(e.h > 0.0 && e.i > 0.0 && e.v > 0.0);
        }
    }
}
