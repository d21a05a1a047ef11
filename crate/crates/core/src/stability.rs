//! Linear stability of the homogeneous equilibria, mode by mode.
//!
//! Linearizing about a homogeneous state and projecting onto the Neumann
//! eigenfunction with eigenvalue `mu_l` of `-Laplacian` gives the 3x3
//! matrix `J - mu_l diag(D1, D2, D3)`. At `E0` it is block triangular: one
//! root `-(mu_l D1 + d)` and a quadratic `x^2 + B x + C`. At `E*` the
//! characteristic polynomial is the cubic `x^3 + a2 x^2 + a1 x + a0`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use crate::equilibria::EquilibriumReport;
use crate::error::{Error, Result};
use crate::model::{basic_reproduction_number, tau0, ModelParams, PointState};

pub const DEFAULT_L_MAX: usize = 64;
/// Relative band around zero in which `C` counts as marginal.
pub const MARGINAL_BAND: f64 = 1e-12;

/// Eigenvalues of `-d^2/dx^2` on `(0, length)` with zero-flux ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub domain_length: f64,
    pub eigenvalues: Vec<f64>,
}

impl ModeSpectrum {
    pub fn l_max(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// `mu_l = ((l - 1) pi / length)^2` for `l = 1..=l_max`.
pub fn neumann_spectrum(length: f64, l_max: usize) -> Result<ModeSpectrum> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Domain(format!("domain length must be positive, got {length}")));
    }
    if l_max == 0 {
        return Err(Error::Domain("l_max must be at least 1".into()));
    }
    let eigenvalues = (0..l_max)
        .map(|l| {
            let w = l as f64 * PI / length;
            w * w
        })
        .collect();
    Ok(ModeSpectrum {
        domain_length: length,
        eigenvalues,
    })
}

/// Characteristic data of one mode at the uninfected equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E0Characteristic {
    /// The decoupled root `-(mu_l D1 + d)`.
    pub decoupled_root: f64,
    pub b: f64,
    pub c: f64,
    /// Magnitude of the terms that cancel inside `c`, for the marginal band.
    pub c_scale: f64,
}

pub fn e0_characteristic(p: &ModelParams, mu_l: f64) -> E0Characteristic {
    let cap = p.healthy_capacity();
    let [a0, a1, _, _] = p.saturation;
    let infectivity = p.effective_transmission() * cap / (a0 + a1 * cap);
    let cells = mu_l * p.diffusion[1] + p.infected_removal();
    let virions = mu_l * p.diffusion[2] + p.clearance + p.u() * infectivity;
    let gain = p.effective_yield() * infectivity;
    let loss = cells * virions;
    E0Characteristic {
        decoupled_root: -(mu_l * p.diffusion[0] + p.healthy_death),
        b: virions + cells,
        c: loss - gain,
        c_scale: loss.max(gain),
    }
}

/// Factor `K` in `C(mu_1 = 0) = K (1 - R0)`.
pub fn e0_threshold_factor(p: &ModelParams) -> f64 {
    let cap = p.healthy_capacity();
    let [a0, a1, _, _] = p.saturation;
    let sat = a0 + a1 * cap;
    p.infected_removal() * (p.clearance * sat + p.u() * p.effective_transmission() * cap) / sat
}

/// Characteristic data of one mode at the infected equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstarCharacteristic {
    /// Derivative of the incidence in H at `E*`.
    pub a_lin: f64,
    /// Derivative of the incidence in V at `E*`.
    pub b_lin: f64,
    /// Coefficients of `det(x I + mu_l D - J(E*))`.
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    /// The shorter `a1`, `a0` circulated with the local-stability theorem.
    /// They drop the cure and absorption couplings and the `A B` cross
    /// term, so their roots are not the Jacobian spectrum; kept for
    /// comparison only.
    pub printed_a1: f64,
    pub printed_a0: f64,
}

pub fn estar_characteristic(p: &ModelParams, estar: PointState, mu_l: f64) -> EstarCharacteristic {
    let [s0, s1, s2, s3] = p.saturation;
    let (h, v) = (estar.h, estar.v);
    let den = s0 + s1 * h + s2 * v + s3 * h * v;
    let den2 = den * den;
    let bt = p.effective_transmission();
    let a_lin = bt * (s0 + s2 * v) * v / den2;
    let b_lin = bt * (s0 + s1 * h) * h / den2;
    let u = p.u();

    let healthy = mu_l * p.diffusion[0] + p.healthy_death + a_lin;
    let infected = mu_l * p.diffusion[1] + p.infected_removal();
    let virions = mu_l * p.diffusion[2] + p.clearance + u * b_lin;
    let coupling = p.effective_yield() * b_lin;
    let printed_a1 = healthy * (infected + virions) + infected * virions - coupling;
    let printed_a0 = healthy * infected * virions - healthy * coupling;

    // Cofactor expansion of the full 3x3 determinant adds the terms routed
    // through rho I (H <- I), u A (V <- H) and the A B yield product.
    let a1 = printed_a1 - p.cure * a_lin - u * a_lin * b_lin;
    let a0 = printed_a0 - p.cure * a_lin * (virions - u * b_lin) + a_lin * coupling - u * a_lin * b_lin * infected;

    EstarCharacteristic {
        a_lin,
        b_lin,
        a2: healthy + infected + virions,
        a1,
        a0,
        printed_a1,
        printed_a0,
    }
}

/// Hurwitz test for `x^3 + a2 x^2 + a1 x + a0`: every root has negative
/// real part iff `a2 > 0`, `a0 > 0` and `a2 a1 > a0` (these force `a1 > 0`).
pub fn routh_hurwitz_cubic(a2: f64, a1: f64, a0: f64) -> bool {
    a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a2 * a1 > a0
}

/// The weaker condition stated with the infected-state theorem:
/// `a1 > 0` and `a1 a2 > a0`. Reports evaluate it on the printed
/// coefficients, as stated.
pub fn weak_cubic_condition(a2: f64, a1: f64, a0: f64) -> bool {
    a1 > 0.0 && a1 * a2 > a0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E0Mode {
    pub index: usize,
    pub mu_l: f64,
    pub characteristic: E0Characteristic,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstarMode {
    pub index: usize,
    pub mu_l: f64,
    pub characteristic: EstarCharacteristic,
    /// Full Hurwitz test on the exact coefficients.
    pub routh_ok: bool,
    /// [`weak_cubic_condition`] on the printed coefficients.
    pub weak_condition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub e0_modes: Vec<E0Mode>,
    pub e0_verdict: Verdict,
    /// Mode indices (1-based) with `C < 0`.
    pub e0_unstable_modes: Vec<usize>,
    pub estar_modes: Vec<EstarMode>,
    /// `None` when there is no infected equilibrium.
    pub estar_verdict: Option<Verdict>,
    pub estar_weak_condition: Option<bool>,
    pub r0: f64,
    pub tau0: f64,
    /// `tau0 < 1`: sufficient for global stability of `E0`.
    pub e0_global_condition: bool,
    /// `R0 > 1` with `u = 0`, `alpha0 = 1`, `alpha3 = alpha1 alpha2`.
    pub estar_global_condition: bool,
}

fn e0_mode_verdict(c: &E0Characteristic) -> Verdict {
    // B > 0 always, so the quadratic is Hurwitz iff C > 0
    if c.c.abs() < MARGINAL_BAND * c.c_scale {
        Verdict::Marginal
    } else if c.b > 0.0 && c.c > 0.0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    }
}

pub fn classify(p: &ModelParams, spectrum: &ModeSpectrum, eq: &EquilibriumReport) -> StabilityReport {
    let e0_modes: Vec<E0Mode> = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(n, &mu_l)| {
            let characteristic = e0_characteristic(p, mu_l);
            E0Mode {
                index: n + 1,
                mu_l,
                characteristic,
                verdict: e0_mode_verdict(&characteristic),
            }
        })
        .collect();
    let e0_unstable_modes: Vec<usize> = e0_modes
        .iter()
        .filter(|m| m.verdict == Verdict::Unstable)
        .map(|m| m.index)
        .collect();
    let e0_verdict = if !e0_unstable_modes.is_empty() {
        Verdict::Unstable
    } else if e0_modes.iter().any(|m| m.verdict == Verdict::Marginal) {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };

    let estar_modes: Vec<EstarMode> = match eq.infected_state() {
        Some(estar) => spectrum
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(n, &mu_l)| {
                let c = estar_characteristic(p, estar, mu_l);
                EstarMode {
                    index: n + 1,
                    mu_l,
                    characteristic: c,
                    routh_ok: routh_hurwitz_cubic(c.a2, c.a1, c.a0),
                    weak_condition: weak_cubic_condition(c.a2, c.printed_a1, c.printed_a0),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let (estar_verdict, estar_weak_condition) = if eq.infected.is_some() {
        let stable = estar_modes.iter().all(|m| m.routh_ok);
        let weak = estar_modes.iter().all(|m| m.weak_condition);
        (
            Some(if stable { Verdict::Stable } else { Verdict::Unstable }),
            Some(weak),
        )
    } else {
        (None, None)
    };

    let r0 = basic_reproduction_number(p);
    let tau0 = tau0(p);
    StabilityReport {
        e0_modes,
        e0_verdict,
        e0_unstable_modes,
        estar_modes,
        estar_verdict,
        estar_weak_condition,
        r0,
        tau0,
        e0_global_condition: tau0 < 1.0,
        estar_global_condition: r0 > 1.0 && p.lyapunov_restriction_holds(),
    }
}

pub const STABILITY_CSV_HEADER: &str =
    "equilibrium,mode,mu_l,decoupled_root,B,C,A_lin,B_lin,a2,a1,a0,printed_a1,printed_a0,routh_ok,weak_condition,verdict";

impl StabilityReport {
    /// One CSV row per (equilibrium, mode).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{STABILITY_CSV_HEADER}")?;
        for m in &self.e0_modes {
            let c = &m.characteristic;
            writeln!(
                w,
                "E0,{},{},{},{},{},,,,,,,,,,{}",
                m.index, m.mu_l, c.decoupled_root, c.b, c.c, m.verdict
            )?;
        }
        for m in &self.estar_modes {
            let c = &m.characteristic;
            let verdict = if m.routh_ok { Verdict::Stable } else { Verdict::Unstable };
            writeln!(
                w,
                "Estar,{},{},,,,{},{},{},{},{},{},{},{},{},{}",
                m.index,
                m.mu_l,
                c.a_lin,
                c.b_lin,
                c.a2,
                c.a1,
                c.a0,
                c.printed_a1,
                c.printed_a0,
                m.routh_ok,
                m.weak_condition,
                verdict
            )?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("R0".to_string(), self.r0.to_string()),
            ("tau0".to_string(), self.tau0.to_string()),
            ("E0.verdict".to_string(), self.e0_verdict.to_string()),
            (
                "E0.unstable_modes".to_string(),
                self.e0_unstable_modes
                    .iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            (
                "E0.global_condition_tau0_lt_1".to_string(),
                self.e0_global_condition.to_string(),
            ),
            ("modes".to_string(), self.e0_modes.len().to_string()),
        ];
        match self.estar_verdict {
            Some(v) => {
                out.push(("Estar.verdict".into(), v.to_string()));
                out.push((
                    "Estar.weak_condition".into(),
                    self.estar_weak_condition.unwrap_or(false).to_string(),
                ));
            }
            None => out.push(("Estar.verdict".into(), "absent".into())),
        }
        out.push(("Estar.global_condition".into(), self.estar_global_condition.to_string()));
        out
    }
}
