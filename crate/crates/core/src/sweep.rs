//! One-parameter threshold sweeps. Analysis only: no PDE runs.

use std::fmt::Write as _;

use crate::equilibria::EquilibriumReport;
use crate::error::{Error, Result};
use crate::model::{basic_reproduction_number, tau0, PARAM_KEYS};
use crate::scenario::Scenario;
use crate::stability::{classify, neumann_spectrum, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub r0: f64,
    pub tau0: f64,
    pub gamma: f64,
    pub e0_verdict: Verdict,
    pub estar_exists: bool,
    pub estar_verdict: Option<Verdict>,
}

pub const SWEEP_CSV_HEADER: &str = "value,R0,tau0,gamma,E0_verdict,Estar_exists,Estar_verdict";

/// Re-analyses `base` with `key` set to each of `values`, in order.
pub fn sweep(base: &Scenario, key: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if !PARAM_KEYS.contains(&key) {
        return Err(Error::UnknownKey(key.to_string()));
    }
    let spectrum = neumann_spectrum(base.length, base.l_max)?;
    values
        .iter()
        .map(|&value| {
            let mut p = base.params;
            p.set(key, value)?;
            let p = p.validated()?;
            let eq = EquilibriumReport::compute(&p)?;
            let st = classify(&p, &spectrum, &eq);
            Ok(SweepRow {
                value,
                r0: basic_reproduction_number(&p),
                tau0: tau0(&p),
                gamma: eq.gamma,
                e0_verdict: st.e0_verdict,
                estar_exists: eq.infected.is_some(),
                estar_verdict: st.estar_verdict,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let estar = r.estar_verdict.map_or_else(|| "absent".to_string(), |v| v.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.value, r.r0, r.tau0, r.gamma, r.e0_verdict, r.estar_exists, estar
        );
    }
    out
}

/// Parses `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::invalid("values", msg);
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| bad(format!("`{t}`: {e}")));
    match parts.as_slice() {
        [list] => list.split(',').map(|t| num(t.trim())).collect(),
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count.parse().map_err(|e| bad(format!("`{count}`: {e}")))?;
            match n {
                0 => Err(bad("count must be >= 1".into())),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => Err(bad(format!("expected a,b,c or start:stop:count, got `{spec}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, SET1, SET2};

    #[test]
    fn mu_sweep_crosses_threshold() {
        let rows = sweep(&builtin(SET1).unwrap(), "mu", &[2.0, 20.0]).unwrap();
        assert!(rows[0].r0 > 1.0 && rows[1].r0 < 1.0);
        assert!(rows[0].estar_exists && !rows[1].estar_exists);
        assert_eq!(rows[0].e0_verdict, Verdict::Unstable);
        assert_eq!(rows[1].e0_verdict, Verdict::Stable);
    }

    #[test]
    fn absorption_lowers_r0() {
        let rows = sweep(&builtin(SET2).unwrap(), "u", &[0.0, 1.0]).unwrap();
        assert!(rows[0].r0 > rows[1].r0);
    }

    #[test]
    fn beta_sweep_is_increasing() {
        let values = parse_values("0.01:2:50").unwrap();
        let rows = sweep(&builtin(SET2).unwrap(), "beta", &values).unwrap();
        assert!(rows.windows(2).all(|w| w[1].r0 > w[0].r0));
        assert_eq!(sweep_csv(&rows).lines().count(), 51);
    }

    #[test]
    fn bad_inputs() {
        let base = builtin(SET1).unwrap();
        assert!(matches!(sweep(&base, "gamma", &[1.0]), Err(Error::UnknownKey(_))));
        assert!(matches!(sweep(&base, "eta", &[1.5]), Err(Error::InvalidParam { .. })));
        assert_eq!(parse_values("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_values("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_values("0:1").is_err());
        assert!(parse_values("x").is_err());
    }
}
