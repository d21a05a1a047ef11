//! Scenario runs: analysis, PDE integration with monitors, Lyapunov
//! traces, and the emitted `fields.csv`, `summary.csv`, `stability.csv`
//! and `report.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::equilibria::EquilibriumReport;
use crate::error::{Error, ErrorCategory, Result};
use crate::lyapunov::{decay_check, DecayCheck, LyapunovTrace};
use crate::model::{derived, DerivedQuantities};
use crate::monitors::build_monitors;
use crate::scenario::Scenario;
use crate::solver::{self, OdeTolerance, Trajectory};
use crate::stability::{classify, neumann_spectrum, StabilityReport};

/// Tolerance for the monotone-decay checks on `L1`, `L2`.
pub const DECAY_TOL: f64 = 1e-8;

/// Per-field min / mean / max over the grid at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalSummary {
    pub t: f64,
    pub h: FieldStats,
    pub i: FieldStats,
    pub v: FieldStats,
    pub distance_to_e0: f64,
    pub distance_to_estar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorVerdicts {
    /// `(monitor, violation count)` for every enabled monitor.
    pub violations: Vec<(String, usize)>,
    pub first_violation: Option<String>,
    pub l1_decay: Option<DecayCheck>,
    pub l2_decay: Option<DecayCheck>,
    /// Sup-norm gap to the ODE reference over all snapshots; only for
    /// homogeneous initial data.
    pub ode_max_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub derived: DerivedQuantities,
    pub equilibria: EquilibriumReport,
    pub stability: StabilityReport,
    pub trajectory: Option<Trajectory>,
    pub lyapunov: Option<LyapunovTrace>,
    pub final_summary: Option<FinalSummary>,
    pub monitors: Option<MonitorVerdicts>,
    pub outputs: Vec<PathBuf>,
    /// Set when integration failed; the analysis fields are still valid.
    pub failure: Option<(ErrorCategory, String)>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn monitor_violation_count(&self) -> usize {
        self.monitors
            .as_ref()
            .map_or(0, |m| m.violations.iter().map(|(_, n)| n).sum())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut block = |title: &str, kv: Vec<(String, String)>| {
            let _ = writeln!(out, "[{title}]");
            for (k, v) in kv {
                let _ = writeln!(out, "{k}={v}");
            }
            out.push('\n');
        };
        block("scenario", vec![("name".into(), self.scenario.clone())]);
        let d = &self.derived;
        block(
            "derived",
            vec![
                ("Lambda".into(), d.capacity.to_string()),
                ("gamma".into(), d.net_yield.to_string()),
                ("Dmax".into(), d.diffusion_max.to_string()),
                ("delta2".into(), d.cell_decay.to_string()),
                ("Hm".into(), d.cells_bound.to_string()),
                ("Vm".into(), d.virions_bound.to_string()),
                ("R0".into(), d.r0.to_string()),
                ("tau0".into(), d.tau0.to_string()),
            ],
        );
        block("equilibria", self.equilibria.to_kv());
        block("stability", self.stability.to_kv());
        if let Some(traj) = &self.trajectory {
            block(
                "solver",
                vec![
                    ("dt".into(), traj.dt.to_string()),
                    ("steps".into(), traj.steps.to_string()),
                    ("snapshot_stride".into(), traj.stride.to_string()),
                    ("snapshots".into(), traj.snapshots.len().to_string()),
                    ("clamped_total".into(), traj.clamped_total.to_string()),
                ],
            );
        }
        if let Some(f) = &self.final_summary {
            let mut kv = vec![("t".to_string(), f.t.to_string())];
            for (name, s) in [("H", f.h), ("I", f.i), ("V", f.v)] {
                kv.push((format!("{name}.min"), s.min.to_string()));
                kv.push((format!("{name}.mean"), s.mean.to_string()));
                kv.push((format!("{name}.max"), s.max.to_string()));
            }
            kv.push(("distance_to_E0".into(), f.distance_to_e0.to_string()));
            if let Some(dist) = f.distance_to_estar {
                kv.push(("distance_to_Estar".into(), dist.to_string()));
            }
            block("final", kv);
        }
        if let Some(m) = &self.monitors {
            let mut kv: Vec<(String, String)> = m
                .violations
                .iter()
                .map(|(name, n)| (format!("{name}.violations"), n.to_string()))
                .collect();
            if let Some(first) = &m.first_violation {
                kv.push(("first_violation".into(), first.clone()));
            }
            let decay = |c: &Option<DecayCheck>| match c {
                Some(c) if c.ok => "pass".to_string(),
                Some(c) => format!("fail@{}", c.first_violation.unwrap_or(0)),
                None => "n/a".to_string(),
            };
            kv.push(("L1.decay".into(), decay(&m.l1_decay)));
            kv.push(("L2.decay".into(), decay(&m.l2_decay)));
            if let Some(dev) = m.ode_max_deviation {
                kv.push(("ode_max_deviation".into(), format!("{dev:e}")));
            }
            block("monitors", kv);
        }
        if let Some((cat, msg)) = &self.failure {
            block(
                "failure",
                vec![("category".into(), format!("{cat:?}")), ("message".into(), msg.clone())],
            );
        }
        if !self.outputs.is_empty() {
            block(
                "outputs",
                self.outputs
                    .iter()
                    .map(|p| {
                        let name = p
                            .file_name()
                            .map(|n| n.to_string_lossy().into_owned())
                            .unwrap_or_default();
                        (name, p.display().to_string())
                    })
                    .collect(),
            );
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn stats(grid: &solver::Grid1D, values: &[f64]) -> FieldStats {
    FieldStats {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        mean: grid.integrate(values) / grid.length,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// `t,x,H,I,V` for every snapshot and node.
pub fn fields_csv(s: &Scenario, traj: &Trajectory) -> Result<String> {
    let xs = s.grid()?.positions();
    let mut out = String::from("t,x,H,I,V\n");
    for snap in &traj.snapshots {
        for (k, x) in xs.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", snap.t, x, snap.h[k], snap.i[k], snap.v[k]);
        }
    }
    Ok(out)
}

/// One row per snapshot: field statistics, monitor columns, Lyapunov rates.
pub fn summary_csv(s: &Scenario, traj: &Trajectory, lyap: Option<&LyapunovTrace>) -> Result<String> {
    let grid = s.grid()?;
    let mut header = vec!["t".to_string()];
    for f in ["H", "I", "V"] {
        for st in ["min", "mean", "max"] {
            header.push(format!("{f}_{st}"));
        }
    }
    header.extend(traj.monitor_columns.iter().cloned());
    if lyap.is_some() {
        header.push("dL1dt".into());
        header.push("dL2dt".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for (n, snap) in traj.snapshots.iter().enumerate() {
        let mut row = vec![snap.t.to_string()];
        for values in [&snap.h, &snap.i, &snap.v] {
            let st = stats(&grid, values);
            row.extend([st.min, st.mean, st.max].map(fmt_num));
        }
        row.extend(traj.monitor_rows[n].iter().copied().map(fmt_num));
        if let Some(l) = lyap {
            row.push(fmt_num(l.dl1dt[n]));
            row.push(fmt_num(l.dl2dt[n]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn ode_deviation(s: &Scenario, traj: &Trajectory) -> Result<Option<f64>> {
    let Some(s0) = s.init.homogeneous_value() else {
        return Ok(None);
    };
    let times = traj.times();
    let reference = solver::ode_solve_at(&s.params, s0, &times, OdeTolerance::default())?;
    let dev = traj
        .snapshots
        .iter()
        .zip(&reference)
        .map(|(snap, r)| snap.distance_to(*r))
        .fold(0.0, f64::max);
    Ok(Some(dev))
}

fn lyapunov_trace(s: &Scenario, traj: &Trajectory) -> Option<LyapunovTrace> {
    let l1 = traj.column("L1")?;
    let l2 = traj.column("L2")?;
    Some(LyapunovTrace::from_series(
        traj.times(),
        l1,
        l2,
        s.params.lyapunov_restriction_holds(),
    ))
}

fn verdicts(s: &Scenario, traj: &Trajectory, lyap: Option<&LyapunovTrace>) -> Result<MonitorVerdicts> {
    let violations = s
        .monitors
        .iter()
        .map(|k| {
            let n = traj.violations.iter().filter(|v| v.monitor == k.as_str()).count();
            (k.as_str().to_string(), n)
        })
        .collect();
    let first_violation = traj
        .violations
        .first()
        .map(|v| format!("{} at t={}: {}", v.monitor, v.t, v.detail));
    let (l1_decay, l2_decay) = match lyap {
        Some(l) => {
            let l1 = decay_check(&l.l1, DECAY_TOL).ok();
            let l2_vals = l.l2_defined();
            let l2 = if l.restriction_ok && l2_vals.len() >= 2 {
                decay_check(&l2_vals, DECAY_TOL).ok()
            } else {
                None
            };
            (l1, l2)
        }
        None => (None, None),
    };
    Ok(MonitorVerdicts {
        violations,
        first_violation,
        l1_decay,
        l2_decay,
        ode_max_deviation: ode_deviation(s, traj)?,
    })
}

fn final_summary(s: &Scenario, traj: &Trajectory, eq: &EquilibriumReport) -> Result<FinalSummary> {
    let grid = s.grid()?;
    let f = traj.final_state();
    Ok(FinalSummary {
        t: f.t,
        h: stats(&grid, &f.h),
        i: stats(&grid, &f.i),
        v: stats(&grid, &f.v),
        distance_to_e0: f.distance_to(eq.uninfected),
        distance_to_estar: eq.infected_state().map(|e| f.distance_to(e)),
    })
}

/// Runs the scenario and, when `out_dir` is given, writes the output files
/// there. Integration failures yield `Ok` with `failure` set and the
/// analysis sections filled in; configuration errors are returned as `Err`.
pub fn run_scenario(s: &Scenario, out_dir: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let p = &s.params;
    let grid = s.grid()?;
    let init = s.init.field(&grid);
    let dq = derived(p, init.initial_bounds());
    let eq = EquilibriumReport::compute(p)?;
    let spectrum = neumann_spectrum(s.length, s.l_max)?;
    let stability = classify(p, &spectrum, &eq);

    let mut report = RunReport {
        scenario: s.name.clone(),
        derived: dq,
        equilibria: eq,
        stability,
        trajectory: None,
        lyapunov: None,
        final_summary: None,
        monitors: None,
        outputs: Vec::new(),
        failure: None,
    };

    let mut monitors = build_monitors(&s.monitors, p, report.equilibria.infected_state());
    match solver::run(p, &grid, &init, &s.solver, &mut monitors) {
        Ok(traj) => {
            let lyap = lyapunov_trace(s, &traj);
            report.monitors = Some(verdicts(s, &traj, lyap.as_ref())?);
            report.final_summary = Some(final_summary(s, &traj, &report.equilibria)?);
            report.lyapunov = lyap;
            report.trajectory = Some(traj);
        }
        Err(e @ (Error::InvalidParam { .. } | Error::Grid(_))) => return Err(e),
        Err(e) => report.failure = Some((e.category(), e.to_string())),
    }

    if let Some(dir) = out_dir {
        write_outputs(s, &mut report, dir)?;
    }
    Ok(report)
}

fn write_outputs(s: &Scenario, report: &mut RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut stab = Vec::new();
    report.stability.write_csv(&mut stab)?;
    let stab_path = dir.join("stability.csv");
    fs::write(&stab_path, stab)?;
    report.outputs.push(stab_path);
    if let Some(traj) = &report.trajectory {
        let fields = dir.join("fields.csv");
        fs::write(&fields, fields_csv(s, traj)?)?;
        let summary = dir.join("summary.csv");
        fs::write(&summary, summary_csv(s, traj, report.lyapunov.as_ref())?)?;
        report.outputs.push(fields);
        report.outputs.push(summary);
    }
    let text = dir.join("report.txt");
    report.outputs.push(text.clone());
    fs::write(&text, report.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, SET1};

    fn short(name: &str, t_end: f64) -> Scenario {
        let mut s = builtin(name).unwrap();
        s.n_cells = 41;
        s.solver.t_end = t_end;
        s
    }

    #[test]
    fn set1_report_sections() {
        let s = short(SET1, 0.5);
        let r = run_scenario(&s, None).unwrap();
        assert!(r.succeeded());
        let text = r.to_text();
        for section in ["[derived]", "[equilibria]", "[stability]", "[final]", "[monitors]"] {
            assert!(text.contains(section), "{section}");
        }
        assert!(text.contains("Estar.exists=false"));
        assert!(text.contains("E0.H=10\n"));
        assert_eq!(r.monitor_violation_count(), 0);
        let m = r.monitors.unwrap();
        let dev = m.ode_max_deviation.unwrap();
        assert!(dev < 1e-6, "{dev}");
        assert!(m.l2_decay.is_none());
    }

    #[test]
    fn outputs_written_and_deterministic() {
        let s = short(SET1, 0.2);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_scenario(&s, Some(a.path())).unwrap();
        run_scenario(&s, Some(b.path())).unwrap();
        assert_eq!(ra.outputs.len(), 4);
        for f in ["fields.csv", "summary.csv", "stability.csv"] {
            let x = fs::read(a.path().join(f)).unwrap();
            assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let summary = fs::read_to_string(a.path().join("summary.csv")).unwrap();
        let header = summary.lines().next().unwrap();
        for col in ["t", "H_min", "V_max", "L1", "L2", "dL1dt", "dL2dt", "Sbar"] {
            assert!(header.split(',').any(|c| c == col), "{col}");
        }
        let fields = fs::read_to_string(a.path().join("fields.csv")).unwrap();
        assert_eq!(fields.lines().count(), 1 + 41 * ra.trajectory.unwrap().snapshots.len());
    }

    #[test]
    fn solver_failure_gives_partial_report() {
        let mut s = short(SET1, 0.5);
        s.solver.dt = crate::solver::TimeStep::Fixed(0.4);
        let r = run_scenario(&s, None).unwrap();
        let (cat, msg) = r.failure.clone().unwrap();
        assert_eq!(cat, ErrorCategory::Solver);
        assert!(msg.contains("time step"), "{msg}");
        assert!(r.trajectory.is_none());
        assert!(r.to_text().contains("[failure]"));
        assert!((r.derived.r0 - 0.943361).abs() < 1e-5);
    }
}
