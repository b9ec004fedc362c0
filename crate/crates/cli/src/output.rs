//! Trajectory CSV, run reports and the plotting script.

use std::fmt::Write as _;
use std::io::{self, Write};

use fuzzy_backstep::feasibility::{CandidateOutcome, PrerequisiteReport};
use fuzzy_backstep::sim::{ConstraintReport, Sample, Trajectory};
use serde_json::{json, Value};

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n + 1).map(|i| format!("z{i}")));
    cols.extend(["u", "u_delayed", "chi", "v"].map(String::from));
    cols.extend((1..=n).map(|i| format!("alpha{i}")));
    cols.extend((1..=n).map(|i| format!("delta_hat{i}")));
    cols.extend((1..=n).map(|i| format!("theta_hat{i}")));
    cols.push("Vs".into());
    cols.join(",")
}

fn csv_row(s: &Sample) -> String {
    let mut vals = vec![s.t];
    vals.extend(&s.x);
    vals.extend(&s.z);
    vals.extend([s.u, s.u_delayed, s.chi, s.v]);
    vals.extend(&s.alpha);
    vals.extend(&s.delta_hat);
    vals.extend(&s.theta_hat);
    vals.push(s.vs);
    vals.iter()
        .map(|v| format!("{v:.12e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Every `stride`-th sample, always including the last one.
pub fn write_csv(traj: &Trajectory, stride: usize, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{}", csv_header(traj.n))?;
    let last = traj.samples.len().saturating_sub(1);
    for (k, s) in traj.samples.iter().enumerate() {
        if k % stride.max(1) == 0 || k == last {
            writeln!(out, "{}", csv_row(s))?;
        }
    }
    Ok(())
}

/// Quantities reported after a simulation.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub horizon: f64,
    pub runtime_s: f64,
    pub constraints: ConstraintReport,
    pub tracking_first_quarter: f64,
    pub tracking_last_quarter: f64,
    pub tracking_sup: f64,
    pub vs_first_quarter: f64,
    pub vs_last_quarter: f64,
    pub vs_finite: bool,
    pub min_delta_hat: f64,
    pub min_theta_hat: f64,
    pub fls_fallbacks: usize,
    pub prerequisites: PrerequisiteReport,
}

impl RunSummary {
    pub fn new(
        name: &str,
        traj: &Trajectory,
        constraints: ConstraintReport,
        prerequisites: PrerequisiteReport,
        runtime_s: f64,
    ) -> Self {
        let horizon = traj.final_time();
        let (q1, q3) = (0.25 * horizon, 0.75 * horizon);
        let err = |s: &Sample| (s.x[0] - s.y_d).abs();
        let min_of = |f: fn(&Sample) -> &Vec<f64>| {
            traj.samples
                .iter()
                .flat_map(|s| f(s).iter().copied())
                .fold(f64::INFINITY, f64::min)
        };
        Self {
            name: name.to_string(),
            horizon,
            runtime_s,
            constraints,
            tracking_first_quarter: traj.sup_over(0.0, q1, err),
            tracking_last_quarter: traj.sup_over(q3, horizon, err),
            tracking_sup: traj.sup_over(0.0, horizon, err),
            vs_first_quarter: traj.sup_over(0.0, q1, |s| s.vs),
            vs_last_quarter: traj.sup_over(q3, horizon, |s| s.vs),
            vs_finite: traj.samples.iter().all(|s| s.vs.is_finite()),
            min_delta_hat: min_of(|s| &s.delta_hat),
            min_theta_hat: min_of(|s| &s.theta_hat),
            fls_fallbacks: traj.fls_fallbacks,
            prerequisites,
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let h = self.horizon;
        let _ = writeln!(s, "scenario: {}", self.name);
        let _ = writeln!(s, "horizon: {h} s, runtime: {:.2} s", self.runtime_s);
        let _ = writeln!(s, "constraints:");
        for r in &self.constraints.rows {
            let _ = writeln!(
                s,
                "  x{0}: sup|x{0}| = {1:.6} < k_c{0} = {2} [{3}]   sup|z{0}| = {4:.6} < k_b{0} = {5} [{6}]   rho{0} = sup|w{0}| = {7:.6}",
                r.index,
                r.sup_x,
                r.k_c,
                pass(r.x_ok),
                r.sup_z,
                r.k_b,
                pass(r.z_ok),
                r.rho
            );
        }
        let _ = writeln!(
            s,
            "tracking |y - y_d|: sup = {:.6}, sup on [0, {:.2}] = {:.6}, sup on [{:.2}, {h}] = {:.6}",
            self.tracking_sup,
            0.25 * h,
            self.tracking_first_quarter,
            0.75 * h,
            self.tracking_last_quarter
        );
        let _ = writeln!(
            s,
            "Vs: finite = {}, sup on first quarter = {:.6e}, sup on last quarter = {:.6e}",
            self.vs_finite, self.vs_first_quarter, self.vs_last_quarter
        );
        let _ = writeln!(
            s,
            "adaptation: min delta_hat = {:.6e}, min theta_hat = {:.6e}",
            self.min_delta_hat, self.min_theta_hat
        );
        let _ = writeln!(s, "fuzzy basis fallbacks: {}", self.fls_fallbacks);
        s.push_str(&prerequisites_text(&self.prerequisites));
        s
    }

    pub fn json(&self) -> Value {
        json!({
            "scenario": self.name,
            "horizon": self.horizon,
            "runtime_s": self.runtime_s,
            "constraints": self.constraints.rows.iter().map(|r| json!({
                "index": r.index,
                "sup_x": r.sup_x,
                "k_c": r.k_c,
                "x_margin": r.x_margin,
                "x_ok": r.x_ok,
                "sup_z": r.sup_z,
                "k_b": r.k_b,
                "z_margin": r.z_margin,
                "z_ok": r.z_ok,
                "rho": r.rho,
                "chain_bound": r.chain_bound,
                "chain_ok": r.chain_ok,
            })).collect::<Vec<_>>(),
            "all_constraints_ok": self.constraints.all_pass(),
            "tracking": {
                "sup": self.tracking_sup,
                "first_quarter": self.tracking_first_quarter,
                "last_quarter": self.tracking_last_quarter,
            },
            "vs": {
                "finite": self.vs_finite,
                "first_quarter": self.vs_first_quarter,
                "last_quarter": self.vs_last_quarter,
            },
            "min_delta_hat": self.min_delta_hat,
            "min_theta_hat": self.min_theta_hat,
            "fls_fallbacks": self.fls_fallbacks,
            "prerequisites": prerequisites_json(&self.prerequisites),
        })
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn prerequisites_text(r: &PrerequisiteReport) -> String {
    let mut s = format!("prerequisites (A0 = sup|y_d| = {:.6}):\n", r.a0);
    for c in &r.checks {
        let tag = if c.ok { "ok" } else { "VIOLATED" };
        let _ = writeln!(s, "  {}: margin {:.6} [{tag}]", c.label, c.margin);
    }
    s
}

pub fn prerequisites_json(r: &PrerequisiteReport) -> Value {
    json!({
        "a0": r.a0,
        "checks": r.checks.iter().map(|c| json!({"label": c.label, "margin": c.margin, "ok": c.ok})).collect::<Vec<_>>(),
    })
}

fn sigma_label(n: usize) -> Vec<String> {
    (1..n)
        .map(|j| format!("K{j}"))
        .chain((2..=n).map(|j| format!("kb{j}")))
        .collect()
}

/// Candidate table plus the selection line.
pub fn feasibility_text(
    n: usize,
    outcomes: &[CandidateOutcome],
    best: Option<&CandidateOutcome>,
    base_prerequisites: &PrerequisiteReport,
    best_prerequisites: Option<&PrerequisiteReport>,
) -> String {
    let mut s = String::new();
    let labels = sigma_label(n);
    let _ = writeln!(
        s,
        "candidates ({}): [{}]",
        outcomes.len(),
        labels.join(", ")
    );
    for o in outcomes {
        let margins: Vec<String> = o.margins.iter().map(ToString::to_string).collect();
        let status = if o.feasible() {
            "feasible"
        } else {
            "infeasible"
        };
        let _ = write!(
            s,
            "  {:?} N = {:.4} {status}; {}",
            o.sigma,
            o.objective,
            margins.join("; ")
        );
        if let Some(r) = &o.estimate.rejection {
            let _ = write!(s, "; rejected: {r}");
        }
        s.push('\n');
    }
    match best {
        Some(b) => {
            let _ = writeln!(s, "selected: {:?} with N = {:.4}", b.sigma, b.objective);
        }
        None => {
            let _ = writeln!(s, "selected: none (empty feasible set)");
        }
    }
    s.push_str("scenario gains ");
    s.push_str(&prerequisites_text(base_prerequisites));
    if let Some(p) = best_prerequisites {
        s.push_str("selected gains ");
        s.push_str(&prerequisites_text(p));
    }
    s
}

pub fn feasibility_json(
    n: usize,
    outcomes: &[CandidateOutcome],
    best: Option<&CandidateOutcome>,
    base_prerequisites: &PrerequisiteReport,
    best_prerequisites: Option<&PrerequisiteReport>,
) -> Value {
    let candidate = |o: &CandidateOutcome| {
        json!({
            "sigma": o.sigma,
            "objective": o.objective,
            "feasible": o.feasible(),
            "rho": o.estimate.rho,
            "z0": o.estimate.z0,
            "rejection": o.estimate.rejection,
            "margins": o.margins.iter().map(|m| json!({"label": m.label, "margin": m.margin})).collect::<Vec<_>>(),
        })
    };
    json!({
        "sigma_labels": sigma_label(n),
        "candidates": outcomes.iter().map(candidate).collect::<Vec<_>>(),
        "selected": best.map(candidate),
        "scenario_prerequisites": prerequisites_json(base_prerequisites),
        "selected_prerequisites": best_prerequisites.map(prerequisites_json),
    })
}

/// Matplotlib script drawing the six standard figures from `trajectory.csv`.
pub fn plot_script(n: usize, k_c: &[f64], k_b: &[f64]) -> String {
    let last = n;
    format!(
        r#"#!/usr/bin/env python3
"""Figures for one run. Usage: python3 plot.py [trajectory.csv]"""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

K_C = {k_c:?}
K_B = {k_b:?}
N = {n}

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("trajectory.csv")
with open(path) as fh:
    rows = list(csv.DictReader(fh))
col = {{k: [float(r[k]) for r in rows] for k in rows[0]}}
t = col["t"]
out = path.parent


def band(ax, bound, label):
    ax.axhline(bound, color="r", ls="--", lw=0.8, label=label)
    ax.axhline(-bound, color="r", ls="--", lw=0.8)


def save(fig, ax, name):
    ax.set_xlabel("t (s)")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / name, dpi=150)
    plt.close(fig)


fig, ax = plt.subplots()
y_d = [x - z for x, z in zip(col["x1"], col["z1"])]
ax.plot(t, col["x1"], label="y")
ax.plot(t, y_d, "--", label="y_d")
band(ax, K_C[0], "k_c1")
save(fig, ax, "fig1_output.png")

fig, ax = plt.subplots()
for i in range(2, N + 1):
    ax.plot(t, col[f"x{{i}}"], label=f"x{{i}}")
    band(ax, K_C[i - 1], f"k_c{{i}}")
save(fig, ax, "fig2_states.png")

fig, ax = plt.subplots()
for i in range(1, N + 1):
    ax.plot(t, col[f"z{{i}}"], label=f"z{{i}}")
    band(ax, K_B[i - 1], f"k_b{{i}}")
save(fig, ax, "fig3_errors.png")

fig, ax = plt.subplots()
ax.plot(t, col["v"], label="v")
save(fig, ax, "fig4_v.png")

fig, ax = plt.subplots()
ax.plot(t, col["u"], label="u(t)")
ax.plot(t, col["u_delayed"], "--", label="u(t - tau)")
save(fig, ax, "fig5_input.png")

fig, ax = plt.subplots()
for i in range(1, N + 1):
    ax.plot(t, col[f"delta_hat{{i}}"], label=f"delta_hat{{i}}")
    ax.plot(t, col[f"theta_hat{{i}}"], "--", label=f"theta_hat{{i}}")
save(fig, ax, "fig6_adaptation.png")

print("tracking error at end:", abs(col["z1"][-1]), "z{last1} at end:", col["z{last1}"][-1])
"#,
        last1 = last + 1,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_for_second_order() {
        assert_eq!(
            csv_header(2),
            "t,x1,x2,z1,z2,z3,u,u_delayed,chi,v,alpha1,alpha2,delta_hat1,delta_hat2,theta_hat1,theta_hat2,Vs"
        );
    }

    #[test]
    fn header_for_first_order() {
        assert_eq!(
            csv_header(1),
            "t,x1,z1,z2,u,u_delayed,chi,v,alpha1,delta_hat1,theta_hat1,Vs"
        );
    }

    #[test]
    fn plot_script_mentions_all_figures() {
        let s = plot_script(2, &[3.8, 6.0], &[2.0, 5.0]);
        for k in 1..=6 {
            assert!(s.contains(&format!("fig{k}_")));
        }
        assert!(s.contains("K_C = [3.8, 6.0]"));
    }
}
