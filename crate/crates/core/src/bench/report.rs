use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Method, RunRecord, TimingRecord};

/// Mean over seeds with a normal-approximation 95% half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub mean: f64,
    pub ci95: f64,
}

impl Rate {
    /// `per_seed` holds one value per seed.
    pub fn over_seeds(per_seed: &[f64]) -> Self {
        let n = per_seed.len() as f64;
        if per_seed.is_empty() {
            return Self { mean: 0.0, ci95: 0.0 };
        }
        let mean = per_seed.iter().sum::<f64>() / n;
        if per_seed.len() < 2 {
            return Self { mean, ci95: 0.0 };
        }
        let var = per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            ci95: 1.96 * (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub complexity: usize,
    pub runs: usize,
    pub planning: f64,
    pub execution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub planning: Rate,
    pub execution: Rate,
    pub mean_generated: f64,
    pub mean_expanded: f64,
    /// Mean plan length over planning successes.
    pub mean_plan_length: f64,
    pub errors: usize,
    pub by_complexity: Vec<ComplexityRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub methods: Vec<MethodSummary>,
}

impl Report {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

fn frac(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn summarize(method: Method, runs: &[&RunRecord]) -> MethodSummary {
    let mut by_seed: BTreeMap<u64, (usize, usize, usize)> = BTreeMap::new();
    let mut by_cx: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for r in runs {
        for e in [
            by_seed.entry(r.seed).or_default(),
            by_cx.entry(r.complexity).or_default(),
        ] {
            e.0 += 1;
            e.1 += usize::from(r.planning_success);
            e.2 += usize::from(r.execution_success);
        }
    }
    let plan: Vec<f64> = by_seed.values().map(|(n, p, _)| frac(*p, *n)).collect();
    let exec: Vec<f64> = by_seed.values().map(|(n, _, e)| frac(*e, *n)).collect();
    let n = runs.len();
    let planned: Vec<_> = runs.iter().filter(|r| r.planning_success).collect();
    MethodSummary {
        method,
        runs: n,
        planning: Rate::over_seeds(&plan),
        execution: Rate::over_seeds(&exec),
        mean_generated: frac(runs.iter().map(|r| r.generated).sum(), n),
        mean_expanded: frac(runs.iter().map(|r| r.expanded).sum(), n),
        mean_plan_length: frac(planned.iter().map(|r| r.plan_length).sum(), planned.len()),
        errors: runs.iter().filter(|r| r.error.is_some()).count(),
        by_complexity: by_cx
            .into_iter()
            .map(|(complexity, (n, p, e))| ComplexityRow {
                complexity,
                runs: n,
                planning: frac(p, n),
                execution: frac(e, n),
            })
            .collect(),
    }
}

/// Aggregates run records per method, in first-appearance order.
pub fn build_report(name: &str, runs: &[RunRecord]) -> Report {
    let mut order: Vec<Method> = Vec::new();
    for r in runs {
        if !order.contains(&r.method) {
            order.push(r.method);
        }
    }
    let methods = order
        .into_iter()
        .map(|m| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.method == m).collect();
            summarize(m, &mine)
        })
        .collect();
    Report {
        name: name.to_string(),
        methods,
    }
}

fn label(m: Method) -> String {
    match m {
        Method::NoMde => format!("{m} (extension)"),
        _ => m.to_string(),
    }
}

pub fn render_markdown(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n", report.name);
    let _ = writeln!(
        s,
        "| method | runs | planning success | execution success | generated | expanded | plan length | errors |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for m in &report.methods {
        let _ = writeln!(
            s,
            "| {} | {} | {:.3} ± {:.3} | {:.3} ± {:.3} | {:.1} | {:.1} | {:.2} | {} |",
            label(m.method),
            m.runs,
            m.planning.mean,
            m.planning.ci95,
            m.execution.mean,
            m.execution.ci95,
            m.mean_generated,
            m.mean_expanded,
            m.mean_plan_length,
            m.errors
        );
    }
    let _ = writeln!(s, "\n## Success by complexity\n");
    let _ = writeln!(s, "| method | complexity | runs | planning | execution |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for m in &report.methods {
        for row in &m.by_complexity {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.3} | {:.3} |",
                label(m.method),
                row.complexity,
                row.runs,
                row.planning,
                row.execution
            );
        }
    }
    s
}

/// Mean and max search time per method.
pub fn render_timing(timings: &[TimingRecord]) -> String {
    let mut per: Vec<(Method, Vec<f64>)> = Vec::new();
    for t in timings {
        match per.iter_mut().find(|(m, _)| *m == t.method) {
            Some((_, v)) => v.push(t.seconds),
            None => per.push((t.method, vec![t.seconds])),
        }
    }
    let mut s = String::from("| method | runs | mean seconds | max seconds |\n|---|---|---|---|\n");
    for (m, v) in per {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max = v.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(s, "| {} | {} | {:.4} | {:.4} |", label(m), v.len(), mean, max);
    }
    s
}
