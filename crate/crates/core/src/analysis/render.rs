use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnalysisReport, RateCell, RewardStratum};
use crate::annotation::MainReason;
use crate::triage::Strategy;

/// Percent with one decimal.
fn pct(rate: f64) -> String {
    format!("{:.1}%", rate * 100.0)
}

/// Interval endpoint with two decimals and no leading zero; an endpoint that
/// rounds to one is shown as "1.0".
fn endpoint(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "1.00" {
        "1.0".to_string()
    } else {
        s.trim_start_matches('0').to_string()
    }
}

fn ci_text(cell: &RateCell) -> String {
    match cell.ci {
        Some([lo, hi]) => format!("[{}, {}]", endpoint(lo), endpoint(hi)),
        None => "-".to_string(),
    }
}

fn rate_text(cell: &RateCell) -> String {
    let mut s = cell.rate.map_or_else(|| "-".to_string(), pct);
    if cell.above_random {
        s.push('*');
    }
    if cell.above_heuristic {
        s.push('\u{2020}');
    }
    s
}

/// Left-aligned columns separated by two spaces, trailing space trimmed.
/// Returns the rendered lines and the start offset of every column.
fn layout(rows: &[Vec<String>]) -> (Vec<String>, Vec<usize>) {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut starts = Vec::with_capacity(cols);
    let mut at = 0;
    for w in &widths {
        starts.push(at);
        at += w + 2;
    }
    let lines = rows
        .iter()
        .map(|r| {
            let mut line = String::new();
            for (i, c) in r.iter().enumerate() {
                let _ = write!(line, "{:<width$}  ", c, width = widths[i]);
            }
            line.trim_end().to_string()
        })
        .collect();
    (lines, starts)
}

fn spanning_line(starts: &[usize], titles: &[(usize, &str)]) -> String {
    let mut line = String::new();
    for (col, title) in titles {
        let at = starts[*col];
        let len = line.chars().count();
        if len < at {
            line.push_str(&" ".repeat(at - len));
        } else if len > 0 {
            line.push(' ');
        }
        line.push_str(title);
    }
    line
}

fn confidence(alpha: f64) -> String {
    let c = (1.0 - alpha) * 100.0;
    if (c - c.round()).abs() < 1e-9 {
        format!("{c:.0}%")
    } else {
        format!("{c}%")
    }
}

fn present(r: &AnalysisReport) -> Vec<Strategy> {
    Strategy::ALL.into_iter().filter(|s| r.strategies.contains_key(s)).collect()
}

/// Table 1 (rates by reward stratum) and Table 2 (main reasons).
pub fn render_tables(r: &AnalysisReport) -> String {
    let conf = confidence(r.alpha);
    let mut out = String::new();
    out.push_str("Table 1. Informativeness rate by sampling strategy (majority vote)\n\n");
    let mut rows = vec![vec!["Strategy".to_string()]];
    for _ in RewardStratum::ALL {
        rows[0].extend(["N".to_string(), "Rate".to_string(), format!("{conf} CI")]);
    }
    for s in present(r) {
        let res = &r.strategies[&s];
        let mut row = vec![s.to_string()];
        for st in RewardStratum::ALL {
            let c = res.cell(st);
            row.extend([c.n.to_string(), rate_text(c), ci_text(c)]);
        }
        rows.push(row);
    }
    let (lines, starts) = layout(&rows);
    out.push_str(&spanning_line(
        &starts,
        &[(1, "Overall"), (4, "Failed (reward = 0)"), (7, "Successful (reward = 1)")],
    ));
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    let _ = writeln!(out, "\nCI: Clopper-Pearson {conf} interval. Fisher's exact test, two-sided.");
    out.push_str("* Significantly higher than Random (p < 0.05).  \u{2020} Significantly higher than Heuristic (p < 0.05).\n");

    out.push_str("\nTable 2. Distribution of main reason among developer-informative trajectories (majority vote)\n\n");
    let mut rows = vec![std::iter::once("Strategy (N informative)".to_string())
        .chain(MainReason::ALL.iter().map(|m| m.title().to_string()))
        .collect::<Vec<_>>()];
    for s in present(r) {
        let res = &r.strategies[&s];
        let total = res.overall.k;
        let mut row = vec![format!("{s} ({total})")];
        for m in MainReason::ALL {
            let n = res.reasons.get(&m).copied().unwrap_or(0);
            let share = if total == 0 { "-".to_string() } else { pct(n as f64 / total as f64) };
            row.push(format!("{n} ({share})"));
        }
        rows.push(row);
    }
    for l in layout(&rows).0 {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Both tables followed by tests, standardization, efficiency, agreement and
/// the per-domain breakdown.
pub fn render_report(r: &AnalysisReport) -> String {
    let mut out = render_tables(r);

    out.push_str("\nPairwise comparisons (Fisher's exact test, two-sided)\n\n");
    let mut rows = vec![vec!["Stratum".to_string(), "Comparison".to_string(), "p".to_string()]];
    for c in &r.comparisons {
        let stratum = match c.stratum {
            RewardStratum::Overall => "overall",
            RewardStratum::Failed => "failed",
            RewardStratum::Successful => "successful",
        };
        rows.push(vec![stratum.to_string(), format!("{} vs {}", c.strategy, c.baseline), p_text(c.p_value)]);
    }
    for l in layout(&rows).0 {
        let _ = writeln!(out, "{l}");
    }

    if let Some(mix) = r.reference_mix {
        let _ = writeln!(
            out,
            "\nStandardized rates (reference mix: {} failed, {} successful)\n",
            pct(mix.failed),
            pct(mix.successful)
        );
        let mut rows = vec![vec!["Strategy".to_string(), "Raw".to_string(), "Standardized".to_string()]];
        for s in present(r) {
            let res = &r.strategies[&s];
            rows.push(vec![
                s.to_string(),
                res.overall.rate.map_or_else(|| "-".into(), pct),
                res.standardized_rate.map_or_else(|| "-".into(), pct),
            ]);
        }
        for l in layout(&rows).0 {
            let _ = writeln!(out, "{l}");
        }
    }

    if let Some(e) = &r.efficiency {
        out.push_str("\nAnnotation efficiency\n\n");
        let mut rows = vec![vec!["Strategy".to_string(), "Labels per informative".to_string(), "Gain vs Random".to_string()]];
        for s in present(r) {
            let lpi = e.labels_per_informative.get(s.as_str()).map_or_else(|| "-".into(), |v| format!("{v:.2}"));
            let gain = e.gain(s.as_str(), "Random").map_or_else(|| "-".into(), |g| format!("{g:.2}x"));
            rows.push(vec![s.to_string(), lpi, gain]);
        }
        for l in layout(&rows).0 {
            let _ = writeln!(out, "{l}");
        }
    }

    let a = &r.agreement;
    let flag = |d: bool| if d { " (degenerate)" } else { "" };
    let _ = writeln!(out, "\nAgreement on developer-informative ({} items, {} raters)\n", a.items, r.annotators.len());
    let _ = writeln!(out, "Gwet AC1         {:.3}{}", a.ac1.value, flag(a.ac1.degenerate));
    let _ = writeln!(out, "Fleiss kappa     {:.3}{}", a.kappa.value, flag(a.kappa.degenerate));
    let _ = writeln!(out, "Prevalence index {:.3}", a.prevalence_index);
    let _ = writeln!(out, "Bias index       {:.3}", a.bias_index);
    let rates: Vec<String> = a.rater_yes_rates.iter().map(|(k, v)| format!("{k} {v:.2}")).collect();
    let _ = writeln!(out, "Rater YES rates  {}", rates.join(", "));
    match &r.reason_agreement {
        Some(m) => {
            let _ = writeln!(out, "\nAgreement on main reason (items all raters judged informative, N = {})\n", m.items);
            let _ = writeln!(out, "Gwet AC1         {:.3}{}", m.ac1.value, flag(m.ac1.degenerate));
            let _ = writeln!(out, "Fleiss kappa     {:.3}{}", m.kappa.value, flag(m.kappa.degenerate));
        }
        None => out.push_str("\nAgreement on main reason: no item was judged informative by every rater\n"),
    }

    if !r.domains.is_empty() {
        out.push_str("\nInformativeness by domain\n\n");
        let conf = confidence(r.alpha);
        let mut rows = vec![vec!["Domain".to_string(), "Strategy".into(), "N".into(), "Rate".into(), format!("{conf} CI")]];
        for (d, per) in &r.domains {
            for s in Strategy::ALL {
                if let Some(c) = per.get(&s) {
                    rows.push(vec![d.clone(), s.to_string(), c.n.to_string(), c.rate.map_or_else(|| "-".into(), pct), ci_text(c)]);
                }
            }
        }
        for l in layout(&rows).0 {
            let _ = writeln!(out, "{l}");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub path: String,
    pub expected: Value,
    pub actual: Option<Value>,
}

fn lookup<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |v, seg| match v {
        Value::Object(m) => m.get(seg),
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

/// Compare a report against expected values. The golden document is
/// `{"tolerance": t, "expect": {"dotted.path": value, ...}}`; a value may
/// also be `{"value": v, "tolerance": t}` to override the default.
/// Numbers compare within tolerance, everything else exactly.
pub fn check_against(report: &AnalysisReport, golden: &Value) -> Result<Vec<Mismatch>, String> {
    let root = serde_json::to_value(report).map_err(|e| e.to_string())?;
    let default_tol = golden.get("tolerance").and_then(Value::as_f64).unwrap_or(0.0);
    let expect = golden.get("expect").and_then(Value::as_object).ok_or("golden file needs an \"expect\" object")?;
    let mut out = Vec::new();
    for (path, want) in expect {
        let (expected, tol) = match want {
            Value::Object(m) if m.contains_key("value") => {
                (m["value"].clone(), m.get("tolerance").and_then(Value::as_f64).unwrap_or(default_tol))
            }
            v => (v.clone(), default_tol),
        };
        let actual = lookup(&root, path);
        let ok = match (actual, &expected) {
            (Some(Value::Number(a)), Value::Number(e)) => {
                (a.as_f64().unwrap_or(f64::NAN) - e.as_f64().unwrap_or(f64::NAN)).abs() <= tol
            }
            (Some(a), e) => a == e,
            (None, _) => false,
        };
        if !ok {
            out.push(Mismatch { path: path.clone(), expected, actual: actual.cloned() });
        }
    }
    Ok(out)
}
