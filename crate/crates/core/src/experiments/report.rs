use std::fmt::Write as _;

use super::benchmark::{run_benchmark_on, scenario_for, SimReport};
use super::{ExperimentConfig, ExperimentError};
use crate::stats::Welford;

/// One line of a results table.
pub type TableRow = SimReport;

/// Sample mean and 95% normal half-width `1.96 s / sqrt(n)`.
pub fn confidence_interval(samples: &[f64]) -> Result<(f64, f64), ExperimentError> {
    if samples.len() < 2 {
        return Err(ExperimentError::TooFewSamples(samples.len()));
    }
    let w: Welford = samples.iter().copied().collect();
    Ok((w.mean(), 1.96 * w.stderr()))
}

/// Base row followed by one row per sweep point, all on the same random
/// market and the same realizations.
pub fn reproduce_tables(config: &ExperimentConfig) -> Result<Vec<TableRow>, ExperimentError> {
    config.validate()?;
    let draw = scenario_for(config);
    let mut rows = vec![run_benchmark_on(config, &draw.build(config)?, "base")?];
    for point in &config.sweep {
        let c = config.with_point(*point);
        rows.push(run_benchmark_on(&c, &draw.build(&c)?, &point.label())?);
    }
    Ok(rows)
}

/// Long format: one line per (row, policy).
pub fn render_csv(rows: &[TableRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "row",
        "policy",
        "mean_reward",
        "ratio_lp",
        "halfwidth",
        "ratio_offline",
        "lp_objective",
        "offline_mean",
        "replicates",
    ])
    .expect("writing to memory");
    for row in rows {
        let mut line = |policy: &str, mean: f64, r: f64, hw: Option<f64>, off: f64| {
            w.write_record([
                row.label.clone(),
                policy.to_string(),
                mean.to_string(),
                r.to_string(),
                hw.map(|h| h.to_string()).unwrap_or_default(),
                off.to_string(),
                row.lp_objective.to_string(),
                row.offline_mean.to_string(),
                row.replicates.to_string(),
            ])
            .expect("writing to memory");
        };
        line("OFF", row.offline_mean, row.offline_ratio, None, if row.offline_mean > 0.0 { 1.0 } else { 0.0 });
        for p in &row.policies {
            line(&p.name, p.mean_reward, p.ratio, p.halfwidth, p.offline_ratio);
        }
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv is utf-8")
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Aligned percentage tables, relative to the relaxation and to the
/// hindsight optimum.
pub fn render_text(rows: &[TableRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.policies.iter().map(|p| p.name.as_str()).collect();
    let label_w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(4);
    let mut out = String::new();
    let mut table = |title: &str, cells: &dyn Fn(&TableRow) -> Vec<String>| {
        let _ = writeln!(out, "{title}");
        let mut header = format!("{:<label_w$}", "");
        for n in &names {
            let _ = write!(header, "  {n:>14}");
        }
        let _ = writeln!(out, "{}", header.trim_end());
        for row in rows {
            let mut line = format!("{:<label_w$}", row.label);
            for c in cells(row) {
                let _ = write!(line, "  {c:>14}");
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
    };
    let with_hw = rows.iter().flat_map(|r| &r.policies).any(|p| p.halfwidth.is_some());
    let title = if with_hw {
        "Reward relative to the fluid relaxation (mean +/- 95% half-width)"
    } else {
        "Reward relative to the fluid relaxation"
    };
    table(title, &|row| {
        row.policies
            .iter()
            .map(|p| match p.halfwidth {
                Some(h) => format!("{} +/- {:.1}", pct(p.ratio), 100.0 * h),
                None => pct(p.ratio),
            })
            .collect()
    });
    table("Reward relative to the hindsight optimum", &|row| {
        row.policies.iter().map(|p| pct(p.offline_ratio)).collect()
    });
    let _ = writeln!(out, "{:<label_w$}  {:>14}  {:>14}  {:>14}", "row", "relaxation", "hindsight", "hindsight/rel");
    for row in rows {
        let flag = if row.lp_zero { " (zero relaxation)" } else { "" };
        let _ = writeln!(
            out,
            "{:<label_w$}  {:>14.4}  {:>14.4}  {:>14}{flag}",
            row.label,
            row.lp_objective,
            row.offline_mean,
            pct(row.offline_ratio)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(confidence_interval(&[2.0; 10]).unwrap(), (2.0, 0.0));
        let xs: Vec<f64> = (0..1000).map(|k| (k % 2) as f64).collect();
        let (m, h) = confidence_interval(&xs).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 0.031).abs() < 5e-4);
        assert!(matches!(confidence_interval(&[1.0]), Err(ExperimentError::TooFewSamples(1))));
    }
}
