//! Text renderings of traces, metrics and ablation tables.
//!
//! Every number is written in Rust's shortest round-trip form so identical
//! runs give byte-identical files.

use crate::metrics::MetricsReport;
use crate::task::TaskSpec;
use crate::trainer::{AblationRow, EpochTrace, Mode, StepTrace};

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

/// `epoch,joint_loss,<task>_loss,<task>_log_var,<task>_sigma_sq,<task>_beta,…`
pub fn trace_header(tasks: &[TaskSpec]) -> String {
    let mut cols = vec!["epoch".to_string(), "joint_loss".to_string()];
    for t in tasks {
        for suffix in ["loss", "log_var", "sigma_sq", "beta"] {
            cols.push(format!("{}_{suffix}", t.name));
        }
    }
    cols.join(",")
}

pub fn trace_csv(tasks: &[TaskSpec], trace: &[EpochTrace]) -> String {
    let mut out = trace_header(tasks);
    out.push('\n');
    for row in trace {
        let mut cols = vec![row.epoch.to_string(), row.joint_loss.to_string()];
        for t in 0..tasks.len() {
            cols.push(row.per_task_loss[t].to_string());
            cols.push(row.log_var[t].to_string());
            cols.push(row.sigma_sq[t].to_string());
            cols.push(row.beta[t].to_string());
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn step_trace_csv(tasks: &[TaskSpec], steps: &[StepTrace]) -> String {
    let mut cols = vec!["epoch".to_string(), "batch".into(), "joint_loss".into()];
    for t in tasks {
        cols.push(format!("{}_loss", t.name));
        cols.push(format!("{}_log_var", t.name));
    }
    let mut out = cols.join(",");
    out.push('\n');
    for s in steps {
        let mut cols = vec![
            s.epoch.to_string(),
            s.batch.to_string(),
            s.joint_loss.to_string(),
        ];
        for t in 0..tasks.len() {
            cols.push(s.per_task_loss[t].to_string());
            cols.push(s.log_var[t].to_string());
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// `key = value` lines. Confusion rows are separated by `;`.
pub fn metrics_text(report: &MetricsReport) -> String {
    let mut out = format!("samples = {}\n", report.samples);
    for t in &report.tasks {
        out.push_str(&format!("{}.accuracy = {}\n", t.name, t.accuracy));
        if let Some(o) = &t.ordinal {
            out.push_str(&format!("{}.mae = {}\n", t.name, o.mae));
            out.push_str(&format!("{}.mse = {}\n", t.name, o.mse));
            out.push_str(&format!("{}.cs = {}\n", t.name, join(&o.cs, ",")));
        }
        let rows: Vec<String> = t.confusion.iter().map(|r| join(r, " ")).collect();
        out.push_str(&format!("{}.confusion = {}\n", t.name, rows.join(";")));
    }
    out
}

/// Flat numeric columns of one ablation row.
fn ablation_values(tasks: &[TaskSpec], m: &MetricsReport) -> Vec<f64> {
    let mut vals: Vec<f64> = m.tasks.iter().map(|t| t.accuracy).collect();
    for (spec, t) in tasks.iter().zip(&m.tasks) {
        if let (true, Some(o)) = (spec.is_ordinal(), &t.ordinal) {
            vals.push(o.mae);
            vals.push(o.mse);
        }
    }
    vals
}

pub fn ablation_header(tasks: &[TaskSpec]) -> String {
    let mut cols = vec!["mode".to_string(), "seed".to_string()];
    cols.extend(tasks.iter().map(|t| format!("{}_accuracy", t.name)));
    for t in tasks.iter().filter(|t| t.is_ordinal()) {
        cols.push(format!("{}_mae", t.name));
        cols.push(format!("{}_mse", t.name));
    }
    cols.join(",")
}

/// Per-mode column means over seeds, in [`Mode::ALL`] order.
pub fn ablation_means(tasks: &[TaskSpec], rows: &[AblationRow]) -> Vec<(Mode, Vec<f64>)> {
    Mode::ALL
        .iter()
        .filter_map(|&mode| {
            let vals: Vec<Vec<f64>> = rows
                .iter()
                .filter(|r| r.mode == mode)
                .map(|r| ablation_values(tasks, &r.metrics))
                .collect();
            let first = vals.first()?;
            let n = vals.len() as f64;
            let means = (0..first.len())
                .map(|c| vals.iter().map(|v| v[c]).sum::<f64>() / n)
                .collect();
            Some((mode, means))
        })
        .collect()
}

/// Data rows (as given) followed by one `mean` row per mode.
pub fn ablation_csv(tasks: &[TaskSpec], rows: &[AblationRow]) -> String {
    let mut out = ablation_header(tasks);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.mode,
            r.seed,
            join(&ablation_values(tasks, &r.metrics), ",")
        ));
    }
    for (mode, means) in ablation_means(tasks, rows) {
        out.push_str(&format!("{mode},mean,{}\n", join(&means, ",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::task_metrics;

    fn tasks() -> Vec<TaskSpec> {
        vec![TaskSpec::ordinal("age", 3), TaskSpec::nominal("g", 2)]
    }

    fn report(shift: usize) -> MetricsReport {
        let t = tasks();
        MetricsReport {
            samples: 3,
            tasks: vec![
                task_metrics(&t[0], &[1, 2, 1 + shift], &[1, 2, 3]).unwrap(),
                task_metrics(&t[1], &[0, 1, shift % 2], &[0, 1, 1]).unwrap(),
            ],
        }
    }

    #[test]
    fn trace_layout() {
        let row = EpochTrace {
            epoch: 1,
            joint_loss: 2.5,
            per_task_loss: vec![2.0, 0.5],
            log_var: vec![0.0, 0.0],
            sigma_sq: vec![1.0, 1.0],
            beta: vec![0.5, 0.5],
        };
        let csv = trace_csv(&tasks(), &[row]);
        assert_eq!(
            csv,
            "epoch,joint_loss,age_loss,age_log_var,age_sigma_sq,age_beta,g_loss,g_log_var,g_sigma_sq,g_beta\n\
             1,2.5,2,0,1,0.5,0.5,0,1,0.5\n"
        );
    }

    #[test]
    fn metrics_layout() {
        let text = metrics_text(&report(0));
        assert!(text.contains("age.mae = 0.6666666666666666\n"), "{text}");
        assert!(text.contains("age.cs = 0.6666666666666666,0.6666666666666666,1\n"));
        assert!(text.contains("g.confusion = 1 0;1 1\n"));
        assert!(!text.contains("g.mae"));
    }

    #[test]
    fn ablation_summary_rows() {
        let rows: Vec<AblationRow> = Mode::ALL
            .iter()
            .flat_map(|&mode| {
                (0..5u64).map(move |seed| AblationRow {
                    mode,
                    seed,
                    metrics: report((seed % 3) as usize),
                })
            })
            .collect();
        let csv = ablation_csv(&tasks(), &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "mode,seed,age_accuracy,g_accuracy,age_mae,age_mse"
        );
        assert_eq!(lines.len(), 1 + 15 + 3);
        assert!(lines[16].starts_with("full,mean,"));

        for (mode, means) in ablation_means(&tasks(), &rows) {
            let mine: Vec<Vec<f64>> = rows
                .iter()
                .filter(|r| r.mode == mode)
                .map(|r| ablation_values(&tasks(), &r.metrics))
                .collect();
            for (c, m) in means.iter().enumerate() {
                let direct = mine.iter().map(|v| v[c]).sum::<f64>() / mine.len() as f64;
                assert!((m - direct).abs() < 1e-12);
            }
        }
    }
}
