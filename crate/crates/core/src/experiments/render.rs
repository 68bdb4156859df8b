use std::fmt::Write as _;

use super::{ArmSummary, ExperimentReport, MeanMetrics};

fn level_cell(arm: &ArmSummary) -> String {
    arm.arm
        .level()
        .map(|l| format!("{l:.2}"))
        .unwrap_or_else(|| "-".into())
}

fn mae_cell(mae: Option<f64>) -> String {
    mae.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into())
}

fn arms(report: &ExperimentReport) -> impl Iterator<Item = &ArmSummary> {
    std::iter::once(&report.unimodal).chain(&report.multimodal)
}

/// Fixed-width table of mean metrics per arm.
pub fn render_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let seeds: Vec<String> = report.seeds.iter().map(u64::to_string).collect();
    writeln!(
        out,
        "model {:?}, tested on {}, seeds [{}], tie band {}",
        report.model,
        report.eval_modality,
        seeds.join(", "),
        report.tau
    )
    .unwrap();
    writeln!(
        out,
        "{:<11} {:>5} {:>9} {:>8} {:>8} {:>9} {:>8} {:>8}",
        "arm", "level", "accuracy", "f1", "mae", "collapse", "outcome", "margin"
    )
    .unwrap();
    for arm in arms(report) {
        let MeanMetrics {
            accuracy,
            f1,
            mae,
            collapse,
        } = &arm.mean;
        let (label, margin) = match &arm.outcome {
            Some(o) => (o.label.to_string(), format!("{:+.2}", o.margin)),
            None => ("-".into(), "-".into()),
        };
        writeln!(
            out,
            "{:<11} {:>5} {:>9.4} {:>8.4} {:>8} {:>9.3} {:>8} {:>8}",
            arm.arm.name(),
            level_cell(arm),
            accuracy,
            f1,
            mae_cell(*mae),
            collapse,
            label,
            margin
        )
        .unwrap();
    }
    if let Some(d) = &report.degradation {
        writeln!(
            out,
            "level {:.2} {} level {:.2}",
            d.level,
            if d.degraded {
                "scores below"
            } else {
                "does not score below"
            },
            d.reference_level
        )
        .unwrap();
    }
    out
}

/// One row per arm and seed plus a `mean` row per arm.
pub fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("level,arm,seed,accuracy,f1,mae,collapse,label,margin\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for arm in arms(report) {
        let level = arm.arm.level().map(|l| format!("{l}")).unwrap_or_default();
        for run in &arm.runs {
            writeln!(
                out,
                "{level},{},{},{:.6},{:.6},{},{:.6},,",
                arm.arm.name(),
                run.seed,
                run.metrics.accuracy,
                run.metrics.f1,
                opt(run.metrics.mae),
                run.collapse
            )
            .unwrap();
        }
        let (label, margin) = match &arm.outcome {
            Some(o) => (o.label.to_string(), format!("{:.6}", o.margin)),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{level},{},mean,{:.6},{:.6},{},{:.6},{label},{margin}",
            arm.arm.name(),
            arm.mean.accuracy,
            arm.mean.f1,
            opt(arm.mean.mae),
            arm.mean.collapse
        )
        .unwrap();
    }
    out
}
