//! End-to-end analysis of one sequence: initialization, optimization, and
//! assembly of the report.

use crate::error::Result;
use crate::ingest::{AnalysisReport, LossSummary, PartReport, SceneSequence};
use crate::init::initialize_parts;
use crate::optimizer::{optimize_scene, LossTrace, OptimConfig, Verdict};

/// Window used for the initial/final loss summary.
const SUMMARY_WINDOW: usize = 200;

fn window_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn summarize(trace: &LossTrace) -> LossSummary {
    let n = trace.total.len();
    let w = SUMMARY_WINDOW.min(n);
    LossSummary {
        iterations: n,
        initial: window_mean(&trace.total[..w]),
        last: window_mean(&trace.total[n - w..]),
    }
}

/// Runs the full procedure and returns the report with its loss trace.
pub fn analyze(seq: &SceneSequence, cfg: &OptimConfig) -> Result<(AnalysisReport, LossTrace)> {
    cfg.validate()?;
    seq.validate()?;
    let inits = initialize_parts(seq, cfg.theta_min)?;
    let result = optimize_scene(seq, &inits, cfg)?;

    let mut report = AnalysisReport::default();
    for v in &result.verdicts {
        let Some(motion_type) = v.verdict.motion_type() else {
            report.pruned.push(v.label);
            continue;
        };
        let p = &result.params[&v.label];
        report.parts.push(PartReport {
            label: v.label,
            motion_type,
            axis: p.axis(),
            delta_alpha: p.delta_alpha.clone(),
            delta_phi: p.delta_phi.clone(),
            total_alpha: p.total_alpha(),
            total_phi: p.total_phi(),
        });
    }
    debug_assert!(result.verdicts.iter().all(|v| v.verdict == Verdict::Pruned
        || result.params.contains_key(&v.label)));
    report.loss = Some(summarize(&result.trace));
    Ok((report, result.trace))
}
