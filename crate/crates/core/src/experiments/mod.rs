//! Validation experiments comparing empirical runs with state-evolution
//! predictions: observables per iteration, phase transitions of AMP and
//! iterative soft thresholding, and operating characteristics of penalized
//! least squares.
//!
//! Every runner returns an in-memory report; [`write_report`] turns it
//! into CSV files plus a JSON manifest.

mod config;
mod observables;
mod operating_chars;
mod output;
mod phase_transition;

pub use config::{ConfigOverrides, ExperimentConfig, ExperimentKind, PolicyChoice};
pub use observables::{run_observables, InstanceCurveRow, ObservablesReport, ObservablesRow};
pub use operating_chars::{run_operating_chars, OperatingCharsReport, OperatingCharsRow};
pub use output::{write_report, Manifest, Report};
pub use phase_transition::{
    crossover, run_phase_transition, PhaseTransitionReport, PtCellRow, PtInstanceRow, PtSummaryRow,
};

/// Spearman rank correlation, ties given their average rank. NaN for
/// fewer than two points or a constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return f64::NAN;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}
