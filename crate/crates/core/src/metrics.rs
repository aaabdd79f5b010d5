//! Docking quality metrics and difficulty classification.

use std::fmt::Write as _;

use crate::diffusion::superpose_unbound;
use crate::error::{Error, Result};
use crate::geometry::{superposed_rmsd, ComplexState, Vec3};

pub const INTERFACE_CUTOFF: f64 = 10.0;
pub const CLDDT_RADIUS: f64 = 15.0;
pub const CLDDT_THRESHOLDS: [f64; 4] = [0.5, 2.0, 4.0, 8.0];
pub const CONTACT_CUTOFF: f64 = 8.0;

/// Complex RMSD: Calpha RMSD over both chains after optimal superposition.
pub fn crmsd(pred: &ComplexState, truth: &ComplexState) -> Result<f64> {
    pred.same_shape(truth)?;
    superposed_rmsd(&pred.positions(), &truth.positions())
}

/// Residues of `state` with a cross-chain Calpha neighbour closer than
/// `cutoff`: `(receptor indices, ligand indices)`.
pub fn interface_residues(state: &ComplexState, cutoff: f64) -> (Vec<usize>, Vec<usize>) {
    let xr = state.receptor.positions();
    let xl = state.ligand.positions();
    let mut in_r = vec![false; xr.len()];
    let mut in_l = vec![false; xl.len()];
    for (i, a) in xr.iter().enumerate() {
        for (j, b) in xl.iter().enumerate() {
            if (a - b).norm() < cutoff {
                in_r[i] = true;
                in_l[j] = true;
            }
        }
    }
    let pick = |v: Vec<bool>| v.into_iter().enumerate().filter(|(_, b)| *b).map(|(i, _)| i).collect();
    (pick(in_r), pick(in_l))
}

/// Interface positions of `state` in receptor-then-ligand order.
pub fn gather_interface(state: &ComplexState, iface: &(Vec<usize>, Vec<usize>)) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = iface.0.iter().map(|&i| state.receptor.frames[i].position).collect();
    out.extend(iface.1.iter().map(|&j| state.ligand.frames[j].position));
    out
}

/// Interface RMSD: interface defined on `truth`, superposition on interface
/// residues only.
pub fn irmsd(pred: &ComplexState, truth: &ComplexState, cutoff: f64) -> Result<f64> {
    pred.same_shape(truth)?;
    let iface = interface_residues(truth, cutoff);
    if iface.0.is_empty() {
        return Err(Error::EmptyInterface(format!("no cross-chain pair closer than {cutoff} A")));
    }
    superposed_rmsd(&gather_interface(pred, &iface), &gather_interface(truth, &iface))
}

/// Cross-chain pairs `(receptor, ligand)` closer than `radius` in `state`.
pub fn contact_pairs(state: &ComplexState, radius: f64) -> Vec<(usize, usize)> {
    let xl = state.ligand.positions();
    let mut out = Vec::new();
    for (i, a) in state.receptor.positions().iter().enumerate() {
        for (j, b) in xl.iter().enumerate() {
            if (a - b).norm() < radius {
                out.push((i, j));
            }
        }
    }
    out
}

/// Contact lDDT over inter-chain pairs within [`CLDDT_RADIUS`] in `truth`.
pub fn clddt(pred: &ComplexState, truth: &ComplexState) -> Result<f64> {
    clddt_with(pred, truth, CLDDT_RADIUS, &CLDDT_THRESHOLDS)
}

pub fn clddt_with(pred: &ComplexState, truth: &ComplexState, radius: f64, thresholds: &[f64]) -> Result<f64> {
    pred.same_shape(truth)?;
    let pairs = contact_pairs(truth, radius);
    if pairs.is_empty() || thresholds.is_empty() {
        return Err(Error::EmptyInterface(format!("no contacts within {radius} A")));
    }
    let dist = |s: &ComplexState, (i, j): (usize, usize)| {
        (s.receptor.frames[i].position - s.ligand.frames[j].position).norm()
    };
    let errors: Vec<f64> = pairs.iter().map(|&p| (dist(pred, p) - dist(truth, p)).abs()).collect();
    let per_threshold = thresholds.iter().map(|&thr| {
        errors.iter().filter(|&&e| e < thr).count() as f64 / errors.len() as f64
    });
    Ok(per_threshold.sum::<f64>() / thresholds.len() as f64)
}

/// Fraction of contacts in `model` that are absent from `truth`; zero when
/// the model has no contacts.
pub fn fnonnat(model: &ComplexState, truth: &ComplexState, cutoff: f64) -> Result<f64> {
    model.same_shape(truth)?;
    let native: std::collections::HashSet<_> = contact_pairs(truth, cutoff).into_iter().collect();
    let found = contact_pairs(model, cutoff);
    if found.is_empty() {
        return Ok(0.0);
    }
    Ok(found.iter().filter(|p| !native.contains(p)).count() as f64 / found.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Difficulty {
    Rigid,
    Medium,
    Difficult,
}

impl std::fmt::Display for Difficulty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Difficulty::Rigid => "rigid",
            Difficulty::Medium => "medium",
            Difficulty::Difficult => "difficult",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifficultyThresholds {
    pub rigid_irmsd: f64,
    pub rigid_fnonnat: f64,
    pub difficult_irmsd: f64,
}

impl Default for DifficultyThresholds {
    fn default() -> Self {
        Self { rigid_irmsd: 1.5, rigid_fnonnat: 0.4, difficult_irmsd: 2.2 }
    }
}

impl DifficultyThresholds {
    pub fn label(&self, irmsd: f64, fnonnat: f64) -> Difficulty {
        if irmsd > self.difficult_irmsd {
            Difficulty::Difficult
        } else if irmsd <= self.rigid_irmsd && fnonnat <= self.rigid_fnonnat {
            Difficulty::Rigid
        } else {
            Difficulty::Medium
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifficultyReport {
    pub label: Difficulty,
    pub irmsd: f64,
    pub fnonnat: f64,
}

/// Superposes each unbound chain onto the bound one, then labels the case
/// from the resulting iRMSD and fnonnat.
pub fn classify_difficulty(
    unbound: &ComplexState,
    bound: &ComplexState,
    thresholds: &DifficultyThresholds,
) -> Result<DifficultyReport> {
    let sup = superpose_unbound(bound, unbound)?;
    let irmsd = irmsd(&sup, bound, INTERFACE_CUTOFF)?;
    let fnonnat = fnonnat(&sup, bound, CONTACT_CUTOFF)?;
    Ok(DifficultyReport { label: thresholds.label(irmsd, fnonnat), irmsd, fnonnat })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub case: String,
    pub crmsd: f64,
    pub irmsd: f64,
    pub clddt: Option<f64>,
    pub difficulty: Option<Difficulty>,
}

pub fn evaluate(case: &str, pred: &ComplexState, truth: &ComplexState) -> Result<EvalRow> {
    Ok(EvalRow {
        case: case.to_string(),
        crmsd: crmsd(pred, truth)?,
        irmsd: irmsd(pred, truth, INTERFACE_CUTOFF)?,
        clddt: clddt(pred, truth).ok(),
        difficulty: None,
    })
}

/// Mean, population standard deviation, median and percentage below 10 A.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub pct_below_10: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[m] } else { 0.5 * (sorted[m - 1] + sorted[m]) };
    let pct_below_10 = 100.0 * values.iter().filter(|&&v| v < 10.0).count() as f64 / n;
    Some(Summary { mean, std, median, pct_below_10 })
}

/// Per-case rows followed by summary blocks for cRMSD and iRMSD.
pub fn format_eval_table(rows: &[EvalRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case\tcrmsd\tirmsd\tclddt\tdifficulty");
    for r in rows {
        let c = r.clddt.map_or("nan".to_string(), |v| format!("{v:.4}"));
        let d = r.difficulty.map_or("-".to_string(), |d| d.to_string());
        let _ = writeln!(s, "{}\t{:.4}\t{:.4}\t{}\t{}", r.case, r.crmsd, r.irmsd, c, d);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "metric\tMean±Std\tMedian\t%<10");
    let cr: Vec<f64> = rows.iter().map(|r| r.crmsd).collect();
    let ir: Vec<f64> = rows.iter().map(|r| r.irmsd).collect();
    for (name, vals) in [("cRMSD", cr), ("iRMSD", ir)] {
        if let Some(sm) = summarize(&vals) {
            let _ = writeln!(s, "{name}\t{:.2}±{:.2}\t{:.2}\t{:.1}", sm.mean, sm.std, sm.median, sm.pct_below_10);
        }
    }
    s
}
