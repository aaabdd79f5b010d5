//! Training objectives: variance-weighted global score matching, residue
//! flow-matching regressions, interface FAPE and confidence regression.

use crate::autodiff::{Real, M3, V3};
use crate::diffusion::TargetSet;
use crate::error::{Error, Result};
use crate::geometry::{ComplexState, Vec3};
use crate::metrics::interface_residues;
use crate::model::RawOutput;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub diff: f64,
    pub tr: f64,
    pub rot: f64,
    pub res_tr_rec: f64,
    pub res_rot_rec: f64,
    pub res_tr_lig: f64,
    pub res_rot_lig: f64,
    pub ifape: f64,
    pub clddt: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            diff: 1.0,
            tr: 1.0,
            rot: 1.0,
            res_tr_rec: 1.0,
            res_rot_rec: 1.0,
            res_tr_lig: 1.0,
            res_rot_lig: 1.0,
            ifape: 1.0,
            clddt: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.diff,
            self.tr,
            self.rot,
            self.res_tr_rec,
            self.res_rot_rec,
            self.res_tr_lig,
            self.res_rot_lig,
            self.ifape,
            self.clddt,
        ];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter(format!("loss weights must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }

    /// Effective weight of each component in [`LossBreakdown::parts`] order.
    pub fn effective(&self) -> [f64; 8] {
        [
            self.diff * self.tr,
            self.diff * self.rot,
            self.diff * self.res_tr_rec,
            self.diff * self.res_rot_rec,
            self.diff * self.res_tr_lig,
            self.diff * self.res_rot_lig,
            self.ifape,
            self.clddt,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FapeParams {
    pub interface_cutoff: f64,
    pub clamp: f64,
    pub scale: f64,
}

impl Default for FapeParams {
    fn default() -> Self {
        Self { interface_cutoff: 10.0, clamp: 10.0, scale: 10.0 }
    }
}

const FAPE_EPS: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_tr: f64,
    pub l_rot: f64,
    pub l_res_tr_rec: f64,
    pub l_res_rot_rec: f64,
    pub l_res_tr_lig: f64,
    pub l_res_rot_lig: f64,
    pub l_ifape: f64,
    pub l_clddt: f64,
    pub total: f64,
    /// The bound structure had no interface, so iFAPE was skipped.
    pub ifape_empty: bool,
    /// No confidence target was available.
    pub clddt_missing: bool,
}

impl LossBreakdown {
    pub fn parts(&self) -> [f64; 8] {
        [
            self.l_tr,
            self.l_rot,
            self.l_res_tr_rec,
            self.l_res_rot_rec,
            self.l_res_tr_lig,
            self.l_res_rot_lig,
            self.l_ifape,
            self.l_clddt,
        ]
    }

    pub fn from_parts(p: [f64; 8], weights: &LossWeights) -> Self {
        let total = p.iter().zip(weights.effective()).map(|(a, w)| a * w).sum();
        Self {
            l_tr: p[0],
            l_rot: p[1],
            l_res_tr_rec: p[2],
            l_res_rot_rec: p[3],
            l_res_tr_lig: p[4],
            l_res_rot_lig: p[5],
            l_ifape: p[6],
            l_clddt: p[7],
            total,
            ifape_empty: false,
            clddt_missing: false,
        }
    }

    /// Component-wise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown], weights: &LossWeights) -> Self {
        let n = items.len().max(1) as f64;
        let mut p = [0.0; 8];
        for it in items {
            for (a, b) in p.iter_mut().zip(it.parts()) {
                *a += b / n;
            }
        }
        let mut out = Self::from_parts(p, weights);
        out.ifape_empty = items.iter().any(|i| i.ifape_empty);
        out.clddt_missing = items.iter().any(|i| i.clddt_missing);
        out
    }

    pub const HEADER: &'static str = "l_tr\tl_rot\tl_res_tr_rec\tl_res_rot_rec\tl_res_tr_lig\tl_res_rot_lig\tl_ifape\tl_clddt\ttotal";

    pub fn tsv(&self) -> String {
        let mut s: Vec<String> = self.parts().iter().map(|v| format!("{v:.6e}")).collect();
        s.push(format!("{:.6e}", self.total));
        s.join("\t")
    }
}

/// `(sigma_tr^2 |p_tr - t_tr|^2, |p_rot - t_rot|^2 / E|s_rot|^2)`.
pub fn loss_global<T: Real>(
    pred_tr: &V3<T>,
    pred_rot: &V3<T>,
    target_tr: &Vec3,
    target_rot: &Vec3,
    sigma_tr: f64,
    rot_norm: f64,
) -> (T, T) {
    let dt = pred_tr.sub(&V3::from_f64(target_tr)).norm_sq() * (sigma_tr * sigma_tr);
    let dr = pred_rot.sub(&V3::from_f64(target_rot)).norm_sq() * (1.0 / (rot_norm * rot_norm));
    (dt, dr)
}

/// Mean squared error over residues; zero for empty input.
pub fn loss_cfm<T: Real>(pred: &[V3<T>], target: &[Vec3]) -> T {
    assert_eq!(pred.len(), target.len(), "residue count mismatch");
    if pred.is_empty() {
        return T::zero();
    }
    let terms: Vec<T> = pred.iter().zip(target).map(|(p, t)| p.sub(&V3::from_f64(t)).norm_sq()).collect();
    T::sum(&terms) * (1.0 / pred.len() as f64)
}

pub fn loss_clddt<T: Real>(pred: T, truth: f64) -> T {
    (pred - truth).square()
}

/// Predicted residue frames (receptor then ligand): the current frames
/// moved by the residue heads with unit gain.
pub fn predicted_frames<T: Real>(state: &ComplexState, out: &RawOutput<T>) -> (Vec<V3<T>>, Vec<M3<T>>) {
    let mut pos = Vec::new();
    let mut rot = Vec::new();
    for (chain, tr, rv) in
        [(&state.receptor, &out.receptor_tr, &out.receptor_rot), (&state.ligand, &out.ligand_tr, &out.ligand_rot)]
    {
        for ((f, dt), dr) in chain.frames.iter().zip(tr).zip(rv) {
            pos.push(V3::from_f64(&f.position).add(dt));
            rot.push(M3::exp(dr).mul(&M3::from_f64(f.orientation.matrix())));
        }
    }
    (pos, rot)
}

/// Frame-aligned point error over interface residues of `bound`, Calpha
/// points only. Returns `None` when the interface is empty.
pub fn loss_ifape<T: Real>(pred_pos: &[V3<T>], pred_rot: &[M3<T>], bound: &ComplexState, params: &FapeParams) -> Option<T> {
    let (ir, il) = interface_residues(bound, params.interface_cutoff);
    if ir.is_empty() {
        return None;
    }
    let nr = bound.n_receptor();
    let idx: Vec<usize> = ir.iter().copied().chain(il.iter().map(|j| nr + j)).collect();
    let frame = |k: usize| if k < nr { bound.receptor.frames[k] } else { bound.ligand.frames[k - nr] };
    let mut terms = Vec::with_capacity(idx.len() * idx.len());
    for &i in &idx {
        let fi = frame(i);
        let oi_t = fi.orientation.matrix().transpose();
        for &j in &idx {
            let local_true = oi_t * (frame(j).position - fi.position);
            let local_pred = pred_rot[i].apply_t(&pred_pos[j].sub(&pred_pos[i]));
            let d = (local_pred.sub(&V3::from_f64(&local_true)).norm_sq() + FAPE_EPS * FAPE_EPS).sqrt() - FAPE_EPS;
            terms.push(d.min_c(params.clamp));
        }
    }
    Some(T::sum(&terms) * (1.0 / (terms.len() as f64 * params.scale)))
}

/// iFAPE between two complete structures.
pub fn ifape_states(pred: &ComplexState, bound: &ComplexState, params: &FapeParams) -> Result<Option<f64>> {
    pred.same_shape(bound)?;
    let frames: Vec<_> = pred.receptor.frames.iter().chain(&pred.ligand.frames).collect();
    let pos: Vec<V3<f64>> = frames.iter().map(|f| V3::from_f64(&f.position)).collect();
    let rot: Vec<M3<f64>> = frames.iter().map(|f| M3::from_f64(f.orientation.matrix())).collect();
    Ok(loss_ifape(&pos, &rot, bound, params))
}

/// Loss components in [`LossBreakdown::parts`] order and the weighted total.
#[derive(Clone, Debug)]
pub struct LossTerms<T> {
    pub parts: [T; 8],
    pub total: T,
    pub ifape_empty: bool,
    pub clddt_missing: bool,
}

impl<T: Real> LossTerms<T> {
    pub fn breakdown(&self) -> LossBreakdown {
        let p = self.parts.map(|v| v.val());
        LossBreakdown {
            l_tr: p[0],
            l_rot: p[1],
            l_res_tr_rec: p[2],
            l_res_rot_rec: p[3],
            l_res_tr_lig: p[4],
            l_res_rot_lig: p[5],
            l_ifape: p[6],
            l_clddt: p[7],
            total: self.total.val(),
            ifape_empty: self.ifape_empty,
            clddt_missing: self.clddt_missing,
        }
    }
}

/// Everything a training loss needs besides the network output.
#[derive(Clone, Debug)]
pub struct LossContext<'a> {
    pub noisy_state: &'a ComplexState,
    pub targets: &'a TargetSet,
    /// Bound residue configuration at the noisy global pose.
    pub bound_at_pose: &'a ComplexState,
    pub sigma_tr: f64,
    pub rot_norm: f64,
    pub clddt_target: Option<f64>,
}

pub fn training_loss<T: Real>(out: &RawOutput<T>, ctx: &LossContext, weights: &LossWeights, fape: &FapeParams) -> LossTerms<T> {
    let t = ctx.targets;
    let (l_tr, l_rot) =
        loss_global(&out.global_tr, &out.global_rot, &t.global_tr_score, &t.global_rot_score, ctx.sigma_tr, ctx.rot_norm);
    let (pos, rot) = predicted_frames(ctx.noisy_state, out);
    let ifape = loss_ifape(&pos, &rot, ctx.bound_at_pose, fape);
    let clddt = match (ctx.clddt_target, out.clddt_valid) {
        (Some(y), true) => Some(loss_clddt(out.clddt, y)),
        _ => None,
    };
    let parts = [
        l_tr,
        l_rot,
        loss_cfm(&out.receptor_tr, &t.receptor_tr),
        loss_cfm(&out.receptor_rot, &t.receptor_rot),
        loss_cfm(&out.ligand_tr, &t.ligand_tr),
        loss_cfm(&out.ligand_rot, &t.ligand_rot),
        ifape.unwrap_or(T::zero()),
        clddt.unwrap_or(T::zero()),
    ];
    let w = weights.effective();
    let weighted: Vec<T> = parts.iter().zip(w).map(|(p, w)| *p * w).collect();
    LossTerms { parts, total: T::sum(&weighted), ifape_empty: ifape.is_none(), clddt_missing: clddt.is_none() }
}
