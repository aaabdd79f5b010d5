use flexdock::diffusion::{forward_noise_with, superpose_unbound, GlobalNoise};
use flexdock::geometry::{
    apply_composite, apply_rigid_rotation, exp_so3, kabsch, kabsch_disentangle, log_so3, rmsd, ComplexState, Frame,
    ProductPoint, RigidTransform, Rotation, Vec3,
};
use flexdock::graph::{ComplexGraphs, GraphParams};
use flexdock::io::{format_models, parse_pdb_str, state_records};
use flexdock::loss::{ifape_states, FapeParams, LossBreakdown, LossWeights};
use flexdock::metrics::{clddt, crmsd, irmsd, INTERFACE_CUTOFF};
use flexdock::nma::{chain_dynamics, NmaParams};
use flexdock::geometry::superposed_rmsd;
use flexdock::sampler::{rank_candidates, sample, step, OracleScore, SamplerConfig, ScoreRequest, ScoreSource};
use flexdock::schedule::{alpha, beta_from_irmsd, ExponentialFlex, GlobalSchedule};
use flexdock::synthetic::{synthetic_pair, SyntheticPair, SyntheticSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (vec3(1.0), 0.0..std::f64::consts::PI).prop_filter_map("nonzero axis", |(a, t)| {
        (a.norm() > 1e-3).then(|| Rotation::from_axis_angle(&a, t))
    })
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(30.0)).prop_map(|(r, b)| RigidTransform::new(r, b))
}

fn pair(seed: u64, flex: f64) -> SyntheticPair {
    synthetic_pair(&SyntheticSpec::new(9, 8, flex, seed)).unwrap()
}

fn pairwise(x: &[Vec3]) -> Vec<f64> {
    x.iter().flat_map(|a| x.iter().map(move |b| (a - b).norm())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_round_trip(v in vec3(1.8)) {
        prop_assume!(v.norm() < std::f64::consts::PI - 1e-6);
        let back = log_so3(&exp_so3(&v));
        prop_assert!((back - v).norm() < 1e-9);
    }

    #[test]
    fn rigid_rotation_is_an_isometry_of_the_ligand(seed in 0u64..1000, q in rotation()) {
        let p = pair(seed, 0.3);
        let moved = apply_rigid_rotation(&q, &p.bound);
        let (a, b) = (pairwise(&p.bound.ligand.positions()), pairwise(&moved.ligand.positions()));
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
        prop_assert_eq!(moved.receptor, p.bound.receptor);
    }

    #[test]
    fn kabsch_beats_random_transforms(seed in 0u64..1000, noise in vec3(1.0), g in transform()) {
        let p = pair(seed, 0.5);
        let a = p.bound.ligand.positions();
        let b: Vec<Vec3> = a.iter().enumerate().map(|(i, x)| g.apply(x) + noise * ((i % 3) as f64)).collect();
        let fit = kabsch(&a, &b, None).unwrap();
        let best = rmsd(&a.iter().map(|x| fit.apply(x)).collect::<Vec<_>>(), &b);
        prop_assert!(best <= rmsd(&a, &b) + 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let t = RigidTransform::new(flexdock::so3::uniform_so3_sample(&mut rng), g.translation);
            prop_assert!(best <= rmsd(&a.iter().map(|x| t.apply(x)).collect::<Vec<_>>(), &b) + 1e-12);
        }
    }

    #[test]
    fn identity_point_is_identity(seed in 0u64..1000) {
        let p = pair(seed, 0.5);
        let id = ProductPoint::identity(p.bound.n_receptor(), p.bound.n_ligand());
        prop_assert!(apply_composite(&id, &p.bound).unwrap().max_deviation(&p.bound) < 1e-12);
    }

    #[test]
    fn disentangle_then_reapply_is_identity(seed in 0u64..1000, g in transform(), d in vec3(0.5)) {
        let p = pair(seed, 0.5);
        let pre = &p.bound.ligand.frames;
        let upd: Vec<Frame> = pre.iter().enumerate()
            .map(|(i, f)| Frame::new(g.apply(&f.position) + d * (i as f64 * 0.1), g.rotation * f.orientation))
            .collect();
        let (aligned, removed) = kabsch_disentangle(&upd, pre).unwrap();
        for (a, u) in aligned.iter().zip(&upd) {
            let back = a.transformed(&removed);
            prop_assert!((back.position - u.position).norm() < 1e-9);
            prop_assert!(back.orientation.distance(&u.orientation) < 1e-9);
        }
    }

    #[test]
    fn alpha_is_monotone(beta in 0.05f64..20.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        prop_assert_eq!(alpha(0.0, beta), 0.0);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(alpha(lo, beta) < alpha(hi, beta));
        if lo > 0.0 {
            prop_assert!(alpha(lo, beta) < alpha(lo, beta * 1.5));
        }
    }

    #[test]
    fn beta_is_nonincreasing_in_irmsd(a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let s = GlobalSchedule::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(beta_from_irmsd(lo, &s).unwrap() >= beta_from_irmsd(hi, &s).unwrap());
    }

    #[test]
    fn ranking_is_invariant_to_monotone_transforms(scores in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let a: Vec<Option<f64>> = scores.iter().map(|&s| Some(s)).collect();
        let b: Vec<Option<f64>> = scores.iter().map(|&s| Some((3.0 * s).exp() - 7.0)).collect();
        let r = rank_candidates(&a);
        prop_assert_eq!(&r, &rank_candidates(&b));
        prop_assert!(r.windows(2).all(|w| scores[w[0]] >= scores[w[1]]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_noise_is_equivariant(seed in 0u64..1000, q in rotation(), t in 0.05f64..1.0, tau in 0.0f64..1.0) {
        let p = pair(seed, 0.8);
        let sup = superpose_unbound(&p.bound, &p.unbound).unwrap();
        let g = RigidTransform::new(q, Vec3::zeros());
        let (sched, flex) = (GlobalSchedule::default(), ExponentialFlex::new(2.0).unwrap());
        let noise = GlobalNoise { translation: Vec3::new(1.0, -2.0, 0.5), rotation: Rotation::from_axis_angle(&Vec3::y(), 0.7) };
        let qnoise = GlobalNoise { translation: q * noise.translation, rotation: q * noise.rotation * q.inverse() };
        let a = forward_noise_with(&p.bound, &sup, t, tau, &flex, &sched, &noise).unwrap();
        let b = forward_noise_with(&p.bound.transformed(&g), &sup.transformed(&g), t, tau, &flex, &sched, &qnoise).unwrap();
        prop_assert!((q * a.targets.global_tr_score - b.targets.global_tr_score).norm() < 1e-8);
        prop_assert!((q * a.targets.global_rot_score - b.targets.global_rot_score).norm() < 1e-8);
        for (x, y) in a.targets.ligand_tr.iter().zip(&b.targets.ligand_tr) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-8);
        }
        for (x, y) in a.targets.receptor_rot.iter().zip(&b.targets.receptor_rot) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn msf_is_pose_invariant(seed in 0u64..1000, g in transform()) {
        let p = pair(seed, 0.4);
        let a = chain_dynamics(&p.unbound.receptor, &NmaParams::default()).unwrap();
        let b = chain_dynamics(&p.unbound.receptor.transformed(&g), &NmaParams::default()).unwrap();
        for (x, y) in a.msf.iter().zip(&b.msf) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-12));
        }
        prop_assert!(b.correlation.iter().all(|c| (-1.0 - 1e-12..=1.0 + 1e-12).contains(c)));
        prop_assert!((&b.correlation - b.correlation.transpose()).amax() < 1e-12);
    }

    #[test]
    fn graph_features_are_invariant(seed in 0u64..1000, g in transform(), sigma in 0.5f64..20.0) {
        let p = pair(seed, 0.4);
        let params = GraphParams::default();
        let a = ComplexGraphs::build(&p.bound, sigma, &params, None, None);
        let b = ComplexGraphs::build(&p.bound.transformed(&g), sigma, &params, None, None);
        for (x, y) in a.graphs.iter().zip(&b.graphs) {
            prop_assert_eq!(&x.edges, &y.edges);
            prop_assert!(x.edges.windows(2).all(|w| w[0] < w[1]));
            for (u, v) in x.edge_features.iter().flatten().zip(y.edge_features.iter().flatten()) {
                prop_assert!((u - v).abs() < 1e-10);
            }
            for (u, v) in x.vectors.iter().zip(&y.vectors) {
                prop_assert!((g.rotation * u - v).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn metrics_are_pose_invariant(seed in 0u64..1000, g in transform()) {
        let p = pair(seed, 0.7);
        let pred = superpose_unbound(&p.bound, &p.unbound).unwrap();
        let (pg, tg) = (pred.transformed(&g), p.bound.transformed(&g));
        prop_assert!((crmsd(&pred, &p.bound).unwrap() - crmsd(&pg, &tg).unwrap()).abs() < 1e-9);
        prop_assert!((irmsd(&pred, &p.bound, INTERFACE_CUTOFF).unwrap() - irmsd(&pg, &tg, INTERFACE_CUTOFF).unwrap()).abs() < 1e-9);
        prop_assert!((clddt(&pred, &p.bound).unwrap() - clddt(&pg, &tg).unwrap()).abs() < 1e-9);
        let fape = FapeParams::default();
        let a = ifape_states(&pred, &p.bound, &fape).unwrap().unwrap();
        let b = ifape_states(&pg, &tg, &fape).unwrap().unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(ifape_states(&p.bound, &p.bound, &fape).unwrap(), Some(0.0));
    }

    #[test]
    fn clddt_falls_along_a_perturbation_ladder(seed in 0u64..1000) {
        let p = pair(seed, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<Vec3> = (0..p.bound.n_ligand()).map(|_| flexdock::so3::uniform_unit_vector(&mut rng)).collect();
        let mut last = clddt(&p.bound, &p.bound).unwrap();
        prop_assert_eq!(last, 1.0);
        for k in 1..12 {
            let mag = 0.4 * k as f64;
            let frames = p.bound.ligand.frames.iter().zip(&dirs).map(|(f, d)| Frame::new(f.position + d * mag, f.orientation)).collect();
            let s = ComplexState::new(p.bound.receptor.clone(), p.bound.ligand.with_frames(frames));
            let c = clddt(&s, &p.bound).unwrap();
            prop_assert!(c <= last + 1e-12);
            last = c;
        }
    }

    #[test]
    fn total_loss_is_linear_in_each_weight(parts in prop::array::uniform8(0.0f64..5.0), w in 0.0f64..3.0, k in 0usize..8) {
        let mut weights = LossWeights::default();
        let set = |ws: &mut LossWeights, v: f64| match k {
            0 => ws.tr = v, 1 => ws.rot = v, 2 => ws.res_tr_rec = v, 3 => ws.res_rot_rec = v,
            4 => ws.res_tr_lig = v, 5 => ws.res_rot_lig = v, 6 => ws.ifape = v, _ => ws.clddt = v,
        };
        set(&mut weights, 0.0);
        let base = LossBreakdown::from_parts(parts, &weights).total;
        set(&mut weights, w);
        let t = LossBreakdown::from_parts(parts, &weights).total;
        prop_assert!((t - base - w * parts[k]).abs() < 1e-9);
    }

    #[test]
    fn written_structures_parse_back(seed in 0u64..1000, g in transform()) {
        let p = pair(seed, 0.5);
        let s = p.bound.transformed(&g);
        let text = format_models(&[s.clone(), p.bound.clone()]);
        prop_assert_eq!(text.matches("ENDMDL").count(), 2);
        let parsed = parse_pdb_str(&text, "t").unwrap();
        let expect = state_records(&s);
        prop_assert_eq!(parsed.records.len(), expect.len());
        for (a, b) in parsed.records.iter().zip(&expect) {
            prop_assert_eq!((a.chain, a.seq, &a.name), (b.chain, b.seq, &b.name));
            prop_assert!((a.ca - b.ca).amax() <= 5e-4 + 1e-12);
            prop_assert!((a.n - b.n).amax() <= 5e-4 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn oracle_sampling_is_pose_equivariant(seed in 0u64..1000, g in transform()) {
        let p = pair(seed, 0.6);
        let cfg = SamplerConfig { n_steps: 20, mode: flexdock::sampler::SamplerMode::Deterministic, ..SamplerConfig::default() };
        let run = |unbound: &ComplexState, bound: &ComplexState| {
            sample(unbound, &OracleScore::new(bound.clone()), &cfg, 2.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
        };
        let a = run(&p.unbound, &p.bound);
        let b = run(&p.unbound.transformed(&g), &p.bound.transformed(&g));
        // The random initial pose is drawn in the world frame, so compare
        // poses relative to the receptor.
        let rel = |s: &ComplexState, r: &ComplexState| {
            let fit = kabsch(&s.receptor.positions(), &r.receptor.positions(), None).unwrap();
            s.transformed(&fit)
        };
        let fa = rel(&a.final_state, &p.bound);
        let fb = rel(&b.final_state, &p.bound);
        prop_assert!(crmsd(&fa, &p.bound).unwrap() < 0.5);
        prop_assert!(crmsd(&fb, &p.bound).unwrap() < 0.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_step_is_equivariant_and_rigid_part_commutes(seed in 0u64..1000, g in transform(), zt in vec3(2.0), zr in vec3(2.0)) {
        let p = pair(seed, 0.7);
        let sched = GlobalSchedule::default();
        let flex = ExponentialFlex::new(2.0).unwrap();
        let oracle = OracleScore::new(p.bound.clone());
        let req = |s: &ComplexState| -> flexdock::model::ScoreOutput {
            oracle.score(&ScoreRequest { state: s, t: 0.6, tau: 0.6, alpha: 0.7, sigma_tr: sched.sigma_tr(0.6), sigma_rot: sched.sigma_rot(0.6) }).unwrap()
        };
        let (x0, xg) = (p.unbound.clone(), p.unbound.transformed(&g));
        let q = g.rotation;
        let (a, _) = step(&x0, &req(&x0), 0.6, 0.6, 0.025, &flex, &sched, Some((zt, zr)), false, 0).unwrap();
        let (b, _) = step(&xg, &req(&xg), 0.6, 0.6, 0.025, &flex, &sched, Some((q * zt, q * zr)), false, 0).unwrap();
        prop_assert!(a.transformed(&g).max_deviation(&b) < 1e-4);

        // Rigid global motion leaves the ligand shape produced by the residue update untouched.
        let (drift, _) = step(&x0, &req(&x0), 0.6, 0.6, 0.025, &flex, &sched, None, false, 0).unwrap();
        let mut residue_only = req(&x0);
        residue_only.global_tr = Vec3::zeros();
        residue_only.global_rot = Vec3::zeros();
        let (flexed, _) = step(&x0, &residue_only, 0.6, 0.6, 0.025, &flex, &sched, None, false, 0).unwrap();
        let (pd, pf) = (drift.ligand.positions(), flexed.ligand.positions());
        prop_assert!(superposed_rmsd(&pd, &pf).unwrap() < 1e-8);
        let change = |x: &[Vec3]| superposed_rmsd(x, &x0.ligand.positions()).unwrap();
        prop_assert!((change(&pd) - change(&pf)).abs() < 1e-8);
    }
}

#[test]
fn forty_one_snapshots_give_forty_one_models() {
    let p = pair(1, 0.5);
    let cfg = SamplerConfig::default();
    let res = sample(&p.unbound, &OracleScore::new(p.bound.clone()), &cfg, 2.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let text = format_models(&res.trajectory.states);
    assert_eq!(text.matches("MODEL ").count(), 41);
    let chains: std::collections::BTreeSet<char> = parse_pdb_str(&text, "t").unwrap().records.iter().map(|r| r.chain).collect();
    assert_eq!(chains, ['A', 'B'].into_iter().collect());
}

#[test]
fn tau_zero_noise_keeps_bound_residues() {
    let p = pair(4, 0.9);
    let sup = superpose_unbound(&p.bound, &p.unbound).unwrap();
    let noise = GlobalNoise { translation: Vec3::new(3.0, 0.0, 0.0), rotation: Rotation::from_axis_angle(&Vec3::x(), 0.4) };
    let s = forward_noise_with(&p.bound, &sup, 0.5, 0.0, &ExponentialFlex::new(2.0).unwrap(), &GlobalSchedule::default(), &noise).unwrap();
    assert_eq!(s.noisy_state.receptor, p.bound.receptor);
    let (a, b) = (pairwise(&s.noisy_state.ligand.positions()), pairwise(&p.bound.ligand.positions()));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
}
