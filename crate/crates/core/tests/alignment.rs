mod common;

use handcrop::alignment::{
    ambiguity_scan, pnp_align, pnp_align_with_shift, synthetic_population, PopulationConfig, RigidPose, RootAlignment,
    ScanConfig, ScanMode,
};
use handcrop::camera::{project, CameraIntrinsics};
use handcrop::hand_model::{HandParams, KeypointSet2D, KeypointSet3D, SkinnedHandModel};
use handcrop::metrics::{mpjpe, root_relative_3d_error, AmbiguityRecord};
use handcrop::rotation::rotation_angle_between;
use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Articulated hand in its own frame, wrist at the origin.
fn canonical_hand(model: &SkinnedHandModel, rng: &mut impl Rng) -> KeypointSet3D {
    let mut p = common::random_params(rng, model.shape_rank());
    p.root_rot = Vector3::zeros();
    p.root_trans = Vector3::zeros();
    model.forward_kinematics(&p).unwrap().joints
}

fn random_pose(rng: &mut impl Rng) -> RigidPose {
    RigidPose {
        rotation: common::random_rotation(rng),
        translation: Vector3::new(
            rng.gen_range(-100.0..100.0),
            rng.gen_range(-80.0..80.0),
            rng.gen_range(350.0..700.0),
        ),
    }
}

#[test]
fn noiseless_round_trip() {
    let model = common::model();
    let cam = common::camera(640, 480);
    let mut rng = common::rng(11);
    let mut good = 0;
    for _ in 0..100 {
        let hand = canonical_hand(&model, &mut rng);
        let truth = random_pose(&mut rng);
        let ref2d = project(&cam, &truth.apply(&hand)).unwrap();
        let sol = pnp_align(&ref2d, &hand, &cam).unwrap();
        assert!(sol.pose.is_proper(1e-9));
        let rot_err = rotation_angle_between(&sol.pose.rotation, &truth.rotation);
        let trans_err = (sol.pose.translation - truth.translation).norm();
        if rot_err < 1e-6 && trans_err < 1e-6 && sol.residual < 1e-8 {
            good += 1;
        }
    }
    assert!(good >= 99, "{good}/100 recovered");
}

#[test]
fn objective_never_increases() {
    let model = common::model();
    let cam = common::camera(640, 480);
    let mut rng = common::rng(12);
    let normal = Normal::new(0.0, 2.0).unwrap();
    for _ in 0..30 {
        let hand = canonical_hand(&model, &mut rng);
        let truth = random_pose(&mut rng);
        let clean = project(&cam, &truth.apply(&hand)).unwrap();
        let noise: Vec<Vector2<f64>> = (0..21)
            .map(|_| Vector2::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let noisy = KeypointSet2D::from_slice(
            &clean
                .points()
                .iter()
                .zip(&noise)
                .map(|(p, n)| p + n)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let sol = pnp_align(&noisy, &hand, &cam).unwrap();
        assert!(sol.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(sol.pose.is_proper(1e-9));
    }
}

#[test]
fn half_pixel_noise_envelope() {
    let model = common::model();
    let cam = common::camera(640, 480);
    let mut rng = common::rng(13);
    let normal = Normal::new(0.0, 0.5).unwrap();
    let (mut worst_res, mut worst_rot, mut worst_trans) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let hand = canonical_hand(&model, &mut rng);
        let truth = random_pose(&mut rng);
        let clean = project(&cam, &truth.apply(&hand)).unwrap();
        let noise: Vec<Vector2<f64>> = (0..21)
            .map(|_| Vector2::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let noisy = KeypointSet2D::from_slice(
            &clean
                .points()
                .iter()
                .zip(&noise)
                .map(|(p, n)| p + n)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let sol = pnp_align(&noisy, &hand, &cam).unwrap();
        worst_res = worst_res.max(sol.residual);
        worst_rot = worst_rot.max(rotation_angle_between(&sol.pose.rotation, &truth.rotation));
        worst_trans = worst_trans.max((sol.pose.translation - truth.translation).norm());
    }
    assert!(worst_res <= 1.0, "residual {worst_res}");
    // Envelope recorded from this seeded run, with headroom.
    assert!(worst_rot < 0.1, "rotation error {worst_rot}");
    assert!(worst_trans < 40.0, "translation error {worst_trans}");
}

#[test]
fn zero_shift_equals_plain_pnp() {
    let model = common::model();
    let cam = common::camera(640, 480);
    let mut rng = common::rng(14);
    let hand = canonical_hand(&model, &mut rng);
    let ref2d = project(&cam, &random_pose(&mut rng).apply(&hand)).unwrap();
    let other = canonical_hand(&model, &mut rng);
    let plain = pnp_align(&ref2d, &other, &cam).unwrap();
    let shifted = pnp_align_with_shift(&ref2d, &other, &cam, Vector2::zeros()).unwrap();
    assert_eq!(plain.pose, shifted.pose);
    assert_eq!(plain.residual, shifted.residual);
}

/// Low-resolution 60 degree camera and a hand facing it at 400 mm, centred
/// in the image.
fn witness_setup(model: &SkinnedHandModel) -> (CameraIntrinsics, KeypointSet3D) {
    let cam = common::camera(160, 120);
    let p = common::facing_pose(model.shape_rank(), Vector3::new(0.0, 0.0, 400.0));
    let joints = model.forward_kinematics(&p).unwrap().joints;
    let c = joints.centroid();
    (cam, joints.translated(&Vector3::new(-c.x, -c.y, 0.0)))
}

#[test]
fn corner_shift_witness() {
    let model = common::model();
    let (cam, ref3d) = witness_setup(&model);
    let ref2d = project(&cam, &ref3d).unwrap();
    let (_, hi) = ref2d.bounds();
    let shift = Vector2::new(cam.width() as f64 - 10.0 - hi.x, cam.height() as f64 - 10.0 - hi.y);
    let unshifted = pnp_align(&ref2d, &ref3d, &cam).unwrap().pose.apply(&ref3d);
    let sol = pnp_align_with_shift(&ref2d, &ref3d, &cam, shift).unwrap();
    let moved = sol.pose.apply(&ref3d);
    let wrist_relative = mpjpe(&moved, &unshifted);
    assert!(sol.residual < 0.5, "residual {}", sol.residual);
    assert!(wrist_relative > 5.0, "wrist-relative difference {wrist_relative}");
    // The keypoint-frame error cannot see a rigid re-pose of one hand.
    assert!(root_relative_3d_error(&moved, None, &unshifted, None).unwrap() < 1e-6);
}

#[test]
fn nine_shift_grid() {
    let model = common::model();
    let (cam, ref3d) = witness_setup(&model);
    let ref2d = project(&cam, &ref3d).unwrap();
    let (lo, hi) = ref2d.bounds();
    // Half of the room between the pattern and a 10 px border, each way.
    let sx = [0.5 * (10.0 - lo.x), 0.0, 0.5 * (cam.width() as f64 - 10.0 - hi.x)];
    let sy = [0.5 * (10.0 - lo.y), 0.0, 0.5 * (cam.height() as f64 - 10.0 - hi.y)];
    let mut poses = Vec::new();
    for y in sy {
        for x in sx {
            let sol = pnp_align_with_shift(&ref2d, &ref3d, &cam, Vector2::new(x, y)).unwrap();
            assert!(sol.residual < 0.5, "shift ({x}, {y}) residual {}", sol.residual);
            poses.push(sol.pose);
        }
    }
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            let d = rotation_angle_between(&poses[i].rotation, &poses[j].rotation)
                + (poses[i].translation - poses[j].translation).norm();
            assert!(d > 1e-3, "shifts {i} and {j} gave the same pose");
        }
    }
}

fn population(cam: &CameraIntrinsics, size: usize, seed: u64) -> Vec<HandParams> {
    let cfg = PopulationConfig {
        size,
        seed,
        ..PopulationConfig::default()
    };
    synthetic_population(cam, 10, &cfg).unwrap()
}

#[test]
fn reference_against_itself_is_all_zero() {
    let model = common::model();
    let cam = common::camera(320, 240);
    let pop = population(&cam, 1, 3);
    let out = ambiguity_scan(&pop[0], &pop, &model, &cam, &ScanConfig::new(ScanMode::Raw)).unwrap();
    assert_eq!(out.records.len(), 1);
    let r = &out.records[0];
    assert_eq!(
        [r.crop_px_dist, r.centered_2d_err, r.abs_3d_err, r.rootrel_3d_err],
        [0.0; 4]
    );
}

#[test]
fn scan_rows_and_order() {
    let model = common::model();
    let cam = common::camera(320, 240);
    let pop = population(&cam, 60, 4);
    for mode in ScanMode::ALL {
        let out = ambiguity_scan(&pop[0], &pop, &model, &cam, &ScanConfig::new(mode)).unwrap();
        assert_eq!(out.records.len() + out.failures.len(), pop.len());
        let mut ids: Vec<usize> = out
            .records
            .iter()
            .map(|r| r.pair_id)
            .chain(out.failures.iter().map(|f| f.pair_id))
            .collect();
        assert!(out.records.windows(2).all(|w| w[0].pair_id < w[1].pair_id));
        ids.sort_unstable();
        assert_eq!(ids, (0..pop.len()).collect::<Vec<_>>());
        assert!(out.records.iter().all(|r| r.is_valid()));
        serde_json::to_string(&out.failures).unwrap();
    }
}

#[test]
fn aligned_modes_structure() {
    let model = common::model();
    let cam = common::camera(320, 240);
    let pop = population(&cam, 200, 5);
    let scan = |mode| {
        ambiguity_scan(&pop[0], &pop, &model, &cam, &ScanConfig::new(mode))
            .unwrap()
            .records
    };
    let raw = scan(ScanMode::Raw);
    let pnp = scan(ScanMode::Pnp);
    let shifted = scan(ScanMode::PnpShift);
    let max = |rs: &[AmbiguityRecord], f: fn(&AmbiguityRecord) -> f64| rs.iter().map(f).fold(0.0, f64::max);
    let median_centered = |rs: &[AmbiguityRecord]| {
        let mut v: Vec<f64> = rs.iter().map(|r| r.centered_2d_err).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    // Hands sharing the reference's articulation (every fourth one) align
    // tightly without a shift; the rest differ in articulation, which no
    // rigid pose can undo.
    let same_take = |rs: &[AmbiguityRecord]| {
        rs.iter().filter(|r| r.pair_id % 4 == 0).fold((0.0f64, 0.0f64), |a, r| {
            (a.0.max(r.centered_2d_err), a.1.max(r.rootrel_3d_err))
        })
    };
    let (raw_2d, _) = same_take(&raw);
    let (pnp_2d, pnp_3d) = same_take(&pnp);
    let (_, shift_3d) = same_take(&shifted);
    assert!(
        pnp_2d < 3.0 && raw_2d > 10.0 * pnp_2d,
        "centered error raw {raw_2d} pnp {pnp_2d}"
    );
    assert!(pnp_3d < 10.0, "pnp 3D spread {pnp_3d}");
    assert!(
        shift_3d > 2.0 * pnp_3d,
        "pnp_shift 3D spread {shift_3d} vs pnp {pnp_3d}"
    );
    assert!(median_centered(&pnp) < 0.5 * median_centered(&raw));
    assert!(max(&pnp, |r| r.crop_px_dist) < 5.0);
    assert!(max(&shifted, |r| r.crop_px_dist) > 50.0);
    assert!(max(&shifted, |r| r.rootrel_3d_err) > max(&pnp, |r| r.rootrel_3d_err));
}

#[test]
fn scan_is_independent_of_thread_count() {
    let model = common::model();
    let cam = common::camera(320, 240);
    let pop = population(&cam, 80, 6);
    let mut cfg = ScanConfig::new(ScanMode::PnpShift);
    cfg.root_alignment = RootAlignment::Frame;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ambiguity_scan(&pop[0], &pop, &model, &cam, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}
