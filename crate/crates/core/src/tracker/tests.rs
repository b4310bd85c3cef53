use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::warp_similarity;
use crate::synth::{synth_sequence, Background, MotionScript};

fn pair(lo: Vec<f64>, hi: Vec<f64>, channels: usize) -> FeaturePair {
    FeaturePair {
        lo: FeatureMap::new(channels, 8, 8, 8.0, lo).unwrap(),
        hi: FeatureMap::new(channels, 6, 6, 8.0, hi).unwrap(),
    }
}

fn filled(v: f64, channels: usize) -> FeaturePair {
    pair(vec![v; channels * 64], vec![v; channels * 36], channels)
}

fn random_pair(rng: &mut impl Rng, channels: usize) -> FeaturePair {
    pair(
        (0..channels * 64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..channels * 36).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        channels,
    )
}

fn state_with(first: FeaturePair) -> TrackerState {
    TrackerState {
        pose: OrientedBox::new(50.0, 50.0, 20.0, 20.0, 0.0).unwrap(),
        moving_template: first.clone(),
        first_template: first,
        mask: None,
        frame_index: 0,
        initial_size: (20.0, 20.0),
        last_step: None,
    }
}

fn scene(seed: u64, w: f64, h: f64) -> (Image, OrientedBox) {
    let mut s = MotionScript::new(OrientedBox::new(128.0, 128.0, w, h, 0.0).unwrap());
    s.seed = seed;
    s.background = Background::Textured;
    let seq = synth_sequence(&s, 1, (256, 256)).unwrap();
    ((*seq.frames[0].load().unwrap()).clone(), seq.groundtruth[0])
}

fn is_identity_property(c: &CandidateSpec) -> (bool, bool) {
    (c.scale != 1.0, c.angle != 0.0)
}

#[test]
fn candidate_count_and_single_change_law() {
    for m in [1, 3, 5, 7, 9] {
        for n in [1, 3, 5, 7, 9] {
            let cfg = TrackerConfig {
                scale_count: m,
                angle_count: n,
                ..TrackerConfig::default()
            };
            let set = candidate_set(&cfg);
            assert_eq!(set.len(), m + n - 1, "M={m} N={n}");
            assert_eq!(set.iter().filter(|c| c.is_identity()).count(), 1);
            for c in set.iter().filter(|c| !c.is_identity()) {
                let (ds, da) = is_identity_property(c);
                assert!(ds ^ da, "{c:?} changes both or neither");
            }
            let scales = set.iter().filter(|c| c.angle == 0.0).count();
            let angles = set.iter().filter(|c| c.scale == 1.0).count();
            assert_eq!((scales, angles), (m, n));
        }
    }
}

#[test]
fn default_candidates_are_the_five_published_pairs() {
    let set = candidate_set(&TrackerConfig::default());
    let expected = [
        (1.0375, 0.0, 0.973),
        (0.964, 0.0, 0.973),
        (1.0, 0.0, 1.0),
        (1.0, PI / 8.0, 0.975),
        (1.0, -PI / 8.0, 0.975),
    ];
    assert_eq!(set.len(), 5);
    for (c, (s, a, p)) in set.iter().zip(expected) {
        assert!((c.scale - s).abs() < 1e-3, "{c:?}");
        assert!((c.angle - a).abs() < 1e-12, "{c:?}");
        assert_eq!(c.penalty, p);
    }
    assert!((set[1].scale - 1.0 / 1.0375).abs() < 1e-15);
}

#[test]
fn one_angle_or_disabled_angles_give_scale_only_tracking() {
    let three = TrackerConfig {
        angle_count: 1,
        ..TrackerConfig::default()
    };
    let off = TrackerConfig {
        angle_enabled: false,
        ..TrackerConfig::default()
    };
    for cfg in [three, off] {
        let set = candidate_set(&cfg);
        assert_eq!(set.len(), 3);
        assert!(set.iter().all(|c| c.angle == 0.0));
    }
    let five = TrackerConfig {
        scale_count: 5,
        angle_count: 5,
        ..TrackerConfig::default()
    };
    assert_eq!(candidate_set(&five).len(), 9);
}

#[test]
fn init_gates_the_mask_on_aspect_ratio() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, _) = scene(1, 40.0, 40.0);
    let mk = |w: f64, h: f64| {
        let b = AxisBox::new(128.0, 128.0, w, h).unwrap();
        tracker.init(&img, &b).unwrap().mask.map(|m| m.orientation)
    };
    assert_eq!(mk(100.0, 200.0), Some(MaskOrientation::Tall));
    assert_eq!(mk(100.0, 100.0), None);
    assert_eq!(mk(160.0, 100.0), Some(MaskOrientation::Wide));
    assert_eq!(mk(150.0, 100.0), None);
    let no_mask = Tracker::new(TrackerConfig {
        mask_enabled: false,
        ..TrackerConfig::default()
    })
    .unwrap();
    let b = AxisBox::new(128.0, 128.0, 100.0, 200.0).unwrap();
    assert!(no_mask.init(&img, &b).unwrap().mask.is_none());
}

#[test]
fn init_builds_template_geometry_and_seeds_the_moving_average() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, gt) = scene(2, 40.0, 30.0);
    let st = tracker.init_oriented(&img, &gt, 3).unwrap();
    assert_eq!([st.first_template.lo.height(), st.first_template.hi.height()], template_cells());
    assert_eq!(template_cells(), [8, 6]);
    assert_eq!(st.moving_template, st.first_template);
    assert_eq!(st.frame_index, 3);
    assert_eq!(st.pose, gt);
}

#[test]
fn degenerate_boxes_are_rejected_and_centers_clamped() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, _) = scene(3, 40.0, 40.0);
    for (w, h) in [(1.0, 20.0), (20.0, 0.5)] {
        let b = OrientedBox::new(100.0, 100.0, w, h, 0.0).unwrap();
        assert!(matches!(tracker.init_oriented(&img, &b, 0), Err(Error::InvalidBox(_))));
    }
    let b = OrientedBox::new(-30.0, 400.0, 20.0, 20.0, 0.0).unwrap();
    let st = tracker.init_oriented(&img, &b, 0).unwrap();
    assert_eq!((st.pose.x, st.pose.y), (0.0, 255.0));
}

#[test]
fn update_fixed_point() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let first = random_pair(&mut rng, 3);
    let mut st = state_with(first.clone());
    for _ in 0..50 {
        let t = tracker.update_template(&mut st, &first).unwrap();
        for (a, b) in t.lo.data().iter().chain(t.hi.data()).zip(first.lo.data().iter().chain(first.hi.data())) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn zero_update_rate_keeps_the_first_template() {
    let tracker = Tracker::new(TrackerConfig {
        lambda_u: 0.0,
        ..TrackerConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let first = random_pair(&mut rng, 2);
    let mut st = state_with(first.clone());
    for _ in 0..10 {
        let tracked = random_pair(&mut rng, 2);
        assert_eq!(tracker.update_template(&mut st, &tracked).unwrap(), first);
    }
}

#[test]
fn second_frame_substitution() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut st = state_with(filled(0.0, 2));
    let g = 2.5;
    let t2 = tracker.update_template(&mut st, &filled(g, 2)).unwrap();
    for v in t2.lo.data().iter().chain(t2.hi.data()) {
        assert!((v - 0.003 * g).abs() < 1e-15, "{v}");
    }
    assert!(st.moving_template.lo.data().iter().all(|v| (v - 0.006 * g).abs() < 1e-15));
}

#[test]
fn update_rejects_mismatched_geometry() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut st = state_with(filled(0.0, 2));
    assert!(tracker.update_template(&mut st, &filled(1.0, 3)).is_err());
    let wrong = FeaturePair {
        lo: FeatureMap::zeros(2, 7, 7, 8.0),
        hi: FeatureMap::zeros(2, 6, 6, 8.0),
    };
    assert!(tracker.update_template(&mut st, &wrong).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn templates_stay_in_the_feature_envelope(seed in 0u64..10_000, lambda_u in 0.0f64..1.0, lambda_s in 0.0f64..1.0) {
        let tracker = Tracker::new(TrackerConfig { lambda_u, lambda_s, ..TrackerConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = random_pair(&mut rng, 2);
        let mut st = state_with(first.clone());
        let n = first.lo.data().len() + first.hi.data().len();
        let flat = |p: &FeaturePair| p.lo.data().iter().chain(p.hi.data()).copied().collect::<Vec<f64>>();
        let mut lo = flat(&first);
        let mut hi = lo.clone();
        for _ in 0..30 {
            let tracked = random_pair(&mut rng, 2);
            for (i, v) in flat(&tracked).into_iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
            let t = tracker.update_template(&mut st, &tracked).unwrap();
            for (cells, p) in [(flat(&t), "template"), (flat(&st.moving_template), "moving")] {
                for i in 0..n {
                    prop_assert!(cells[i] >= lo[i] - 1e-12 && cells[i] <= hi[i] + 1e-12, "{} cell {}", p, i);
                }
            }
        }
    }
}

#[test]
fn masked_template_cells_never_reach_the_response() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, _) = scene(6, 30.0, 60.0);
    let b = AxisBox::new(128.0, 128.0, 30.0, 60.0).unwrap();
    let st = tracker.init(&img, &b).unwrap();
    let mask = st.mask.clone().expect("tall target is masked");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let search = random_pair(&mut rng, st.first_template.lo.channels());
    let search = FeaturePair {
        lo: FeatureMap::new(
            search.lo.channels(),
            24,
            24,
            8.0,
            (0..search.lo.channels() * 576).map(|_| rng.gen::<f64>()).collect(),
        )
        .unwrap(),
        hi: FeatureMap::new(
            search.hi.channels(),
            22,
            22,
            8.0,
            (0..search.hi.channels() * 484).map(|_| rng.gen::<f64>()).collect(),
        )
        .unwrap(),
    };
    let respond = |s: &TrackerState| {
        let t = tracker.correlation_template(s).unwrap();
        (
            cross_correlate(&t.lo, &search.lo).unwrap(),
            cross_correlate(&t.hi, &search.hi).unwrap(),
        )
    };
    let base = respond(&st);
    let mut perturbed = st.clone();
    for level in Level::ALL {
        let m = mask.level(level).unwrap().to_vec();
        for tpl in [&mut perturbed.first_template, &mut perturbed.moving_template] {
            let map = tpl.level_mut(level);
            let cells = map.height() * map.width();
            for (i, v) in map.data_mut().iter_mut().enumerate() {
                if m[i % cells] == 0.0 {
                    *v += rng.gen_range(-5.0..5.0);
                }
            }
        }
    }
    assert_ne!(perturbed.first_template, st.first_template);
    assert_eq!(respond(&perturbed), base);
}

#[test]
fn pose_accumulates_selected_scales_and_angles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let set = candidate_set(&TrackerConfig::default());
    let start = OrientedBox::new(60.0, 70.0, 30.0, 20.0, 0.0).unwrap();
    let mut pose = start;
    let (mut angle, mut scale) = (0.0, 1.0);
    for _ in 0..200 {
        let c = set[rng.gen_range(0..set.len())];
        pose = advance_pose(&pose, &c, (0.0, 0.0));
        angle += c.angle;
        scale *= c.scale;
    }
    assert!((normalize_angle(pose.theta - angle)).abs() < 1e-9);
    assert!(pose.theta > -PI && pose.theta <= PI);
    assert!((pose.w / start.w - scale).abs() < 1e-9 * scale);
    assert!((pose.h / start.h - scale).abs() < 1e-9 * scale);
    assert_eq!((pose.x, pose.y), (60.0, 70.0));
}

fn track_once(frame0: &Image, gt: &OrientedBox, frame1: &Image) -> (TrackerState, OrientedBox) {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut st = tracker.init_oriented(frame0, gt, 0).unwrap();
    let pose = tracker.track(&mut st, frame1).unwrap();
    (st, pose)
}

#[test]
fn static_scene_selects_identity_without_moving() {
    for seed in 0..3 {
        let (img, gt) = scene(10 + seed, 48.0, 40.0);
        let (st, pose) = track_once(&img, &gt, &img);
        let step = st.last_step.unwrap();
        assert!(step.candidate.is_identity(), "seed {seed}: {:?}", step.candidate);
        let cell = context_side(&gt.axis()) * SEARCH_SIZE as f64 / TEMPLATE_SIZE as f64 / SEARCH_SIZE as f64 * 8.0;
        assert!(step.shift.0.hypot(step.shift.1) <= cell, "seed {seed}: {:?}", step.shift);
        assert_eq!((pose.w, pose.h, pose.theta), (gt.w, gt.h, gt.theta));
        assert_eq!(st.frame_index, 1);
    }
}

#[test]
fn rotated_scene_selects_the_matching_angle() {
    for seed in 0..3 {
        let (img, gt) = scene(20 + seed, 48.0, 40.0);
        for a in [PI / 8.0, -PI / 8.0] {
            let turned = warp_similarity(&img, (gt.x, gt.y), 1.0, -a);
            let (st, pose) = track_once(&img, &gt, &turned);
            let c = st.last_step.unwrap().candidate;
            assert_eq!((c.scale, c.angle), (1.0, a), "seed {seed}");
            assert!((pose.theta - a).abs() < 1e-12);
        }
    }
}

#[test]
fn scaled_scene_selects_the_matching_scale() {
    for seed in 0..3 {
        let (img, gt) = scene(30 + seed, 48.0, 40.0);
        for s in [1.0375, 1.0 / 1.0375] {
            let zoomed = warp_similarity(&img, (gt.x, gt.y), s, 0.0);
            let (st, pose) = track_once(&img, &gt, &zoomed);
            let c = st.last_step.unwrap().candidate;
            assert_eq!((c.scale, c.angle), (s, 0.0), "seed {seed}");
            assert!((pose.w - gt.w * s).abs() < 1e-9);
        }
    }
}

#[test]
fn tracking_always_yields_a_pose() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, gt) = scene(40, 40.0, 30.0);
    let mut st = tracker.init_oriented(&img, &gt, 0).unwrap();
    let blank = Image::filled(256, 256, 1, 0.5);
    for _ in 0..5 {
        let p = tracker.track(&mut st, &blank).unwrap();
        assert!(p.x.is_finite() && p.y.is_finite() && p.w > 0.0);
        assert!(p.x >= 0.0 && p.x <= 255.0 && p.y >= 0.0 && p.y <= 255.0);
    }
    let small = Image::filled(64, 48, 1, 0.5);
    let p = tracker.track(&mut st, &small).unwrap();
    assert!(p.x <= 63.0 && p.y <= 47.0);
}

#[test]
fn size_stays_within_the_clamp() {
    let tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let (img, gt) = scene(41, 40.0, 30.0);
    let mut st = tracker.init_oriented(&img, &gt, 0).unwrap();
    st.pose.w = gt.w * 4.99;
    st.pose.h = gt.h * 4.99;
    for _ in 0..3 {
        let p = tracker.track(&mut st, &img).unwrap();
        assert!(p.w <= gt.w * MAX_SCALE + 1e-9 && p.w >= gt.w * MIN_SCALE - 1e-9);
    }
}

#[test]
fn disabled_update_freezes_the_template() {
    let tracker = Tracker::new(TrackerConfig {
        update_enabled: false,
        ..TrackerConfig::default()
    })
    .unwrap();
    let (img, gt) = scene(42, 40.0, 30.0);
    let mut st = tracker.init_oriented(&img, &gt, 0).unwrap();
    let shifted = warp_similarity(&img, (gt.x + 3.0, gt.y), 1.0, 0.1);
    tracker.track(&mut st, &shifted).unwrap();
    assert_eq!(st.moving_template, st.first_template);

    let updating = Tracker::new(TrackerConfig::default()).unwrap();
    let mut st = updating.init_oriented(&img, &gt, 0).unwrap();
    updating.track(&mut st, &shifted).unwrap();
    assert_ne!(st.moving_template, st.first_template);
}
