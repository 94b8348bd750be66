use std::path::PathBuf;

use dualcloak::embedding::{ToyLinear, VerificationThreshold};
use dualcloak::evaluation::{
    attack_success_rate, comparison_grid, fid, pair_similarities, success_rate_from_similarities,
    EvaluationReport, FeatureExtractor, GridLayout, ModelScore, RandomProjectionExtractor,
};
use dualcloak::image::{load_image, save_image};
use dualcloak::attacks::AttackConfig;
use dualcloak::{Error, ImageTensor};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn identity_embedder() -> ToyLinear {
    ToyLinear::from_matrix("id", (1, 2, 1), 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()
}

fn px(a: f64, b: f64) -> ImageTensor {
    ImageTensor::new(1, 2, 1, vec![a, b]).unwrap()
}

#[test]
fn asr_counts_pairs_at_or_above_tau() {
    // cos((1, s), (1, 0)) = 1 / sqrt(1 + s^2) >= 0.9 exactly when s <= 0.4843.
    let slopes = [0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9, 1.0, 0.55, 0.5];
    let protected: Vec<_> = slopes.iter().map(|s| px(1.0, *s)).collect();
    let targets = vec![px(1.0, 0.0); 10];
    let passing = slopes.iter().filter(|s| 1.0 / (1.0 + *s * *s).sqrt() >= 0.9).count();
    assert_eq!(passing, 3);
    let thr = VerificationThreshold::new(0.9, 0.01).unwrap();
    let asr = attack_success_rate(&protected, &targets, &identity_embedder(), &thr).unwrap();
    assert!((asr - 0.3).abs() < 1e-12);
}

#[test]
fn asr_extremes_and_length_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = ToyLinear::seeded("m", (6, 6, 3), 16, 3);
    let imgs: Vec<_> = (0..8)
        .map(|_| ImageTensor::from_fn(6, 6, 3, |_, _, _| rng.random::<f64>()).unwrap())
        .collect();
    let one = VerificationThreshold::new(1.0, 0.01).unwrap();
    assert_eq!(attack_success_rate(&imgs, &imgs, &model, &one).unwrap(), 1.0);
    let noise: Vec<_> = (0..8)
        .map(|_| ImageTensor::from_fn(6, 6, 3, |_, _, _| rng.random::<f64>()).unwrap())
        .collect();
    let strict = VerificationThreshold::new(0.999, 0.01).unwrap();
    assert_eq!(attack_success_rate(&noise, &imgs, &model, &strict).unwrap(), 0.0);
    assert!(matches!(
        attack_success_rate(&noise[..3], &imgs, &model, &strict),
        Err(Error::Parameter(_))
    ));
}

proptest! {
    #[test]
    fn asr_is_non_increasing_in_tau(
        sims in prop::collection::vec(-1.0f64..1.0, 1..60),
        t1 in -1.0f64..1.0,
        t2 in -1.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(success_rate_from_similarities(&sims, lo) >= success_rate_from_similarities(&sims, hi));
    }
}

#[test]
fn similarities_feed_the_rate() {
    let protected = vec![px(1.0, 0.0), px(0.0, 1.0)];
    let targets = vec![px(0.5, 0.0), px(1.0, 0.0)];
    let sims = pair_similarities(&protected, &targets, &identity_embedder()).unwrap();
    assert_eq!(sims, vec![1.0, 0.0]);
    assert_eq!(success_rate_from_similarities(&sims, 0.5), 0.5);
}

fn gaussian_sample(rng: &mut ChaCha8Rng, n: usize, mean: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

#[test]
fn fid_of_a_set_with_itself_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = gaussian_sample(&mut rng, 200, &[0.0; 5]);
    assert!(fid(&a, &a).unwrap().abs() < 1e-6);
}

#[test]
fn fid_is_symmetric_and_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = gaussian_sample(&mut rng, 300, &[0.0, 1.0, -1.0, 0.5]);
    let b: Vec<Vec<f64>> = gaussian_sample(&mut rng, 250, &[0.3, 0.0, 0.0, 0.0])
        .into_iter()
        .map(|v| vec![2.0 * v[0], v[1], 0.5 * v[2] + v[0], v[3]])
        .collect();
    let ab = fid(&a, &b).unwrap();
    assert!((ab - fid(&b, &a).unwrap()).abs() < 1e-6);

    let random = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = random.qr().q();
    let rotate = |set: &[Vec<f64>]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|v| (&q * nalgebra::DVector::from_column_slice(v)).iter().copied().collect())
            .collect()
    };
    let rotated = fid(&rotate(&a), &rotate(&b)).unwrap();
    assert!((rotated - ab).abs() < 1e-4, "{rotated} vs {ab}");
}

#[test]
fn fid_recovers_a_mean_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = [1.0, -0.5, 0.3, 0.8];
    let expected: f64 = m.iter().map(|v| v * v).sum();
    let a = gaussian_sample(&mut rng, 10_000, &[0.0; 4]);
    let b = gaussian_sample(&mut rng, 10_000, &m);
    let value = fid(&a, &b).unwrap();
    assert!((value - expected).abs() <= 0.05 * expected, "{value} vs {expected}");
}

#[test]
fn extractor_ranks_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base: Vec<ImageTensor> = (0..40)
        .map(|_| ImageTensor::from_fn(16, 16, 3, |y, _, _| 0.2 + 0.6 * y as f64 / 16.0 + rng.random_range(0.0..0.05)).unwrap())
        .collect();
    let shifted = |amount: f64| -> Vec<ImageTensor> {
        base.iter()
            .map(|img| img.with_data(img.as_slice().iter().map(|v| (v + amount).min(1.0)).collect()).unwrap())
            .collect()
    };
    let ex = RandomProjectionExtractor::default();
    let feats = |set: &[ImageTensor]| -> Vec<Vec<f64>> { set.iter().map(|i| ex.extract(i).unwrap()).collect() };
    let f0 = feats(&base);
    let near = fid(&f0, &feats(&shifted(0.02))).unwrap();
    let far = fid(&f0, &feats(&shifted(0.2))).unwrap();
    assert!(near < far);
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/grid_golden.png")
}

fn fixture_grid() -> ImageTensor {
    let cell = |f: &dyn Fn(usize, usize, usize) -> f64| ImageTensor::from_fn(12, 12, 3, f).unwrap();
    let rows = vec![
        (
            "CLEAN".to_string(),
            vec![cell(&|y, _, c| (y * 20 + c * 30) as f64 / 300.0), cell(&|_, x, _| x as f64 / 11.0)],
        ),
        (
            "AGE-FTM 1".to_string(),
            vec![cell(&|y, x, _| ((y + x) % 2) as f64), ImageTensor::filled(12, 12, 1, 0.25).unwrap()],
        ),
    ];
    comparison_grid(&rows).unwrap()
}

#[test]
fn grid_matches_the_committed_golden_png() {
    let grid = fixture_grid();
    let layout = GridLayout::default();
    assert_eq!((grid.height(), grid.width()), layout.size(2, 2, 12, 12));
    assert_eq!(grid.width(), 2 * 12 + 3 * layout.gutter);
    let path = golden_path();
    if std::env::var_os("DUALCLOAK_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_image(&grid, &path).unwrap();
    }
    let golden = load_image(&path).unwrap();
    assert_eq!(golden.shape(), grid.shape());
    // The fixture cells are multiples of 1/300 and 1/11, so compare after quantisation.
    let quantised: Vec<u8> = grid.as_slice().iter().map(|v| (v * 255.0).round() as u8).collect();
    let stored: Vec<u8> = golden.as_slice().iter().map(|v| (v * 255.0).round() as u8).collect();
    assert_eq!(quantised, stored);
}

#[test]
fn single_cell_grid_is_the_image_under_a_label_strip() {
    let img = ImageTensor::from_fn(9, 7, 3, |y, x, c| ((y * 7 + x) * 3 + c) as f64 / 200.0).unwrap();
    let layout = GridLayout::default();
    let grid = comparison_grid(&[("A".to_string(), vec![img.clone()])]).unwrap();
    assert_eq!(grid.height(), 9 + layout.label_height + 2 * layout.gutter);
    let (oy, ox) = layout.cell_origin(0, 0, 9, 7);
    for y in 0..9 {
        for x in 0..7 {
            for c in 0..3 {
                assert_eq!(grid.get(oy + y, ox + x, c), img.get(y, x, c));
            }
        }
    }
    let mismatched = comparison_grid(&[("A".into(), vec![img, ImageTensor::filled(3, 3, 3, 0.0).unwrap()])]);
    assert!(matches!(mismatched, Err(Error::Parameter(_))));
}

#[test]
fn report_round_trips_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = EvaluationReport::new(AttackConfig::default(), 4);
    report.per_model.push(ModelScore { model: "convnet-d".into(), asr: 0.5, tau: 0.8, black_box: true });
    report.fid = Some(1.5);
    report.api_mean_confidence = Some(42.0);
    let path = dir.path().join("r.json");
    report.save(&path).unwrap();
    assert_eq!(EvaluationReport::load(&path).unwrap(), report);
    report.api_mean_confidence = Some(140.0);
    assert!(report.validate().is_err());
}
