use dualcloak::blur::BlurParams;
use dualcloak::masking::{
    combine_masks, hair_mask, hair_texture_mask, high_freq, parse_face, texture_mask, AnnotationParser,
    BinaryMask, LabelMap, LabelSet, StaticParser,
};
use dualcloak::{Error, ImageTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HAIR: u8 = 17;

fn random_image(seed: u64, h: usize, w: usize) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageTensor::from_fn(h, w, 3, |_, _, _| rng.random::<f64>()).unwrap()
}

fn random_mask(seed: u64, h: usize, w: usize, p: f64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BinaryMask::from_fn(h, w, |_, _| rng.random::<f64>() < p)
}

#[test]
fn step_edge_response_is_confined_to_the_kernel_support() {
    let img = ImageTensor::from_fn(64, 64, 3, |_, x, _| if x >= 32 { 1.0 } else { 0.0 }).unwrap();
    let hf = high_freq(&img, BlurParams::default()).unwrap();
    for y in 0..64 {
        for x in 0..64 {
            let v = hf[y * 64 + x];
            assert!((0.0..=1.0).contains(&v));
            if (23..=40).contains(&x) {
                assert!(v > 0.0, "expected response at column {x}");
            } else {
                assert!(v.abs() < 1e-12, "unexpected response {v} at column {x}");
            }
        }
    }
}

#[test]
fn constant_images_have_no_texture() {
    for v in [0.0, 0.3, 1.0] {
        let img = ImageTensor::filled(20, 20, 3, v).unwrap();
        assert!(high_freq(&img, BlurParams::default()).unwrap().iter().all(|h| h.abs() < 1e-12));
        assert!(texture_mask(&img, 1e-9, BlurParams::default()).unwrap().is_empty());
    }
}

#[test]
fn negative_gamma_is_rejected() {
    let img = ImageTensor::filled(4, 4, 1, 0.5).unwrap();
    assert!(matches!(texture_mask(&img, -0.1, BlurParams::default()), Err(Error::Parameter(_))));
}

#[test]
fn forty_percent_hair_annotation() {
    let dir = tempfile::tempdir().unwrap();
    let (h, w) = (20, 25);
    // 40% of 500 pixels: the first 8 of 20 rows.
    let labels: Vec<u8> = (0..h * w).map(|i| if i / w < 8 { HAIR } else { 1 }).collect();
    let map = LabelMap::new(h, w, labels).unwrap();
    map.save_png(dir.path().join("face_007.png")).unwrap();
    let parser = AnnotationParser::new(dir.path(), LabelSet::celebamask_hq());
    let img = ImageTensor::filled(h, w, 3, 0.4).unwrap();
    let parsed = parse_face(&parser, &img, "face_007").unwrap();
    assert_eq!(parsed, map);
    let hair = hair_mask(&parsed, &LabelSet::celebamask_hq(), HAIR).unwrap();
    assert_eq!(hair.count_ones(), h * w * 2 / 5);
}

#[test]
fn all_hair_annotation_gives_the_texture_mask() {
    let img = random_image(5, 16, 16);
    let map = LabelMap::new(16, 16, vec![HAIR; 256]).unwrap();
    let parser = StaticParser::new(map, LabelSet::celebamask_hq());
    let m = hair_texture_mask(&img, &parser, "x", 0.003, BlurParams::default()).unwrap();
    assert_eq!(m, texture_mask(&img, 0.003, BlurParams::default()).unwrap());
}

#[test]
fn checkerboard_hair_count() {
    for (h, w) in [(5, 5), (4, 7), (9, 3)] {
        let labels: Vec<u8> = (0..h * w).map(|i| if (i / w + i % w) % 2 == 0 { HAIR } else { 0 }).collect();
        let map = LabelMap::new(h, w, labels).unwrap();
        let m = hair_mask(&map, &LabelSet::celebamask_hq(), HAIR).unwrap();
        assert_eq!(m.count_ones(), (h * w).div_ceil(2));
    }
}

#[test]
fn unknown_hair_label_is_a_parameter_error() {
    let map = LabelMap::new(2, 2, vec![0; 4]).unwrap();
    assert!(matches!(hair_mask(&map, &LabelSet::celebamask_hq(), 200), Err(Error::Parameter(_))));
}

#[test]
fn combine_matches_and_oracle_on_fixture_pair() {
    let img = random_image(11, 32, 32);
    let tex = texture_mask(&img, 0.05, BlurParams::default()).unwrap();
    let hair = random_mask(12, 32, 32, 0.4);
    let combined = combine_masks(&tex, &hair).unwrap();
    for y in 0..32 {
        for x in 0..32 {
            assert_eq!(combined.get(y, x), tex.get(y, x) && hair.get(y, x));
        }
    }
    let disjoint_a = BinaryMask::from_fn(8, 8, |y, _| y < 4);
    let disjoint_b = BinaryMask::from_fn(8, 8, |y, _| y >= 4);
    assert!(combine_masks(&disjoint_a, &disjoint_b).unwrap().is_empty());
    assert!(combine_masks(&disjoint_a, &BinaryMask::ones(8, 9)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn texture_mask_shrinks_as_gamma_grows(seed in any::<u64>(), g1 in 0.0f64..0.2, dg in 0.0f64..0.2) {
        let img = random_image(seed, 12, 12);
        let p = BlurParams::new(5, 1.5).unwrap();
        let loose = texture_mask(&img, g1, p).unwrap();
        let tight = texture_mask(&img, g1 + dg, p).unwrap();
        prop_assert!(tight.is_subset_of(&loose));
    }

    #[test]
    fn combined_mask_is_a_subset_of_both(seed in any::<u64>(), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let a = random_mask(seed, 10, 13, p);
        let b = random_mask(seed.wrapping_add(1), 10, 13, q);
        let c = combine_masks(&a, &b).unwrap();
        prop_assert!(c.is_subset_of(&a));
        prop_assert!(c.is_subset_of(&b));
        prop_assert_eq!(combine_masks(&a, &a).unwrap(), a);
    }
}
