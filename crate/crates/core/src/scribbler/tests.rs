use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::imagecore::box_mean;
use crate::perception::{compute_jnd, JndParams};

/// White noise blurred twice with a 3×3 box, rescaled to `[lo, hi]`.
fn smooth_texture(h: usize, w: usize, seed: u64, lo: f32, hi: f32) -> PlaneImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = PlaneImage::from_fn(h, w, |_, _| rng.random::<f32>());
    let blurred = box_mean(&box_mean(&noise, 1), 1);
    let (mn, mx) = blurred
        .data()
        .iter()
        .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    blurred.map(|v| lo + (hi - lo) * (v - mn) / (mx - mn))
}

fn brute_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

fn block(p: &PlaneImage, r0: usize, c0: usize, s: usize) -> Vec<f32> {
    p.crop(r0, c0, s, s).into_vec()
}

#[test]
fn distance_examples() {
    let a = vec![0.3f32; 256];
    assert_eq!(patch_distance(&a, &a, 16), 0.0);
    let b: Vec<f32> = a.iter().map(|v| v + 0.1).collect();
    assert!((patch_distance(&a, &b, 16) - 2.56).abs() < 1e-4);
}

#[test]
fn distance_matches_double_loop() {
    let p = smooth_texture(40, 40, 3, 0.0, 1.0);
    let q = smooth_texture(40, 40, 4, 0.0, 1.0);
    for (r, c) in [(0, 0), (5, 17), (24, 24), (11, 3)] {
        for s in [5usize, 8, 16] {
            let a = block(&p, r, c, s);
            let b = block(&q, c, r, s);
            let got = patch_distance(&a, &b, s) as f64;
            let want = brute_distance(&a, &b);
            assert!(
                (got - want).abs() <= 1e-5 * want.max(1e-3),
                "{got} vs {want}"
            );
        }
    }
}

fn shifted(src: &PlaneImage, dx: isize) -> PlaneImage {
    PlaneImage::from_fn(src.height(), src.width(), |r, c| {
        src.get_clamped(r as isize, c as isize - dx)
    })
}

#[test]
fn finds_exact_shift() {
    let mono = smooth_texture(64, 80, 5, 0.1, 0.9);
    let guide = shifted(&mono, 5);
    let cfg = MatchConfig {
        direction: SearchDirection::Both,
        ..MatchConfig::default()
    };
    let geom = PairGeometry {
        max_disparity: 10,
        vertical_tolerance: 0,
    };
    let at = best_match(&mono, (20, 30), &guide, &cfg, &geom).unwrap();
    assert_eq!(at, (20, 35));
    let a = block(&mono, 20, 30, 16);
    let b = block(&guide, 20, 35, 16);
    assert_eq!(patch_distance(&a, &b, 16), 0.0);
}

#[test]
fn identical_images_match_in_place() {
    let mono = smooth_texture(48, 48, 6, 0.2, 0.8);
    let geom = PairGeometry {
        max_disparity: 0,
        vertical_tolerance: 0,
    };
    let at = best_match(&mono, (16, 8), &mono, &MatchConfig::default(), &geom).unwrap();
    assert_eq!(at, (16, 8));
}

#[test]
fn flat_images_prefer_zero_displacement() {
    let mono = PlaneImage::filled(40, 60, 0.5);
    let at = best_match(
        &mono,
        (10, 30),
        &mono,
        &MatchConfig::default(),
        &PairGeometry::default(),
    )
    .unwrap();
    assert_eq!(at, (10, 30));
}

/// Exhaustive scan in row-major order with the documented tie rule.
fn oracle_best(
    mono: &PlaneImage,
    guide: &PlaneImage,
    at: (usize, usize),
    s: usize,
    wh: i32,
    wv: i32,
) -> (usize, usize) {
    let a = block(mono, at.0, at.1, s);
    let mut best: Option<(f32, i32, (usize, usize))> = None;
    for dy in -wv..=wv {
        for dx in -wh..=0 {
            let gr = at.0 as i32 + dy;
            let gc = at.1 as i32 + dx;
            if gr < 0
                || gc < 0
                || gr as usize + s > guide.height()
                || gc as usize + s > guide.width()
            {
                continue;
            }
            let d = patch_distance(&a, &block(guide, gr as usize, gc as usize, s), s);
            let mag = dy * dy + dx * dx;
            let better = match best {
                None => true,
                Some((bd, bm, _)) => d < bd || (d == bd && mag < bm),
            };
            if better {
                best = Some((d, mag, (gr as usize, gc as usize)));
            }
        }
    }
    best.unwrap().2
}

#[test]
fn search_agrees_with_exhaustive_oracle() {
    let mono = smooth_texture(60, 90, 7, 0.0, 1.0);
    let guide = smooth_texture(60, 90, 8, 0.0, 1.0);
    let cfg = MatchConfig {
        search_height: 10,
        ..MatchConfig::default()
    };
    let geom = PairGeometry {
        max_disparity: 20,
        vertical_tolerance: 0,
    };
    for at in [(0, 0), (10, 40), (44, 74), (22, 19), (30, 60)] {
        let got = best_match(&mono, at, &guide, &cfg, &geom).unwrap();
        assert_eq!(
            got,
            oracle_best(&mono, &guide, at, 16, 20, 5),
            "patch {at:?}"
        );
    }
    // Quantized planes produce many exact ties.
    let qm = mono.map(|v| (v * 4.0).round() / 4.0);
    let qg = guide.map(|v| (v * 4.0).round() / 4.0);
    for at in [(5, 50), (40, 30)] {
        let got = best_match(&qm, at, &qg, &cfg, &geom).unwrap();
        assert_eq!(got, oracle_best(&qm, &qg, at, 16, 20, 5));
    }
}

#[test]
fn oversized_patch_is_rejected() {
    let p = PlaneImage::filled(10, 40, 0.5);
    let err = best_match(
        &p,
        (0, 0),
        &p,
        &MatchConfig::default(),
        &PairGeometry::default(),
    );
    assert!(matches!(err, Err(Error::DegenerateWindow { .. })));
}

#[test]
fn config_validation() {
    assert!(MatchConfig::default().validate().is_ok());
    assert!(MatchConfig::default().unsampled(214).validate().is_ok());
    let bad_stride = MatchConfig {
        stride: 5,
        ..MatchConfig::default()
    };
    assert!(bad_stride.validate().is_err());
    let bad_n = MatchConfig {
        samples_per_pixel: 3,
        ..MatchConfig::default()
    };
    assert!(bad_n.validate().is_err());
    let bad_t = MatchConfig {
        similar_required: 5,
        ..MatchConfig::default()
    };
    assert!(bad_t.validate().is_err());
}

#[test]
fn grid_covers_every_pixel() {
    use super::matching::grid_positions;
    assert_eq!(grid_positions(40, 16, 8), vec![0, 8, 16, 24]);
    assert_eq!(grid_positions(43, 16, 8), vec![0, 8, 16, 24, 27]);
    assert_eq!(grid_positions(16, 16, 8), vec![0]);
}

#[test]
fn weight_examples() {
    let w = candidate_weights(0.5, &[0.51, 0.53], 1e-4);
    assert!(
        (w[0] - 0.7487).abs() < 1e-4 && (w[1] - 0.2513).abs() < 1e-4,
        "{w:?}"
    );
    let u = candidate_weights(0.5, &[0.75, 0.25, 0.75], 1e-4);
    assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    assert_eq!(candidate_weights(0.1, &[0.9], 1e-4), vec![1.0]);
}

#[test]
fn weighted_color_examples() {
    let c = |a, b| Candidate { luma: 0.5, a, b };
    let (a, _) = weighted_color(&[c(0.2, 0.0), c(0.4, 0.0)], &[0.75, 0.25]);
    assert!((a - 0.25).abs() < 1e-7);
    let (a, b) = weighted_color(&[c(0.3, 0.6); 4], &[0.25; 4]);
    assert_eq!((a, b), (0.3, 0.6));
}

#[test]
fn ambiguity_examples() {
    let tau = 5.0 / 255.0;
    assert!(channel_has_gap(&[0.300, 0.310, 0.315, 0.400], tau));
    assert!(!channel_has_gap(&[0.300, 0.310, 0.315, 0.316], tau));
    assert!(!channel_has_gap(&[0.4; 4], tau));
    assert!(!channel_has_gap(&[0.1], tau));
    let c = |a, b| Candidate { luma: 0.5, a, b };
    assert!(ambiguity_check(&[c(0.5, 0.3), c(0.5, 0.4)], tau));
    assert!(!ambiguity_check(&[c(0.5, 0.3)], tau));
}

#[test]
fn border_pixels_need_all_candidates_similar() {
    let cfg = MatchConfig::default();
    let c = |l| Candidate {
        luma: l,
        a: 0.5,
        b: 0.5,
    };
    let two_good = assess_pixel(0.5, 0.01, &[c(0.5), c(0.505)], &cfg);
    assert_eq!(two_good.status, PixelStatus::Valid);
    let one_bad = assess_pixel(0.5, 0.01, &[c(0.5), c(0.6)], &cfg);
    assert_eq!(one_bad.status, PixelStatus::Occluded);
    let none = assess_pixel(0.5, 0.01, &[], &cfg);
    assert_eq!(none.status, PixelStatus::Occluded);
    assert_eq!(none.candidates, 0);
}

fn lab_from(l: &PlaneImage, a: &PlaneImage, b: &PlaneImage) -> LabImage {
    LabImage::new(l.clone(), a.clone(), b.clone()).unwrap()
}

#[test]
fn identical_guide_is_fully_valid_with_exact_chroma() {
    let mono = smooth_texture(64, 96, 9, 0.2, 0.8);
    let a = smooth_texture(64, 96, 10, 0.4, 0.6);
    let b = smooth_texture(64, 96, 11, 0.3, 0.7);
    let guide = lab_from(&mono, &a, &b);
    let jnd = compute_jnd(&mono, &JndParams::default());
    let geom = PairGeometry {
        max_disparity: 8,
        vertical_tolerance: 0,
    };
    let out = dense_scribble(&mono, &guide, &jnd, &MatchConfig::default(), &geom).unwrap();
    assert_eq!(out.scribbles.count(PixelStatus::Valid), 64 * 96);
    for r in 0..64 {
        for c in 0..96 {
            assert_eq!(out.scribbles.chroma(r, c), Some((a.get(r, c), b.get(r, c))));
        }
    }
    let set = out.candidates(&guide);
    assert_eq!(set.at(30, 40).len(), 4);
    assert_eq!(set.at(0, 0).len(), 1);
}

/// Target texture; the guidance is the right view (content shifted left by
/// 8 px) with a 24 px strip of unrelated texture pasted in.
#[test]
fn synthetic_occlusion_is_recovered() {
    let (h, w, d) = (128usize, 512usize, 8usize);
    let mono = smooth_texture(h, w, 12, 0.3, 0.8);
    let (strip_lo, strip_hi) = (224usize, 288usize);
    let novel = smooth_texture(h, w, 13, 0.3, 0.8);
    let guide_l = PlaneImage::from_fn(h, w, |r, c| {
        if (strip_lo..strip_hi).contains(&c) || c + d >= w {
            novel.get(r, c)
        } else {
            mono.get(r, c + d)
        }
    });
    let flat = PlaneImage::filled(h, w, 0.5);
    let guide = lab_from(&guide_l, &flat, &flat);
    let jnd = compute_jnd(&mono, &JndParams::default());
    let geom = PairGeometry {
        max_disparity: 16,
        vertical_tolerance: 0,
    };
    let out = dense_scribble(&mono, &guide, &jnd, &MatchConfig::default(), &geom).unwrap();
    // Target column c appears at guidance column c - d.
    let mut agree = 0;
    for r in 0..h {
        for c in 0..w {
            let truth = c < d || (strip_lo..strip_hi).contains(&(c - d));
            let got = out.scribbles.status(r, c) == PixelStatus::Occluded;
            agree += (truth == got) as usize;
        }
    }
    let rate = agree as f64 / (h * w) as f64;
    assert!(rate >= 0.95, "agreement {rate}");
}

#[test]
fn scribbling_is_deterministic() {
    let mono = smooth_texture(48, 64, 14, 0.1, 0.9);
    let a = smooth_texture(48, 64, 15, 0.3, 0.7);
    let gl = shifted(&mono, -3);
    let guide = lab_from(&gl, &a, &a);
    let jnd = compute_jnd(&mono, &JndParams::default());
    let geom = PairGeometry::default();
    let x = dense_scribble(&mono, &guide, &jnd, &MatchConfig::default(), &geom).unwrap();
    let y = dense_scribble(&mono, &guide, &jnd, &MatchConfig::default(), &geom).unwrap();
    assert_eq!(x.scribbles, y.scribbles);
}

fn candidate_strategy() -> impl Strategy<Value = Vec<(f32, f32, f32)>> {
    prop::collection::vec((0.4f32..0.6, 0.3f32..0.7, 0.3f32..0.7), 1..12)
}

proptest! {
    #[test]
    fn weights_are_normalized(target in 0.0f32..1.0, lumas in prop::collection::vec(0.0f32..1.0, 1..300)) {
        let w = candidate_weights(target, &lumas, 1e-4);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn weighted_color_is_convex(raw in candidate_strategy(), target in 0.4f32..0.6) {
        let cands: Vec<Candidate> = raw.iter().map(|&(luma, a, b)| Candidate { luma, a, b }).collect();
        let lumas: Vec<f32> = cands.iter().map(|c| c.luma).collect();
        let (a, b) = weighted_color(&cands, &candidate_weights(target, &lumas, 1e-4));
        let lo_a = cands.iter().map(|c| c.a).fold(f32::MAX, f32::min);
        let hi_a = cands.iter().map(|c| c.a).fold(f32::MIN, f32::max);
        let lo_b = cands.iter().map(|c| c.b).fold(f32::MAX, f32::min);
        let hi_b = cands.iter().map(|c| c.b).fold(f32::MIN, f32::max);
        prop_assert!(a >= lo_a - 1e-6 && a <= hi_a + 1e-6);
        prop_assert!(b >= lo_b - 1e-6 && b <= hi_b + 1e-6);
    }

    #[test]
    fn assessment_ignores_candidate_order(raw in candidate_strategy(), target in 0.4f32..0.6, seed in 0u64..1000) {
        let cands: Vec<Candidate> = raw.iter().map(|&(luma, a, b)| Candidate { luma, a, b }).collect();
        let mut shuffled = cands.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let cfg = MatchConfig::default();
        let x = assess_pixel(target, 0.05, &cands, &cfg);
        let y = assess_pixel(target, 0.05, &shuffled, &cfg);
        prop_assert_eq!(x.status, y.status);
        prop_assert_eq!(x.chroma.0.to_bits(), y.chroma.0.to_bits());
        prop_assert_eq!(x.chroma.1.to_bits(), y.chroma.1.to_bits());
    }
}
