use super::*;
use crate::synthetic::{gaussian_blob, poster_wall, white_square};

fn tiles() -> TileConfig {
    TileConfig::default()
}

fn argmax(r: &Raster) -> (usize, usize) {
    let mut best = (0, 0);
    for y in 0..r.height() {
        for x in 0..r.width() {
            if r.get(x, y) > r.get(best.0, best.1) {
                best = (x, y);
            }
        }
    }
    best
}

fn level(sigma: f64, det: &[f32], mask: &[bool]) -> ScaleLevel {
    let w = det.len();
    ScaleLevel {
        sigma,
        response: Raster::filled(w, 1, 0.0),
        mask: mask.to_vec(),
        count: mask.iter().filter(|&&m| m).count(),
        determinant: Raster::new(w, 1, 1, det.to_vec()).unwrap(),
    }
}

#[test]
fn constant_image_has_zero_response() {
    let r = harris_response(&Raster::filled(32, 32, 0.6), 2.0, 0.04, tiles()).unwrap();
    assert!(r.data().iter().all(|&v| v == 0.0));
}

#[test]
fn step_edge_is_not_a_corner() {
    let img = Raster::from_fn(32, 32, |_, y| if y < 16 { 0.0 } else { 1.0 });
    let r = harris_response(&img, 2.0, 0.04, tiles()).unwrap();
    assert!(r.data().iter().all(|&v| v <= 0.0));
}

#[test]
fn white_square_corners_are_response_maxima() {
    let img = white_square(64, 64, 20, 20, 24);
    let r = harris_response(&img, 2.0, 0.04, tiles()).unwrap();
    let (mask, count) = count_corners(&r, 1e-6).unwrap();
    assert!(count >= 4);
    // Corners of the square sit between pixels 19/20 and 43/44.
    for &(cx, cy) in &[(19.5, 19.5), (43.5, 19.5), (19.5, 43.5), (43.5, 43.5)] {
        let hit = mask.iter().enumerate().any(|(i, &m)| {
            let (x, y) = ((i % 64) as f64, (i / 64) as f64);
            m && (x - cx).abs() <= 2.0 && (y - cy).abs() <= 2.0
        });
        assert!(hit, "no maximum near ({cx}, {cy})");
    }
}

#[test]
fn harris_rejects_bad_sigma() {
    let img = Raster::filled(8, 8, 0.0);
    assert!(harris_response(&img, 0.0, 0.04, tiles()).is_err());
    assert!(harris_response(&img, -1.0, 0.04, tiles()).is_err());
    assert!(hessian_determinant(&img, f64::NAN, tiles()).is_err());
}

#[test]
fn count_corners_cases() {
    let zero = Raster::filled(9, 9, 0.0);
    assert_eq!(count_corners(&zero, 1e-6).unwrap().1, 0);

    let mut spike = vec![0.0f32; 81];
    spike[4 * 9 + 6] = 1.0;
    let spike = Raster::new(9, 9, 1, spike).unwrap();
    let (mask, count) = count_corners(&spike, 0.5).unwrap();
    assert_eq!(count, 1);
    assert!(mask[4 * 9 + 6]);
    assert_eq!(count_corners(&spike, 1.0).unwrap().1, 0);

    let plateau = Raster::from_fn(9, 9, |x, y| {
        if (3..6).contains(&x) && (3..6).contains(&y) {
            1.0
        } else {
            0.0
        }
    });
    assert_eq!(count_corners(&plateau, 0.5).unwrap().1, 0);

    // Out-of-bounds neighbours are ignored, so a border spike counts.
    let mut edge = vec![0.0f32; 81];
    edge[0] = 1.0;
    assert_eq!(count_corners(&Raster::new(9, 9, 1, edge).unwrap(), 0.5).unwrap().1, 1);
}

#[test]
fn characteristic_sigma_rules() {
    let with = |pairs: &[(f64, usize)]| {
        BASE_SIGMAS
            .iter()
            .map(|&s| (s, pairs.iter().find(|p| p.0 == s).map_or(0, |p| p.1)))
            .collect::<Vec<_>>()
    };
    assert_eq!(
        characteristic_sigma(&with(&[(0.7, 1), (2.0, 5), (4.0, 3)])).unwrap(),
        2.0
    );
    assert_eq!(characteristic_sigma(&with(&[])).unwrap(), 0.7);
    assert_eq!(
        characteristic_sigma(&with(&[(20.0, 7), (24.0, 7), (8.0, 6)])).unwrap(),
        20.0
    );
    // Order of the input does not matter.
    assert_eq!(characteristic_sigma(&[(24.0, 7), (20.0, 7)]).unwrap(), 20.0);
    assert!(characteristic_sigma(&[]).is_err());
}

#[test]
fn refinement_sigma_formula() {
    let (lo, hi) = refinement_sigmas(4.0);
    assert!((lo - 2.8284271247461903).abs() < 1e-12);
    assert!((hi - 5.656854249492381).abs() < 1e-12);
    let (lo, hi) = refinement_sigmas(0.7);
    assert!((lo - 0.4949747468305833).abs() < 1e-12);
    assert!((hi - 0.9899494936611666).abs() < 1e-12);
    for s in [0.3, 1.0, 7.5, 24.0] {
        let (lo, hi) = refinement_sigmas(s);
        assert!((lo * hi - s * s).abs() < 1e-12 * s * s);
    }
}

#[test]
fn hessian_vanishes_on_constant_and_ramp() {
    let det = hessian_determinant(&Raster::filled(24, 24, 0.3), 2.0, tiles()).unwrap();
    assert!(det.data().iter().all(|&v| v == 0.0));
    let ramp = Raster::from_fn(40, 40, |x, _| x as f32 / 64.0);
    let det = hessian_determinant(&ramp, 2.0, tiles()).unwrap();
    // Interior only: clamp-to-edge bends the ramp at the borders.
    for y in 0..40 {
        for x in 10..30 {
            assert!(det.get(x, y).abs() < 1e-9, "({x},{y}) {}", det.get(x, y));
        }
    }
}

#[test]
fn hessian_peaks_at_blob_centre() {
    let blob = gaussian_blob(65, 65, 32.0, 32.0, 4.0);
    for sigma in [2.0, 4.0, 6.0] {
        let det = hessian_determinant(&blob, sigma, tiles()).unwrap();
        assert_eq!(argmax(&det), (32, 32), "sigma {sigma}");
    }
}

#[test]
fn cull_profiles() {
    let space = ScaleSpace::new(vec![
        level(2.0, &[1.0], &[true]),
        level(4.0, &[5.0], &[false]),
        level(8.0, &[2.0], &[false]),
    ])
    .unwrap();
    assert_eq!(cull_keypoints(&space, 3.0).unwrap(), vec![Keypoint::new(0, 0, 4.0)]);
    assert!(cull_keypoints(&space, 10.0).unwrap().is_empty());

    let flat = ScaleSpace::new(vec![
        level(2.0, &[4.0], &[true]),
        level(4.0, &[4.0], &[true]),
        level(8.0, &[4.0], &[true]),
    ])
    .unwrap();
    assert!(cull_keypoints(&flat, 1.0).unwrap().is_empty());
}

#[test]
fn cull_one_sided_ends_and_ordering() {
    // Pixel 0 peaks at the first scale, pixel 1 at the last, pixel 2 is not a corner.
    let space = ScaleSpace::new(vec![
        level(8.0, &[1.0, 9.0, 50.0], &[false, false, false]),
        level(2.0, &[9.0, 1.0, 10.0], &[true, false, false]),
        level(4.0, &[2.0, 2.0, 10.0], &[false, true, false]),
    ])
    .unwrap();
    assert_eq!(space.sigmas(), vec![2.0, 4.0, 8.0]);
    assert_eq!(
        cull_keypoints(&space, 0.5).unwrap(),
        vec![Keypoint::new(0, 0, 2.0), Keypoint::new(1, 0, 8.0)]
    );
}

#[test]
fn cull_needs_three_scales() {
    let space = ScaleSpace::new(vec![level(2.0, &[1.0], &[true]), level(4.0, &[2.0], &[true])]).unwrap();
    assert!(cull_keypoints(&space, 0.0).is_err());
}

#[test]
fn scale_space_checks_consistency() {
    let mut bad = level(2.0, &[1.0, 2.0], &[true, false]);
    bad.count = 2;
    assert!(ScaleSpace::new(vec![bad]).is_err());
    assert!(ScaleSpace::new(vec![
        level(2.0, &[1.0], &[true]),
        level(4.0, &[1.0, 2.0], &[true, true])
    ])
    .is_err());
}

#[test]
fn uniform_image_gives_no_keypoints() {
    let det = detect(&Raster::filled(64, 48, 0.5), &DetectorConfig::default()).unwrap();
    assert!(det.keypoints.is_empty());
    assert_eq!(det.characteristic_sigma, 0.7);
}

#[test]
fn timings_cover_twelve_stages_per_sigma_plus_gather() {
    let img = poster_wall(64, 64, 2);
    let det = detect(&img, &DetectorConfig::default()).unwrap();
    let sigmas = det.evaluated_sigmas();
    assert_eq!(sigmas.len(), 11);
    let (lo, hi) = refinement_sigmas(det.characteristic_sigma);
    for s in BASE_SIGMAS.iter().copied().chain([lo, hi]) {
        assert!(sigmas.contains(&s));
        for stage in Stage::ALL {
            let t = det.timings.get(stage.name(), Some(s)).unwrap();
            assert_eq!(t.invocations, 1);
        }
    }
    assert!(det.timings.get(GATHER_STAGE, None).is_some());
    assert_eq!(det.timings.entries().len(), 12 * 11 + 1);
}

#[test]
fn keypoint_sigmas_come_from_the_schedule() {
    let img = poster_wall(96, 80, 6);
    let det = detect(&img, &DetectorConfig::default()).unwrap();
    assert!(!det.keypoints.is_empty());
    let sigmas = det.evaluated_sigmas();
    for kp in &det.keypoints {
        assert!(sigmas.contains(&kp.sigma));
        assert!(kp.x < 96 && kp.y < 80);
    }
}

#[test]
fn detection_does_not_depend_on_tiling() {
    let img = poster_wall(72, 56, 12);
    let base = detect(&img, &DetectorConfig::default()).unwrap();
    for t in ["1x1", "32x8", "4x64"] {
        let cfg = DetectorConfig::default().with_tiles(t.parse().unwrap());
        assert_eq!(detect(&img, &cfg).unwrap().keypoints, base.keypoints, "{t}");
    }
}

#[test]
fn raising_hessian_threshold_shrinks_the_set() {
    let img = poster_wall(96, 96, 21);
    let mut previous: Option<Vec<Keypoint>> = None;
    for t in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
        let cfg = DetectorConfig {
            hessian_threshold: t,
            ..DetectorConfig::default()
        };
        let kps = detect(&img, &cfg).unwrap().keypoints;
        if let Some(prev) = &previous {
            assert!(kps.iter().all(|k| prev.contains(k)));
        }
        previous = Some(kps);
    }
}

#[test]
fn translation_moves_keypoints_exactly() {
    let (n, shift) = (512usize, 8usize);
    let bg = 0.5f32;
    let inner = 200usize;
    let off = (n - inner) / 2;
    let patch = poster_wall(inner, inner, 30);
    let place = |dx: usize| {
        Raster::from_fn(n, n, |x, y| {
            let (px, py) = (x.wrapping_sub(off + dx), y.wrapping_sub(off + dx));
            if px < inner && py < inner {
                patch.get(px, py)
            } else {
                bg
            }
        })
    };
    let cfg = DetectorConfig::default();
    let a = detect(&place(0), &cfg).unwrap().keypoints;
    let b = detect(&place(shift), &cfg).unwrap().keypoints;
    assert!(!a.is_empty());
    let interior = |k: &Keypoint| (16..n - 16).contains(&k.x) && (16..n - 16).contains(&k.y);
    let moved: Vec<Keypoint> = a
        .iter()
        .filter(|k| interior(k))
        .map(|k| Keypoint::new(k.x + shift, k.y + shift, k.sigma))
        .filter(interior)
        .collect();
    let b_interior: Vec<Keypoint> = b
        .iter()
        .filter(|k| interior(k) && k.x >= 16 + shift && k.y >= 16 + shift)
        .copied()
        .collect();
    let moved: Vec<Keypoint> = moved
        .into_iter()
        .filter(|k| k.x >= 16 + shift && k.y >= 16 + shift)
        .collect();
    assert_eq!(moved, b_interior);
}

#[test]
fn flat_gradients_produce_no_corners() {
    let threshold = DetectorConfig::default().corner_threshold;
    // Pixel steps below the threshold bound every central difference.
    let step = threshold as f32 * 0.5;
    let img = Raster::from_fn(48, 48, |x, y| 0.5 + step * (((x * 7 + y * 13) % 5) as f32 - 2.0) * 0.25);
    for &sigma in BASE_SIGMAS.iter() {
        let r = harris_response(&img, sigma, DEFAULT_HARRIS_K, tiles()).unwrap();
        assert_eq!(count_corners(&r, threshold).unwrap().1, 0, "sigma {sigma}");
    }
}
