use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freak::bits::FreakDescriptor;
use crate::freak::pattern::SamplingPattern;
use crate::freak::sampling::{sample_field, IntegralImage};
use crate::raster::{to_gray, DescriptorRecord, Keypoint, Raster};

/// Orientation vectors shorter than this are treated as zero (angle 0).
const MIN_ORIENTATION_NORM: f64 = 1e-9;

/// Keypoint orientation from the 45 orientation pairs.
///
/// Sums `(I_a − I_b)·(c_a − c_b)/‖c_a − c_b‖` over the pairs with the pattern
/// unrotated and returns the angle of the result in `[-π, π)`.
pub fn estimate_orientation(ii: &IntegralImage, kp: &Keypoint, pattern: &SamplingPattern) -> f64 {
    let fields = pattern.fields();
    let (mut ox, mut oy) = (0.0f64, 0.0f64);
    for &(a, b) in pattern.orientation_pairs() {
        let (fa, fb) = (&fields[a], &fields[b]);
        let diff = sample_field(ii, kp, fa, 0.0) as f64 - sample_field(ii, kp, fb, 0.0) as f64;
        let (dx, dy) = (fa.cx - fb.cx, fa.cy - fb.cy);
        let norm = dx.hypot(dy);
        ox += diff * dx / norm;
        oy += diff * dy / norm;
    }
    if ox.hypot(oy) <= MIN_ORIENTATION_NORM {
        return 0.0;
    }
    wrap_angle(oy.atan2(ox))
}

fn wrap_angle(a: f64) -> f64 {
    if a >= PI {
        a - 2.0 * PI
    } else {
        a
    }
}

fn check_inside(ii: &IntegralImage, kp: &Keypoint) -> Result<()> {
    if kp.x >= ii.width() || kp.y >= ii.height() {
        return Err(Error::contract(format!(
            "keypoint ({}, {}) outside {}x{} image",
            kp.x,
            kp.y,
            ii.width(),
            ii.height()
        )));
    }
    if kp.sigma.is_nan() || kp.sigma <= 0.0 {
        return Err(Error::contract("keypoint sigma must be positive"));
    }
    Ok(())
}

/// Orientation plus 512 rotated pair comparisons for one keypoint.
pub fn describe_with(ii: &IntegralImage, kp: &Keypoint, pattern: &SamplingPattern) -> Result<DescriptorRecord> {
    check_inside(ii, kp)?;
    let orientation = estimate_orientation(ii, kp, pattern);
    let samples: Vec<f32> = pattern
        .fields()
        .iter()
        .map(|f| sample_field(ii, kp, f, orientation))
        .collect();
    let mut bits = FreakDescriptor::zero();
    for (j, &(a, b)) in pattern.descriptor_pairs().iter().enumerate() {
        // Equal samples give 0.
        bits.set(j, samples[a] > samples[b]);
    }
    Ok(DescriptorRecord {
        keypoint: *kp,
        orientation,
        bits,
    })
}

/// Describe a single keypoint. Builds the integral image, so prefer
/// [`describe_all`] for many keypoints on one image.
pub fn describe(img: &Raster, kp: &Keypoint, pattern: &SamplingPattern) -> Result<DescriptorRecord> {
    let gray = to_gray(img)?;
    describe_with(&IntegralImage::new(&gray), kp, pattern)
}

/// Describe every keypoint, in parallel, preserving input order.
pub fn describe_all(img: &Raster, keypoints: &[Keypoint], pattern: &SamplingPattern) -> Result<Vec<DescriptorRecord>> {
    let gray = to_gray(img)?;
    let ii = IntegralImage::new(&gray);
    keypoints.par_iter().map(|kp| describe_with(&ii, kp, pattern)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freak::hamming_distance;
    use crate::synthetic::Texture;

    fn pattern() -> &'static SamplingPattern {
        SamplingPattern::builtin()
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    #[test]
    fn constant_image_has_zero_orientation_and_bits() {
        let img = Raster::filled(80, 60, 0.42);
        let kp = Keypoint::new(40, 30, 4.0);
        let rec = describe(&img, &kp, pattern()).unwrap();
        assert_eq!(rec.orientation, 0.0);
        assert_eq!(rec.bits.count_ones(), 0);
        assert_eq!(rec.keypoint, kp);
    }

    #[test]
    fn radial_image_has_zero_orientation() {
        let (cx, cy) = (50.0, 50.0);
        let img = Raster::from_fn(101, 101, |x, y| {
            let d = ((x as f64 + 0.5 - cx - 0.5).powi(2) + (y as f64 + 0.5 - cy - 0.5).powi(2)).sqrt();
            (1.0 - d / 80.0) as f32
        });
        let ii = IntegralImage::new(&img);
        let kp = Keypoint::new(50, 50, 4.0);
        assert_eq!(estimate_orientation(&ii, &kp, pattern()), 0.0);
    }

    #[test]
    fn orientation_tracks_a_linear_ramp() {
        for deg in [0.0f64, 30.0, 135.0, -100.0] {
            let t = deg.to_radians();
            let img = Raster::from_fn(121, 121, |x, y| {
                (0.5 + 0.004 * ((x as f64 - 60.0) * t.cos() + (y as f64 - 60.0) * t.sin())) as f32
            });
            let ii = IntegralImage::new(&img);
            let got = estimate_orientation(&ii, &Keypoint::new(60, 60, 4.0), pattern());
            assert!(angle_diff(got, t) < 1e-3, "{deg}: {}", got.to_degrees());
        }
    }

    #[test]
    fn orientation_follows_image_rotation() {
        let tex = Texture::anisotropic_blob();
        let (w, h) = (161, 161);
        let kp = Keypoint::new(80, 80, 4.0);
        let center = (80.5, 80.5);
        let base = tex.render_rotated(w, h, center, 0.0);
        let base_angle = estimate_orientation(&IntegralImage::new(&base), &kp, pattern());
        for deg in [30.0f64, 90.0, -45.0] {
            let rotated = tex.render_rotated(w, h, center, deg.to_radians());
            let got = estimate_orientation(&IntegralImage::new(&rotated), &kp, pattern());
            let shift = angle_diff(got, base_angle + deg.to_radians()).to_degrees();
            assert!(shift <= 5.0, "{deg} deg rotation: off by {shift} deg");
        }
    }

    #[test]
    fn deterministic() {
        let img = Texture::seeded(3).render(96, 96);
        let kp = Keypoint::new(48, 40, 2.0);
        let a = describe(&img, &kp, pattern()).unwrap();
        let b = describe(&img, &kp, pattern()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quarter_turn_keeps_most_bits() {
        let tex = Texture::seeded(11);
        let (w, h) = (201, 201);
        let center = (100.5, 100.5);
        let kp = Keypoint::new(100, 100, 4.0);
        let a = describe(&tex.render_rotated(w, h, center, 0.0), &kp, pattern()).unwrap();
        let b = describe(&tex.render_rotated(w, h, center, PI / 2.0), &kp, pattern()).unwrap();
        let d = hamming_distance(&a.bits, &b.bits);
        assert!(d <= 96, "hamming {d}");
    }

    #[test]
    fn rejects_keypoints_outside() {
        let img = Raster::filled(10, 10, 0.5);
        assert!(describe(&img, &Keypoint::new(10, 3, 2.0), pattern()).is_err());
    }

    #[test]
    fn describe_all_preserves_order() {
        let img = Texture::seeded(5).render(120, 90);
        let kps: Vec<_> = (0..20)
            .map(|i| Keypoint::new(10 + i * 5, 20 + i * 3, 2.0 + i as f64 * 0.5))
            .collect();
        let all = describe_all(&img, &kps, pattern()).unwrap();
        for (rec, kp) in all.iter().zip(&kps) {
            assert_eq!(rec, &describe(&img, kp, pattern()).unwrap());
        }
    }
}
