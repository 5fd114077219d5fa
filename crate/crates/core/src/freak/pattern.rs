//! The retinal sampling pattern and its versioned text form.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::freak::bits::{CASCADE_BITS, DESCRIPTOR_BITS};

pub const RING_COUNT: usize = 7;
pub const FIELDS_PER_RING: usize = 6;
pub const FIELD_COUNT: usize = 1 + RING_COUNT * FIELDS_PER_RING;
pub const ORIENTATION_PAIR_COUNT: usize = 45;
pub const PATTERN_VERSION: u32 = 1;

/// Ring radii run geometrically from the outer to the inner ring (pattern units).
const OUTER_RING_RADIUS: f64 = 11.0;
const INNER_RING_RADIUS: f64 = 1.0;
/// Field smoothing radius as a fraction of its ring radius.
const FIELD_RADIUS_RATIO: f64 = 0.6;
const CENTER_FIELD_RADIUS: f64 = 0.5;
/// Descriptor pairs need centers at least this many (larger) field radii apart.
const MIN_PAIR_SEPARATION: f64 = 1.0;

const BUILTIN_PATTERN: &str = include_str!("../../data/freak_pattern_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptiveField {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl ReceptiveField {
    pub fn distance_from_center(&self) -> f64 {
        self.cx.hypot(self.cy)
    }
}

/// 43 receptive fields (seven rings of six plus the center), 45 orientation
/// pairs and 512 descriptor pairs in four coarse-to-fine cascades.
///
/// Field indices run from the outermost ring inwards; the center is last.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    fields: Vec<ReceptiveField>,
    orientation_pairs: Vec<(usize, usize)>,
    descriptor_pairs: Vec<(usize, usize)>,
}

impl SamplingPattern {
    /// The hard-coded pattern shipped with the crate.
    pub fn builtin() -> &'static SamplingPattern {
        static PATTERN: OnceLock<SamplingPattern> = OnceLock::new();
        PATTERN.get_or_init(|| SamplingPattern::parse(BUILTIN_PATTERN).expect("bundled pattern file is valid"))
    }

    /// Regenerate the pattern from its geometric definition.
    ///
    /// The bundled data file is this output; descriptors are computed from the
    /// data file so bits do not drift with platform math libraries.
    pub fn generate() -> SamplingPattern {
        let q = (OUTER_RING_RADIUS / INNER_RING_RADIUS).powf(1.0 / (RING_COUNT - 1) as f64);
        let mut fields = Vec::with_capacity(FIELD_COUNT);
        for ring in 0..RING_COUNT {
            let rho = OUTER_RING_RADIUS / q.powi(ring as i32);
            let offset = if ring % 2 == 1 { PI / 6.0 } else { 0.0 };
            for i in 0..FIELDS_PER_RING {
                let a = offset + i as f64 * PI / 3.0;
                fields.push(ReceptiveField {
                    cx: rho * a.cos(),
                    cy: rho * a.sin(),
                    radius: FIELD_RADIUS_RATIO * rho,
                });
            }
        }
        fields.push(ReceptiveField {
            cx: 0.0,
            cy: 0.0,
            radius: CENTER_FIELD_RADIUS,
        });

        // Diametric pairs on every ring, then skip-one pairs on the four outer rings.
        let mut orientation_pairs = Vec::with_capacity(ORIENTATION_PAIR_COUNT);
        for ring in 0..RING_COUNT {
            let base = ring * FIELDS_PER_RING;
            for i in 0..3 {
                orientation_pairs.push((base + i, base + i + 3));
            }
        }
        for ring in 0..4 {
            let base = ring * FIELDS_PER_RING;
            for i in 0..FIELDS_PER_RING {
                orientation_pairs.push((base + i, base + (i + 2) % FIELDS_PER_RING));
            }
        }

        let mut candidates: Vec<(usize, usize)> = (0..FIELD_COUNT)
            .flat_map(|a| (a + 1..FIELD_COUNT).map(move |b| (a, b)))
            .collect();
        let mean_radius = |&(a, b): &(usize, usize)| (fields[a].radius + fields[b].radius) / 2.0;
        candidates.sort_by(|p, q| mean_radius(q).total_cmp(&mean_radius(p)).then(p.cmp(q)));
        let descriptor_pairs = candidates
            .into_iter()
            .filter(|&(a, b)| {
                let (fa, fb) = (&fields[a], &fields[b]);
                let d = (fa.cx - fb.cx).hypot(fa.cy - fb.cy);
                d >= MIN_PAIR_SEPARATION * fa.radius.max(fb.radius)
            })
            .take(DESCRIPTOR_BITS)
            .collect();

        SamplingPattern {
            fields,
            orientation_pairs,
            descriptor_pairs,
        }
    }

    pub fn fields(&self) -> &[ReceptiveField] {
        &self.fields
    }

    pub fn orientation_pairs(&self) -> &[(usize, usize)] {
        &self.orientation_pairs
    }

    pub fn descriptor_pairs(&self) -> &[(usize, usize)] {
        &self.descriptor_pairs
    }

    /// Pairs of cascade `k` (0 = coarsest).
    pub fn cascade_pairs(&self, k: usize) -> &[(usize, usize)] {
        &self.descriptor_pairs[k * CASCADE_BITS..(k + 1) * CASCADE_BITS]
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.fields.len() != FIELD_COUNT {
            return bad(format!(
                "pattern needs {FIELD_COUNT} fields, found {}",
                self.fields.len()
            ));
        }
        if self.orientation_pairs.len() != ORIENTATION_PAIR_COUNT {
            return bad(format!(
                "pattern needs {ORIENTATION_PAIR_COUNT} orientation pairs, found {}",
                self.orientation_pairs.len()
            ));
        }
        if self.descriptor_pairs.len() != DESCRIPTOR_BITS {
            return bad(format!(
                "pattern needs {DESCRIPTOR_BITS} descriptor pairs, found {}",
                self.descriptor_pairs.len()
            ));
        }
        for &(a, b) in self.orientation_pairs.iter().chain(&self.descriptor_pairs) {
            if a >= FIELD_COUNT || b >= FIELD_COUNT || a == b {
                return bad(format!("invalid field pair ({a}, {b})"));
            }
        }
        if self.fields.iter().any(|f| f.radius.is_nan() || f.radius <= 0.0) {
            return bad("field radii must be positive".into());
        }
        Ok(())
    }

    /// Versioned text form: a header, one `cx cy r` line per field, then the pair lists.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "freak-pattern v{PATTERN_VERSION}");
        let _ = writeln!(s, "fields {}", self.fields.len());
        for f in &self.fields {
            let _ = writeln!(s, "{:?} {:?} {:?}", f.cx, f.cy, f.radius);
        }
        for (name, pairs) in [
            ("orientation_pairs", &self.orientation_pairs),
            ("descriptor_pairs", &self.descriptor_pairs),
        ] {
            let _ = writeln!(s, "{name} {}", pairs.len());
            for (a, b) in pairs {
                let _ = writeln!(s, "{a} {b}");
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of pattern file, expected {what}")))
        };

        let (ln, header) = next("header")?;
        if header != format!("freak-pattern v{PATTERN_VERSION}") {
            return Err(Error::parse(ln, format!("unsupported pattern header {header:?}")));
        }
        let section = |line: (usize, &str), name: &str| -> Result<usize> {
            let (ln, l) = line;
            l.strip_prefix(name)
                .and_then(|rest| rest.trim().parse().ok())
                .ok_or_else(|| Error::parse(ln, format!("expected `{name} <count>`")))
        };
        let numbers = |line: (usize, &str), n: usize| -> Result<Vec<f64>> {
            let (ln, l) = line;
            let v: Vec<f64> = l
                .split_ascii_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(ln, e.to_string()))?;
            if v.len() != n {
                return Err(Error::parse(ln, format!("expected {n} values")));
            }
            Ok(v)
        };

        let n_fields = section(next("fields")?, "fields")?;
        let mut fields = Vec::with_capacity(n_fields);
        for _ in 0..n_fields {
            let v = numbers(next("field")?, 3)?;
            fields.push(ReceptiveField {
                cx: v[0],
                cy: v[1],
                radius: v[2],
            });
        }
        let mut read_pairs = |name: &str| -> Result<Vec<(usize, usize)>> {
            let n = section(next(name)?, name)?;
            (0..n)
                .map(|_| {
                    let (ln, l) = next("pair")?;
                    let mut it = l.split_ascii_whitespace().map(str::parse::<usize>);
                    match (it.next(), it.next(), it.next()) {
                        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                        _ => Err(Error::parse(ln, "expected two field indices")),
                    }
                })
                .collect()
        };
        let orientation_pairs = read_pairs("orientation_pairs")?;
        let descriptor_pairs = read_pairs("descriptor_pairs")?;
        let pattern = SamplingPattern {
            fields,
            orientation_pairs,
            descriptor_pairs,
        };
        pattern.validate()?;
        Ok(pattern)
    }
}

/// The built-in sampling pattern.
pub fn build_pattern() -> SamplingPattern {
    SamplingPattern::builtin().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freak::bits::CASCADE_COUNT;

    #[test]
    fn builtin_is_deterministic_and_complete() {
        let a = build_pattern();
        let b = build_pattern();
        assert_eq!(a, b);
        assert_eq!(a.fields().len(), 43);
        assert_eq!(a.orientation_pairs().len(), 45);
        assert_eq!(a.descriptor_pairs().len(), 512);
        assert_eq!(a.cascade_pairs(3).len(), 128);
    }

    #[test]
    fn data_file_matches_generator() {
        let generated = SamplingPattern::generate();
        let builtin = SamplingPattern::builtin();
        assert_eq!(generated.orientation_pairs(), builtin.orientation_pairs());
        assert_eq!(generated.descriptor_pairs(), builtin.descriptor_pairs());
        for (g, b) in generated.fields().iter().zip(builtin.fields()) {
            assert!((g.cx - b.cx).abs() < 1e-12);
            assert!((g.cy - b.cy).abs() < 1e-12);
            assert!((g.radius - b.radius).abs() < 1e-12);
        }
    }

    #[test]
    fn text_form_round_trips() {
        let p = SamplingPattern::builtin();
        assert_eq!(&SamplingPattern::parse(&p.to_text()).unwrap(), p);
        assert!(SamplingPattern::parse("freak-pattern v2\n").is_err());
        assert!(SamplingPattern::parse("freak-pattern v1\nfields 1\n0 0 1\n").is_err());
    }

    #[test]
    fn neighbouring_fields_overlap() {
        let f = SamplingPattern::builtin().fields();
        let overlaps = |a: &ReceptiveField, b: &ReceptiveField| (a.cx - b.cx).hypot(a.cy - b.cy) < a.radius + b.radius;
        for ring in 0..RING_COUNT {
            let base = ring * FIELDS_PER_RING;
            for i in 0..FIELDS_PER_RING {
                let next = base + (i + 1) % FIELDS_PER_RING;
                assert!(overlaps(&f[base + i], &f[next]), "ring {ring} field {i}");
            }
            if ring + 1 < RING_COUNT {
                assert!((0..FIELDS_PER_RING).any(|j| overlaps(&f[base], &f[base + FIELDS_PER_RING + j])));
            }
        }
        assert!(overlaps(&f[FIELD_COUNT - 1], &f[FIELD_COUNT - 2]));
    }

    #[test]
    fn ring_radii_are_geometric_and_fields_scale_with_them() {
        let f = SamplingPattern::builtin().fields();
        let radii: Vec<f64> = (0..RING_COUNT)
            .map(|r| f[r * FIELDS_PER_RING].distance_from_center())
            .collect();
        let ratio = radii[0] / radii[1];
        for w in radii.windows(2) {
            assert!((w[0] / w[1] - ratio).abs() < 1e-9);
        }
        for (i, field) in f[..FIELD_COUNT - 1].iter().enumerate() {
            let rho = radii[i / FIELDS_PER_RING];
            assert!((field.radius / rho - FIELD_RADIUS_RATIO).abs() < 1e-9);
        }
    }

    #[test]
    fn cascades_run_coarse_to_fine() {
        let p = SamplingPattern::builtin();
        let f = p.fields();
        let cascade_mean = |k: usize| {
            p.cascade_pairs(k)
                .iter()
                .map(|&(a, b)| (f[a].radius + f[b].radius) / 2.0)
                .sum::<f64>()
                / CASCADE_BITS as f64
        };
        for k in 1..CASCADE_COUNT {
            assert!(cascade_mean(k) <= cascade_mean(k - 1));
        }
        let mut unique = p.descriptor_pairs().to_vec();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 512);
    }

    #[test]
    fn orientation_pairs_are_closed_under_sixty_degree_rotation() {
        // Rotating by one field index within a ring maps the pair set onto itself,
        // which is what makes the orientation vector vanish on radial images.
        let p = SamplingPattern::builtin();
        let rotate = |i: usize| {
            if i == FIELD_COUNT - 1 {
                i
            } else {
                let ring = i / FIELDS_PER_RING;
                ring * FIELDS_PER_RING + (i % FIELDS_PER_RING + 1) % FIELDS_PER_RING
            }
        };
        let norm = |(a, b): (usize, usize)| (a.min(b), a.max(b));
        let set: Vec<_> = p.orientation_pairs().iter().map(|&x| norm(x)).collect();
        for &(a, b) in p.orientation_pairs() {
            assert!(set.contains(&norm((rotate(a), rotate(b)))));
        }
    }
}
