//! Circle-or-line loci and the disk families behind the singularity-free
//! region.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::constellation::DifferencePair;
use crate::singular_fades::SingularFadeState;

const DEGENERATE_TOL: f64 = 1e-12;

/// Locus `{z : a|z|² + 2 Re(conj(b)·z) + c = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub a: f64,
    pub b: Complex64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Circle { center: Complex64, radius: f64 },
    Line,
}

/// Why two distance terms have no transition curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DegenerateBoundary {
    #[error("the two distance functions are identical")]
    AlwaysEqual,
    #[error("the two distance functions are never equal")]
    Empty,
}

impl Boundary {
    /// `a|z|² + 2 Re(conj(b)·z) + c`. For a transition boundary this is
    /// `|p(z)|² - |q(z)|²`, negative on the side where `p` is smaller.
    #[inline]
    pub fn eval(&self, z: Complex64) -> f64 {
        self.a * z.norm_sqr() + 2.0 * (self.b.conj() * z).re + self.c
    }

    pub fn kind(&self) -> BoundaryKind {
        if self.a.abs() <= DEGENERATE_TOL {
            BoundaryKind::Line
        } else {
            let center = -self.b / self.a;
            let r2 = (self.b.norm_sqr() - self.a * self.c) / (self.a * self.a);
            BoundaryKind::Circle {
                center,
                radius: r2.max(0.0).sqrt(),
            }
        }
    }

    /// Euclidean distance from `z` to the locus.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        match self.kind() {
            BoundaryKind::Circle { center, radius } => ((z - center).norm() - radius).abs(),
            BoundaryKind::Line => self.eval(z).abs() / (2.0 * self.b.norm()),
        }
    }

    /// `n` points on the locus. Circles are sampled uniformly in angle; lines
    /// are sampled symmetrically about their closest point to the origin,
    /// `span` either side.
    pub fn sample(&self, n: usize, span: f64) -> Vec<Complex64> {
        match self.kind() {
            BoundaryKind::Circle { center, radius } => (0..n)
                .map(|i| center + Complex64::from_polar(radius, 2.0 * PI * i as f64 / n as f64))
                .collect(),
            BoundaryKind::Line => {
                // 2 Re(conj(b) z) = -c: foot point along b, direction j·b.
                let unit = self.b / self.b.norm();
                let foot = unit * (-self.c / (2.0 * self.b.norm()));
                let dir = unit * Complex64::i();
                (0..n)
                    .map(|i| {
                        let t = if n > 1 {
                            -span + 2.0 * span * i as f64 / (n - 1) as f64
                        } else {
                            0.0
                        };
                        foot + dir * t
                    })
                    .collect()
            }
        }
    }
}

/// Locus where `|d_k + z·d_l| = |d'_k + z·d'_l|`.
pub fn transition_boundary(
    p: &DifferencePair,
    q: &DifferencePair,
) -> Result<Boundary, DegenerateBoundary> {
    let Boundary { a, b, c } = pair_coefficients(p, q);
    let scale = 1.0 + p.dk.norm_sqr() + p.dl.norm_sqr() + q.dk.norm_sqr() + q.dl.norm_sqr();
    if a.abs() <= DEGENERATE_TOL * scale && b.norm() <= DEGENERATE_TOL * scale {
        return Err(if c.abs() <= DEGENERATE_TOL * scale {
            DegenerateBoundary::AlwaysEqual
        } else {
            DegenerateBoundary::Empty
        });
    }
    let boundary = Boundary { a, b, c };
    if let BoundaryKind::Circle { .. } = boundary.kind() {
        if b.norm_sqr() - a * c <= 0.0 {
            return Err(DegenerateBoundary::Empty);
        }
    }
    Ok(boundary)
}

/// Coefficients of `|p(z)|² - |q(z)|²` without any degeneracy check.
pub(crate) fn pair_coefficients(p: &DifferencePair, q: &DifferencePair) -> Boundary {
    let w = p.dk.conj() * p.dl - q.dk.conj() * q.dl;
    Boundary {
        a: p.dl.norm_sqr() - q.dl.norm_sqr(),
        b: w.conj(),
        c: p.dk.norm_sqr() - q.dk.norm_sqr(),
    }
}

/// A closed disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    #[inline]
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm_sqr() <= self.radius * self.radius
    }

    #[inline]
    pub fn strictly_contains(&self, z: Complex64) -> bool {
        (z - self.center).norm_sqr() < self.radius * self.radius
    }
}

/// The `2M` unit disks whose outer envelope bounds the singularity-free
/// region outside the unit circle: centers `cot(π/M)·e^{jk2π/M}` and
/// `cosec(π/M)·e^{j(2k+1)π/M}`.
pub fn outer_envelope_disks(m: usize) -> Vec<Disk> {
    let x = PI / m as f64;
    let mut out = Vec::with_capacity(2 * m);
    for k in 0..m {
        out.push(Disk {
            center: Complex64::from_polar(1.0 / x.tan(), 2.0 * k as f64 * x),
            radius: 1.0,
        });
    }
    for k in 0..m {
        out.push(Disk {
            center: Complex64::from_polar(1.0 / x.sin(), (2 * k + 1) as f64 * x),
            radius: 1.0,
        });
    }
    out
}

/// Radius of the origin-centred circle that the envelope disks cover
/// completely, `cot(π/M)`. Points outside every envelope disk lie in the
/// unbounded component exactly when they are beyond this circle.
pub fn envelope_inner_radius(m: usize) -> f64 {
    1.0 / (PI / m as f64).tan()
}

/// Disk family `C_{k1,k2}`: one disk per singular fade state `h`, radius
/// `sin(π/M)/sin(k2·π/M)` where `|h| = sin(k1·π/M)/sin(k2·π/M)`, unit radius
/// on the unit circle. Outside `|z| >= 1` a point is singularity-free exactly
/// when it avoids the interior of every disk.
pub fn shading_disks(m: usize, fades: &[SingularFadeState]) -> Vec<ShadingDisk> {
    let s1 = (PI / m as f64).sin();
    fades
        .iter()
        .map(|f| {
            let (k1, k2) = f.circle_index;
            ShadingDisk {
                disk: Disk {
                    center: f.value,
                    radius: s1 / (k2 as f64 * PI / m as f64).sin(),
                },
                k1,
                k2,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingDisk {
    pub disk: Disk,
    pub k1: usize,
    pub k2: usize,
}

/// Uniform-grid bucket index over disks for point-in-union queries.
pub struct DiskIndex {
    disks: Vec<Disk>,
    origin: Complex64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl DiskIndex {
    pub fn new(disks: Vec<Disk>, cell: f64) -> Self {
        let (mut lo, mut hi) = (
            Complex64::new(f64::INFINITY, f64::INFINITY),
            Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for d in &disks {
            lo.re = lo.re.min(d.center.re - d.radius);
            lo.im = lo.im.min(d.center.im - d.radius);
            hi.re = hi.re.max(d.center.re + d.radius);
            hi.im = hi.im.max(d.center.im + d.radius);
        }
        if disks.is_empty() {
            lo = Complex64::new(0.0, 0.0);
            hi = lo;
        }
        let nx = ((hi.re - lo.re) / cell).ceil() as usize + 1;
        let ny = ((hi.im - lo.im) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, d) in disks.iter().enumerate() {
            let x0 = ((d.center.re - d.radius - lo.re) / cell).floor().max(0.0) as usize;
            let x1 = (((d.center.re + d.radius - lo.re) / cell).floor() as usize).min(nx - 1);
            let y0 = ((d.center.im - d.radius - lo.im) / cell).floor().max(0.0) as usize;
            let y1 = (((d.center.im + d.radius - lo.im) / cell).floor() as usize).min(ny - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    buckets[y * nx + x].push(i as u32);
                }
            }
        }
        Self {
            disks,
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket(&self, z: Complex64) -> Option<&[u32]> {
        let fx = ((z.re - self.origin.re) / self.cell).floor();
        let fy = ((z.im - self.origin.im) / self.cell).floor();
        if fx < 0.0 || fy < 0.0 || fx as usize >= self.nx || fy as usize >= self.ny {
            return None;
        }
        Some(&self.buckets[fy as usize * self.nx + fx as usize])
    }

    /// True if some disk contains `z` in its interior.
    pub fn covers(&self, z: Complex64) -> bool {
        self.bucket(z).is_some_and(|b| {
            b.iter()
                .any(|&i| self.disks[i as usize].strictly_contains(z))
        })
    }

    /// Distance from `z` to the nearest disk boundary among disks near `z`.
    pub fn nearest_rim(&self, z: Complex64) -> f64 {
        self.bucket(z).map_or(f64::INFINITY, |b| {
            b.iter()
                .map(|&i| {
                    let d = self.disks[i as usize];
                    ((z - d.center).norm() - d.radius).abs()
                })
                .fold(f64::INFINITY, f64::min)
        })
    }
}

/// Violation counts from the grid checks of the disk-family covering properties.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GeometryReport {
    pub m: usize,
    pub points: u64,
    /// Points with `r(i+1, i) <= |z| <= r(M/2, i)` not covered by the off-unit
    /// family, where `r(k1, k2) = sin(k1·π/M)/sin(k2·π/M)`.
    pub ring: u64,
    /// Annulus `1 <= |z| <= 1/sin(π/M)` not covered.
    pub annulus: u64,
    /// `|z| >= 1` where "outside every disk" and the envelope test disagree.
    pub envelope: u64,
    /// Off-unit disks with `k2 >= 2` reaching past `1/sin(π/M)`.
    pub containment: u64,
    /// Points of `C_{k1,1}`, `k1 <= M/2 - 2`, beyond `1/sin(π/M)` not inside
    /// the outermost two families.
    pub outer_two: u64,
}

impl GeometryReport {
    pub fn violations(&self) -> u64 {
        self.ring + self.annulus + self.envelope + self.containment + self.outer_two
    }
}

// Slack for closed-disk membership and for skipping points on a rim.
const RIM_TOL: f64 = 1e-9;

fn covers_closed(idx: &DiskIndex, z: Complex64) -> bool {
    idx.covers(z) || idx.nearest_rim(z) <= RIM_TOL
}

fn sine_ratio(m: usize, k1: usize, k2: usize) -> f64 {
    let x = PI / m as f64;
    (k1 as f64 * x).sin() / (k2 as f64 * x).sin()
}

/// Outside every envelope disk and beyond `cot(π/M)`.
pub(crate) fn outside_envelope(m: usize, envelope: &[Disk], z: Complex64) -> bool {
    z.norm() >= envelope_inner_radius(m) && envelope.iter().all(|d| !d.strictly_contains(z))
}

/// Runs the disk-family checks for `m` on a square grid of spacing `step`
/// covering every disk.
pub fn geometry_suite(m: usize, step: f64) -> crate::error::Result<GeometryReport> {
    use rayon::prelude::*;

    let fades = crate::singular_fades::enumerate_singular_fades(m)?;
    let family = shading_disks(m, &fades);
    let half = m / 2;
    let outer = 1.0 / (PI / m as f64).sin();
    let cell = 0.25;

    let full = DiskIndex::new(family.iter().map(|s| s.disk).collect(), cell);
    let off_unit = DiskIndex::new(
        family
            .iter()
            .filter(|s| s.k1 != s.k2)
            .map(|s| s.disk)
            .collect(),
        cell,
    );
    let pick = |k1: usize| {
        DiskIndex::new(
            family
                .iter()
                .filter(|s| s.k1 == k1 && s.k2 == 1)
                .map(|s| s.disk)
                .collect(),
            cell,
        )
    };
    let outer_even = pick(half);
    let outer_odd = pick(half - 1);
    let inner_k2_one: Vec<ShadingDisk> = family
        .iter()
        .copied()
        .filter(|s| s.k2 == 1 && s.k1 != 1 && s.k1 + 2 <= half)
        .collect();
    let envelope = outer_envelope_disks(m);
    let rings: Vec<(f64, f64)> = (1..half)
        .map(|i| (sine_ratio(m, i + 1, i), sine_ratio(m, half, i)))
        .collect();
    // The off-unit family alone covers the annulus only for M > 4.
    let annulus_idx = if m > 4 { &off_unit } else { &full };

    let mut report = GeometryReport {
        m,
        ..Default::default()
    };
    if m >= 8 {
        report.containment = family
            .iter()
            .filter(|s| s.k1 != s.k2 && s.k2 >= 2)
            .filter(|s| s.disk.center.norm() + s.disk.radius > outer + RIM_TOL)
            .count() as u64;
    }

    let extent = outer + 1.1;
    let n = (2.0 * extent / step).ceil() as usize + 1;
    let rows: Vec<[u64; 5]> = (0..n)
        .into_par_iter()
        .map(|iy| {
            let mut acc = [0u64; 5];
            let im = -extent + iy as f64 * step;
            for ix in 0..n {
                let z = Complex64::new(-extent + ix as f64 * step, im);
                let r = z.norm();
                acc[0] += 1;
                for &(lo, hi) in &rings {
                    if r >= lo && r <= hi && !covers_closed(&off_unit, z) {
                        acc[1] += 1;
                    }
                }
                if r >= 1.0 && r <= outer && !covers_closed(annulus_idx, z) {
                    acc[2] += 1;
                }
                if r >= 1.0 {
                    let near_rim = full.nearest_rim(z) <= RIM_TOL
                        || (r - envelope_inner_radius(m)).abs() <= RIM_TOL
                        || envelope
                            .iter()
                            .any(|d| ((z - d.center).norm() - d.radius).abs() <= RIM_TOL);
                    if !near_rim && full.covers(z) == outside_envelope(m, &envelope, z) {
                        acc[3] += 1;
                    }
                }
                if r > outer {
                    for s in &inner_k2_one {
                        if s.disk.strictly_contains(z) {
                            let target = if s.k1 % 2 == half % 2 {
                                &outer_even
                            } else {
                                &outer_odd
                            };
                            if !covers_closed(target, z) {
                                acc[4] += 1;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    for acc in rows {
        report.points += acc[0];
        report.ring += acc[1];
        report.annulus += acc[2];
        report.envelope += acc[3];
        report.outer_two += acc[4];
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_circle_boundary() {
        let s2 = 2f64.sqrt();
        let p = DifferencePair::new(Complex64::from_polar(2.0, PI / 4.0), c(-s2, 0.0));
        let q = DifferencePair::new(c(s2, 0.0), Complex64::from_polar(2.0, 3.0 * PI / 4.0));
        let b = transition_boundary(&p, &q).unwrap();
        match b.kind() {
            BoundaryKind::Circle { center, radius } => {
                assert!(center.norm() < 1e-12);
                assert!((radius - 1.0).abs() < 1e-12);
            }
            BoundaryKind::Line => panic!("expected a circle"),
        }
    }

    #[test]
    fn equal_weights_give_a_line() {
        let s2 = 2f64.sqrt();
        let p = DifferencePair::new(c(s2, 0.0), c(0.0, -s2));
        let q = DifferencePair::new(c(0.0, s2), c(-s2, 0.0));
        let b = transition_boundary(&p, &q).unwrap();
        assert_eq!(b.kind(), BoundaryKind::Line);
        for z in b.sample(100, 5.0) {
            assert!((p.distance(z) - q.distance(z)).abs() < 1e-9, "{z}");
        }
    }

    #[test]
    fn sampled_circle_points_are_equidistant() {
        let p = DifferencePair::new(c(1.0, 0.3), c(0.2, -1.1));
        let q = DifferencePair::new(c(-0.4, 0.9), c(1.7, 0.5));
        let b = transition_boundary(&p, &q).unwrap();
        for z in b.sample(64, 1.0) {
            assert!((p.distance(z) - q.distance(z)).abs() < 1e-9);
            assert!(b.distance_to(z) < 1e-9);
        }
    }

    #[test]
    fn degenerate_boundaries() {
        let p = DifferencePair::new(c(1.0, 0.0), c(0.0, 1.0));
        let rotated = DifferencePair::new(c(0.0, 1.0), c(-1.0, 0.0));
        assert_eq!(
            transition_boundary(&p, &rotated),
            Err(DegenerateBoundary::AlwaysEqual)
        );
        let a = DifferencePair::new(c(1.0, 0.0), c(0.0, 0.0));
        let b = DifferencePair::new(c(2.0, 0.0), c(0.0, 0.0));
        assert_eq!(transition_boundary(&a, &b), Err(DegenerateBoundary::Empty));
    }

    #[test]
    fn disk_index_matches_linear_scan() {
        let disks = outer_envelope_disks(8);
        let idx = DiskIndex::new(disks.clone(), 0.5);
        for i in 0..60 {
            for j in 0..60 {
                let z = c(-3.7 + i as f64 * 0.125, -3.7 + j as f64 * 0.125);
                let linear = disks.iter().any(|d| d.strictly_contains(z));
                assert_eq!(idx.covers(z), linear, "{z}");
            }
        }
    }

    #[test]
    fn qpsk_geometry_suite_is_clean() {
        let r = geometry_suite(4, 0.02).unwrap();
        assert!(r.points > 0);
        assert_eq!(r.violations(), 0, "{r:?}");
    }
}
