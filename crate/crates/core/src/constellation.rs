//! M-PSK signal sets, the bit-label mapping, the difference constellation
//! and the effective constellation seen by the relay in the multiple-access
//! phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance for treating two complex points as the same point.
pub const POINT_TOL: f64 = 1e-9;

/// Largest supported constellation size.
pub const MAX_ORDER: usize = 64;

/// Rule assigning bit labels to constellation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitMapping {
    /// Label `k` is sent as `e^{j(2k+1)π/M}`.
    #[default]
    Natural,
    /// Adjacent points differ in one bit.
    Gray,
}

/// Symmetric unit-energy M-PSK signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: usize,
    lambda: u32,
    points: Vec<Complex64>,
    mapping: BitMapping,
}

/// Checks `m` is a supported constellation size.
pub fn validate_order(m: usize) -> Result<()> {
    if (2..=MAX_ORDER).contains(&m) && m.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidOrder(m))
    }
}

/// `M`-point PSK with points `e^{j(2k+1)π/M}` and natural labelling.
pub fn psk_points(m: usize) -> Result<Constellation> {
    Constellation::with_mapping(m, BitMapping::Natural)
}

/// Points `e^{j(2k+1)π/t}` for any `t >= 1`; used for the broadcast signal set,
/// whose size is the cluster count and need not be a power of two.
pub fn psk_ring(t: usize) -> Vec<Complex64> {
    (0..t)
        .map(|k| Complex64::from_polar(1.0, (2 * k + 1) as f64 * PI / t as f64))
        .collect()
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl Constellation {
    pub fn with_mapping(m: usize, mapping: BitMapping) -> Result<Self> {
        validate_order(m)?;
        Ok(Self {
            m,
            lambda: m.trailing_zeros(),
            points: psk_ring(m),
            mapping,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Bits per symbol.
    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    /// Points in geometric order, `points()[k] = e^{j(2k+1)π/M}`.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn mapping(&self) -> BitMapping {
        self.mapping
    }

    fn point_index(&self, label: usize) -> usize {
        match self.mapping {
            BitMapping::Natural => label,
            BitMapping::Gray => gray_decode(label),
        }
    }

    /// Symbol transmitted for a bit label.
    pub fn map_bits(&self, label: usize) -> Result<Complex64> {
        if label >= self.m {
            return Err(Error::LabelOutOfRange { label, m: self.m });
        }
        Ok(self.points[self.point_index(label)])
    }

    /// Symbols for all labels, indexed by label.
    pub fn symbols(&self) -> Vec<Complex64> {
        (0..self.m)
            .map(|l| self.points[self.point_index(l)])
            .collect()
    }

    /// Inverse of [`map_bits`](Self::map_bits).
    pub fn unmap(&self, symbol: Complex64) -> Result<usize> {
        (0..self.m)
            .find(|&l| (self.points[self.point_index(l)] - symbol).norm() < POINT_TOL)
            .ok_or(Error::NotAConstellationPoint {
                re: symbol.re,
                im: symbol.im,
            })
    }

    /// Smallest distance between two distinct points, by enumeration.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.min((p - q).norm());
            }
        }
        best
    }
}

impl Serialize for Constellation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pts: Vec<[f64; 2]> = self.points.iter().map(|p| [p.re, p.im]).collect();
        let mut st = serializer.serialize_struct("Constellation", 2)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("points", &pts)?;
        st.end()
    }
}

/// A fade state `z = γe^{jθ}`, the ratio of the two uplink coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadeState(Complex64);

impl FadeState {
    pub fn new(z: Complex64) -> Self {
        Self(z)
    }

    pub fn from_polar(gamma: f64, theta: f64) -> Self {
        Self(Complex64::from_polar(gamma, theta))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }

    pub fn gamma(&self) -> f64 {
        self.0.norm()
    }

    /// Phase in `[-π, π)`.
    pub fn theta(&self) -> f64 {
        wrap_phase(self.0.arg())
    }
}

impl From<Complex64> for FadeState {
    fn from(z: Complex64) -> Self {
        Self(z)
    }
}

/// Maps an angle into `[-π, π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// One nonzero point `x_{k,n} = 2 sin(nπ/M) e^{jφ}` of the difference
/// constellation. For `M >= 4`, `φ = k·2π/M` for odd `n` and `k·2π/M + π/M`
/// for even `n`; BPSK differences sit at `±2j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffPoint {
    pub value: Complex64,
    pub k: usize,
    pub n: usize,
}

/// Closed-form value of `x_{k,n}`.
pub fn diff_point_value(m: usize, k: usize, n: usize) -> Complex64 {
    let mf = m as f64;
    let radius = 2.0 * (PI * n as f64 / mf).sin();
    // s_a - s_b = 2j·sin(nπ/M)·e^{j(2b+n+1)π/M}; the quarter turn is a
    // lattice multiple except for BPSK.
    // In units of π/(2M), the lattice step is 4.
    let offset = ((m + 2 * n + 2) % 4) as f64 * PI / (2.0 * mf);
    Complex64::from_polar(radius, k as f64 * 2.0 * PI / mf + offset)
}

/// The set `ΔS = {s - s'}` of pairwise differences of an M-PSK set.
#[derive(Debug, Clone)]
pub struct DifferenceConstellation {
    pub m: usize,
    pub nonzero_points: Vec<DiffPoint>,
    pub includes_zero: bool,
}

impl DifferenceConstellation {
    /// All values, zero first.
    pub fn values(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.nonzero_points.len() + 1);
        if self.includes_zero {
            out.push(Complex64::new(0.0, 0.0));
        }
        out.extend(self.nonzero_points.iter().map(|p| p.value));
        out
    }

    pub fn len(&self) -> usize {
        self.nonzero_points.len() + usize::from(self.includes_zero)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Groups points that coincide within `tol`. Returns one representative per
/// group (the first point seen in input order) and, for each input point,
/// the index of its group. Groups are ordered by first appearance.
pub(crate) fn dedupe_points(points: &[Complex64], tol: f64) -> (Vec<Complex64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].re.total_cmp(&points[b].re).then(a.cmp(&b)));

    // Sweep in order of real part; candidate groups are those whose
    // representative lies within `tol` in the real direction.
    let mut group_of = vec![usize::MAX; points.len()];
    let mut reps: Vec<(f64, usize)> = Vec::new(); // (re, first input index), sorted by re
    let mut rep_group: Vec<usize> = Vec::new();
    let mut n_groups = 0usize;
    for &i in &order {
        let p = points[i];
        let mut found = None;
        for (j, &(re, first)) in reps.iter().enumerate().rev() {
            if re < p.re - tol {
                break;
            }
            if (points[first] - p).norm() <= tol {
                found = Some(rep_group[j]);
                break;
            }
        }
        match found {
            Some(g) => group_of[i] = g,
            None => {
                group_of[i] = n_groups;
                reps.push((p.re, i));
                rep_group.push(n_groups);
                n_groups += 1;
            }
        }
    }

    // Renumber groups by first appearance in input order.
    let mut renumber = vec![usize::MAX; n_groups];
    let mut uniques = Vec::with_capacity(n_groups);
    for (i, g) in group_of.iter_mut().enumerate() {
        if renumber[*g] == usize::MAX {
            renumber[*g] = uniques.len();
            uniques.push(points[i]);
        }
        *g = renumber[*g];
    }
    (uniques, group_of)
}

/// Builds `ΔS` by subtracting every pair of points, then indexes each value
/// by the closed form `x_{k,n}`.
pub fn difference_constellation(m: usize) -> Result<DifferenceConstellation> {
    let c = psk_points(m)?;
    let pts = c.points();
    let diffs: Vec<Complex64> = pts
        .iter()
        .flat_map(|&s| pts.iter().map(move |&t| s - t))
        .collect();
    let (mut uniques, _) = dedupe_points(&diffs, POINT_TOL);

    let includes_zero = uniques.iter().any(|v| v.norm() <= POINT_TOL);
    uniques.retain(|v| v.norm() > POINT_TOL);

    let mut nonzero_points = Vec::with_capacity(m * m / 2);
    for n in 1..=m / 2 {
        for k in 0..m {
            let value = diff_point_value(m, k, n);
            if !uniques.iter().any(|u| (u - value).norm() <= POINT_TOL) {
                return Err(Error::Internal(format!(
                    "x_({k},{n}) missing from the enumerated difference set"
                )));
            }
            nonzero_points.push(DiffPoint { value, k, n });
        }
    }
    if nonzero_points.len() != uniques.len() {
        return Err(Error::Internal(format!(
            "difference set has {} nonzero values, closed form has {}",
            uniques.len(),
            nonzero_points.len()
        )));
    }
    Ok(DifferenceConstellation {
        m,
        nonzero_points,
        includes_zero,
    })
}

/// An ordered pair `(d_k, d_l)` from `ΔS × ΔS`, indexing the distance term
/// `|d_k + z·d_l|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferencePair {
    pub dk: Complex64,
    pub dl: Complex64,
}

impl DifferencePair {
    pub fn new(dk: Complex64, dl: Complex64) -> Self {
        Self { dk, dl }
    }

    #[inline]
    pub fn distance(&self, z: Complex64) -> f64 {
        (self.dk + z * self.dl).norm()
    }

    /// True if one component is zero; such pairs never vanish for `z != 0`.
    pub fn is_free(&self) -> bool {
        self.dk.norm() <= POINT_TOL || self.dl.norm() <= POINT_TOL
    }

    /// The fade state `-d_k/d_l` at which this pair cancels, if any.
    pub fn fade_value(&self) -> Option<Complex64> {
        if self.is_free() {
            None
        } else {
            Some(-self.dk / self.dl)
        }
    }
}

/// All pairs of `ΔS × ΔS` except `(0, 0)`.
pub fn difference_pairs(m: usize) -> Result<Vec<DifferencePair>> {
    let values = difference_constellation(m)?.values();
    let mut out = Vec::with_capacity(values.len() * values.len() - 1);
    for &dk in &values {
        for &dl in &values {
            if dk.norm() <= POINT_TOL && dl.norm() <= POINT_TOL {
                continue;
            }
            out.push(DifferencePair::new(dk, dl));
        }
    }
    Ok(out)
}

/// The relay's noiseless receive set `{x_A + z·x_B}`.
#[derive(Debug, Clone)]
pub struct EffectiveConstellation {
    /// All `M²` sums, index `a·M + b` for labels `a` (node A) and `b` (node B).
    pub sums: Vec<Complex64>,
    /// Distinct points at the tolerance used.
    pub distinct: Vec<Complex64>,
}

impl EffectiveConstellation {
    pub fn distinct_count(&self) -> usize {
        self.distinct.len()
    }
}

/// Effective constellation, deduplicated at [`POINT_TOL`].
pub fn effective_constellation(c: &Constellation, z: FadeState) -> EffectiveConstellation {
    effective_constellation_with_tol(c, z, POINT_TOL)
}

pub fn effective_constellation_with_tol(
    c: &Constellation,
    z: FadeState,
    tol: f64,
) -> EffectiveConstellation {
    let sums = relay_sums(c, z.z());
    let (distinct, _) = dedupe_points(&sums, tol);
    EffectiveConstellation { sums, distinct }
}

/// `x_A + z·x_B` for every label pair, index `a·M + b`.
pub(crate) fn relay_sums(c: &Constellation, z: Complex64) -> Vec<Complex64> {
    let sym = c.symbols();
    sym.iter()
        .flat_map(|&xa| sym.iter().map(move |&xb| xa + z * xb))
        .collect()
}

/// Minimum distance of the effective constellation, evaluated over the
/// difference pairs of `ΔS × ΔS`.
pub fn d_min(c: &Constellation, z: FadeState) -> f64 {
    let mut values = difference_constellation(c.m())
        .expect("constellation order already validated")
        .values();
    // Exact zero so the (0, 0) skip below is a plain comparison.
    values[0] = Complex64::new(0.0, 0.0);
    let z = z.z();
    let mut best = f64::INFINITY;
    for &dk in values.iter() {
        for &dl in values.iter() {
            if dk.norm_sqr() == 0.0 && dl.norm_sqr() == 0.0 {
                continue;
            }
            best = best.min((dk + z * dl).norm_sqr());
        }
    }
    best.sqrt()
}

/// Minimum distance of the effective constellation, evaluated directly over
/// pairs of distinct transmit pairs in `S × S`.
pub fn d_min_brute_force(c: &Constellation, z: FadeState) -> f64 {
    let sums = relay_sums(c, z.z());
    let mut best = f64::INFINITY;
    for (i, p) in sums.iter().enumerate() {
        for q in &sums[i + 1..] {
            best = best.min((p - q).norm_sqr());
        }
    }
    best.sqrt()
}

/// Upper bound `min(2 sin(π/M), 2|z| sin(π/M))` on the minimum cluster
/// distance of any exclusive-law map. Attained exactly in the
/// singularity-free region.
pub fn cluster_distance_bound(m: usize, z: Complex64) -> f64 {
    let s = 2.0 * (PI / m as f64).sin();
    s.min(s * z.norm())
}
