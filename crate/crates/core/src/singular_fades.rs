//! Singular fade states: the finite set of nonzero `z` at which two transmit
//! pairs land on the same relay point.
//!
//! The set is enumerated by brute force over all ratios `-d_k/d_l` of nonzero
//! difference-constellation points, then every value is checked against the
//! closed form: radius `sin(k1·π/M)/sin(k2·π/M)`, phase a multiple of `2π/M`
//! when `k1` and `k2` share parity and offset by `π/M` otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::constellation::{
    dedupe_points, difference_constellation, effective_constellation_with_tol, relay_sums,
    validate_order, wrap_phase, Constellation, DifferencePair, FadeState, POINT_TOL,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SingularFadeState {
    /// Position in the `(radius, phase)` ordering.
    pub id: usize,
    pub value: Complex64,
    pub circle_radius: f64,
    /// `(k1, k2)` with radius `sin(k1·π/M)/sin(k2·π/M)`; `(1, 1)` on the unit circle.
    pub circle_index: (usize, usize),
    /// `k` in the phase `k·2π/M` (same parity) or `k·2π/M + π/M`.
    pub phase_slot: usize,
    /// Every pair `(d_k, d_l)` of nonzero differences with `-d_k/d_l = value`.
    pub representatives: Vec<DifferencePair>,
}

impl SingularFadeState {
    /// Phase in `[-π, π)`.
    pub fn phase(&self) -> f64 {
        wrap_phase(self.value.arg())
    }

    /// Index of the ray `θ = L·π/M` the state lies on, `L` in `0..2M`.
    pub fn ray_index(&self, m: usize) -> usize {
        let (k1, k2) = self.circle_index;
        let odd = (k1 + k2) % 2 == 1;
        (2 * self.phase_slot + usize::from(odd)) % (2 * m)
    }

    /// Smallest `|d_l|` over the representatives; the distance term of the
    /// closest representative is `min|d_l| · |z - value|`.
    pub fn min_weight(&self) -> f64 {
        self.representatives
            .iter()
            .map(|p| p.dl.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Two transmit pairs `(x_A, x_B)` (as bit labels) that superpose onto the
/// same relay point at a singular fade state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CollidingPair {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

fn sine_ratio(m: usize, k1: usize, k2: usize) -> f64 {
    let mf = m as f64;
    (k1 as f64 * PI / mf).sin() / (k2 as f64 * PI / mf).sin()
}

/// Distinct values of `sin(k1·π/M)/sin(k2·π/M)` for `1 <= k1, k2 <= M/2`,
/// ascending.
pub fn singular_circle_radii(m: usize) -> Result<Vec<f64>> {
    validate_order(m)?;
    let half = m / 2;
    let mut all: Vec<f64> = (1..=half)
        .flat_map(|k1| (1..=half).map(move |k2| sine_ratio(m, k1, k2)))
        .collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for r in all {
        match out.last() {
            Some(&last) if (r - last).abs() <= POINT_TOL => {}
            _ => out.push(r),
        }
    }
    Ok(out)
}

/// Number of circles, `M²/4 - M/2 + 1`.
pub fn expected_circle_count(m: usize) -> usize {
    m * m / 4 - m / 2 + 1
}

/// Parameters `(k1, k2)` generating each radius; `(1, 1)` for the unit circle.
fn circle_parameters(m: usize, radius: f64) -> Option<(usize, usize)> {
    if (radius - 1.0).abs() <= POINT_TOL {
        return Some((1, 1));
    }
    let half = m / 2;
    (1..=half)
        .flat_map(|k1| (1..=half).map(move |k2| (k1, k2)))
        .find(|&(k1, k2)| k1 != k2 && (sine_ratio(m, k1, k2) - radius).abs() <= POINT_TOL)
}

/// All nonzero singular fade states, ordered by radius then phase in
/// `[-π, π)`, with ids assigned in that order.
pub fn enumerate_singular_fades(m: usize) -> Result<Vec<SingularFadeState>> {
    let nonzero: Vec<Complex64> = difference_constellation(m)?
        .nonzero_points
        .iter()
        .map(|p| p.value)
        .collect();

    let mut pairs = Vec::with_capacity(nonzero.len() * nonzero.len());
    let mut ratios = Vec::with_capacity(nonzero.len() * nonzero.len());
    for &dk in &nonzero {
        for &dl in &nonzero {
            pairs.push(DifferencePair::new(dk, dl));
            ratios.push(-dk / dl);
        }
    }
    let (values, group_of) = dedupe_points(&ratios, POINT_TOL);

    let mut reps: Vec<Vec<DifferencePair>> = vec![Vec::new(); values.len()];
    for (pair, &g) in pairs.iter().zip(&group_of) {
        reps[g].push(*pair);
    }

    let radii = singular_circle_radii(m)?;
    let step = 2.0 * PI / m as f64;
    let mut fades = Vec::with_capacity(values.len());
    for (value, representatives) in values.into_iter().zip(reps) {
        let modulus = value.norm();
        let rank = radii
            .iter()
            .position(|r| (r - modulus).abs() <= POINT_TOL)
            .ok_or_else(|| Error::Internal(format!("|h| = {modulus} is not a sine ratio")))?;
        let circle_index = circle_parameters(m, radii[rank])
            .ok_or_else(|| Error::Internal(format!("no (k1, k2) for radius {}", radii[rank])))?;
        let offset = if (circle_index.0 + circle_index.1) % 2 == 1 {
            PI / m as f64
        } else {
            0.0
        };
        let slot_f = (value.arg() - offset).rem_euclid(2.0 * PI) / step;
        let slot = slot_f.round();
        if (slot_f - slot).abs() > 1e-6 {
            return Err(Error::Internal(format!(
                "phase {} of {value} is off the lattice for circle {circle_index:?}",
                value.arg()
            )));
        }
        let phase_slot = slot as usize % m;
        // Snap to the closed-form location.
        let value = Complex64::from_polar(radii[rank], phase_slot as f64 * step + offset);
        fades.push((
            rank,
            wrap_phase(value.arg()),
            SingularFadeState {
                id: 0,
                value,
                circle_radius: radii[rank],
                circle_index,
                phase_slot,
                representatives,
            },
        ));
    }

    fades.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let fades: Vec<SingularFadeState> = fades
        .into_iter()
        .enumerate()
        .map(|(id, (_, _, mut f))| {
            f.id = id;
            f
        })
        .collect();

    let expected = m * expected_circle_count(m);
    if fades.len() != expected {
        return Err(Error::Internal(format!(
            "enumerated {} singular fade states, expected {expected}",
            fades.len()
        )));
    }
    Ok(fades)
}

/// Unordered pairs of transmit pairs that coincide at `h`.
pub fn colliding_pairs(c: &Constellation, h: &SingularFadeState) -> Result<Vec<CollidingPair>> {
    colliding_pairs_at(c, h.value)
}

pub(crate) fn colliding_pairs_at(c: &Constellation, h: Complex64) -> Result<Vec<CollidingPair>> {
    let m = c.m();
    let sums = relay_sums(c, h);
    let mut out = Vec::new();
    for i in 0..sums.len() {
        for j in i + 1..sums.len() {
            if (sums[i] - sums[j]).norm() < POINT_TOL {
                out.push(CollidingPair {
                    a: (i / m, i % m),
                    b: (j / m, j % m),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NotSingular { re: h.re, im: h.im });
    }
    Ok(out)
}

/// True if the effective constellation at `z` has fewer than `M²` distinct
/// points at tolerance `tol`.
pub fn is_singular(c: &Constellation, z: FadeState, tol: f64) -> bool {
    effective_constellation_with_tol(c, z, tol).distinct_count() < c.m() * c.m()
}

/// Index of the fade state within `tol` of `z`, if any.
pub fn find_fade(fades: &[SingularFadeState], z: Complex64, tol: f64) -> Option<usize> {
    fades
        .iter()
        .find(|f| (f.value - z).norm() <= tol)
        .map(|f| f.id)
}

/// Serialized form of the `fades` subcommand output.
#[derive(Debug, Serialize)]
pub struct FadeReport {
    pub m: usize,
    pub count: usize,
    pub fades: Vec<FadeEntry>,
}

#[derive(Debug, Serialize)]
pub struct FadeEntry {
    pub id: usize,
    pub re: f64,
    pub im: f64,
    pub radius: f64,
    pub phase: f64,
}

impl FadeReport {
    pub fn new(m: usize, fades: &[SingularFadeState]) -> Self {
        Self {
            m,
            count: fades.len(),
            fades: fades
                .iter()
                .map(|f| FadeEntry {
                    id: f.id,
                    re: f.value.re,
                    im: f.value.im,
                    radius: f.circle_radius,
                    phase: f.phase(),
                })
                .collect(),
        }
    }
}
