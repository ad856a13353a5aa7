//! Quantization of the fade-state plane into the singularity-free region and
//! one region per singular fade state.
//!
//! Two classifiers are provided. [`Quantizer::classify_oracle`] takes the
//! argmin of `|d_k + z·d_l|` over every difference pair and is normative.
//! [`Quantizer::classify_analytic`] evaluates the envelope test for the
//! singularity-free region and a small set of precomputed circle/line walls
//! per fade state.

pub mod geometry;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use geometry::{transition_boundary, Boundary, BoundaryKind, DegenerateBoundary};

use crate::constellation::{
    difference_pairs, psk_points, Constellation, DifferencePair, FadeState, POINT_TOL,
};
use crate::error::{Error, Result};
use crate::singular_fades::{enumerate_singular_fades, find_fade, SingularFadeState};
use geometry::{outer_envelope_disks, outside_envelope, Disk};

/// Default tolerance for declaring two labels tied at the minimum.
pub const TIE_TOL: f64 = 1e-9;

/// Largest raster accepted by [`Quantizer::rasterize`].
pub const MAX_RASTER_CELLS: u64 = 100_000_000;

// Slack on the wedge half-angle and on wall evaluation.
const WEDGE_TOL: f64 = 1e-9;
const WALL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    SingularityFree,
    Fade(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    SingularityFree,
    FadeRegion,
}

impl RegionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionKind::SingularityFree => "SINGULARITY_FREE",
            RegionKind::FadeRegion => "FADE_REGION",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionLabel {
    pub region: Region,
    /// Another label attains the minimum within the tie tolerance.
    pub on_boundary: bool,
}

impl RegionLabel {
    pub fn kind(&self) -> RegionKind {
        match self.region {
            Region::SingularityFree => RegionKind::SingularityFree,
            Region::Fade(_) => RegionKind::FadeRegion,
        }
    }

    pub fn fade_id(&self) -> Option<usize> {
        match self.region {
            Region::SingularityFree => None,
            Region::Fade(id) => Some(id),
        }
    }
}

/// Oracle classification with the gap to the runner-up label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOutcome {
    pub label: RegionLabel,
    /// `d_min` at `z`.
    pub min_distance: f64,
    /// Second-smallest label value minus the smallest. Each label value is
    /// 2-Lipschitz in `z`, so `z` is at least `margin / 4` from any locus
    /// where the two leading labels swap.
    pub margin: f64,
}

/// Fade states whose analytic region contains `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyticOutcome {
    pub free: bool,
    pub matches: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterMode {
    Oracle,
    Analytic,
}

/// Rectangular sampling window `[re_min, re_max] × [im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn square(half_width: f64) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
        }
    }

    /// Number of samples per axis, endpoints included when they fall on the
    /// lattice.
    pub fn dims(&self, step: f64) -> Result<(usize, usize)> {
        let valid = [self.re_min, self.re_max, self.im_min, self.im_max, step]
            .iter()
            .all(|v| v.is_finite());
        if !valid || step <= 0.0 || self.re_max < self.re_min || self.im_max < self.im_min {
            return Err(Error::InvalidConfig(format!(
                "bad window {self:?} or step {step}"
            )));
        }
        let count = |lo: f64, hi: f64| ((hi - lo) / step + 1e-9).floor() + 1.0;
        let (cols, rows) = (
            count(self.re_min, self.re_max),
            count(self.im_min, self.im_max),
        );
        let cells = cols * rows;
        if cells > MAX_RASTER_CELLS as f64 {
            return Err(Error::GridTooLarge(cells.min(u64::MAX as f64) as u64));
        }
        Ok((cols as usize, rows as usize))
    }

    /// Sample at column `i`, row `j`. Rows run upward in the imaginary part.
    pub fn point(&self, step: f64, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re_min + i as f64 * step, self.im_min + j as f64 * step)
    }
}

/// Row-major grid of labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub window: Window,
    pub step: f64,
    pub cols: usize,
    pub rows: usize,
    pub labels: Vec<RegionLabel>,
}

impl Raster {
    pub fn point(&self, index: usize) -> Complex64 {
        self.window
            .point(self.step, index % self.cols, index / self.cols)
    }

    /// Writes `re,im,kind,fade_id,on_boundary` rows; `fade_id` is empty for
    /// the singularity-free region.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im,kind,fade_id,on_boundary")?;
        for (idx, label) in self.labels.iter().enumerate() {
            let z = self.point(idx);
            let id = label.fade_id().map(|id| id.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                z.re,
                z.im,
                label.kind().as_str(),
                id,
                label.on_boundary
            )?;
        }
        Ok(())
    }

    /// Number of distinct regions present.
    pub fn distinct_regions(&self) -> usize {
        let mut seen: Vec<Region> = self.labels.iter().map(|l| l.region).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct LabelledPair {
    dk: Complex64,
    dl: Complex64,
    /// 0 for pairs with a zero component, otherwise fade id + 1.
    slot: usize,
}

/// A wall of a fade state's region: `eval(z) <= 0` on the fade's side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub competitor: usize,
    pub boundary: Boundary,
}

/// Precomputed classification data for one constellation order.
#[derive(Debug, Clone)]
pub struct Quantizer {
    constellation: Constellation,
    fades: Vec<SingularFadeState>,
    pairs: Vec<LabelledPair>,
    tie_tol: f64,
    envelope: Vec<Disk>,
    /// Index of the fade at `1/h`.
    inverse: Vec<usize>,
    /// Fades with `|h| >= 1` on each ray `θ = L·π/M`.
    outer_by_ray: Vec<Vec<usize>>,
    /// Walls for fades with `|h| >= 1`; empty for the others.
    walls: Vec<Vec<Wall>>,
    dominant: Vec<DifferencePair>,
}

fn dominant_rep(f: &SingularFadeState) -> DifferencePair {
    *f.representatives
        .iter()
        .min_by(|p, q| p.dl.norm().total_cmp(&q.dl.norm()))
        .expect("every fade state has a representative")
}

fn is_outer(f: &SingularFadeState) -> bool {
    f.value.norm() >= 1.0 - POINT_TOL
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl Quantizer {
    pub fn new(m: usize) -> Result<Self> {
        let constellation = psk_points(m)?;
        let fades = enumerate_singular_fades(m)?;
        let mut pairs = Vec::new();
        for p in difference_pairs(m)? {
            let slot = match p.fade_value() {
                None => 0,
                Some(h) => {
                    find_fade(&fades, h, 1e-7)
                        .ok_or_else(|| Error::Internal(format!("ratio {h} is not enumerated")))?
                        + 1
                }
            };
            pairs.push(LabelledPair {
                dk: p.dk,
                dl: p.dl,
                slot,
            });
        }

        let inverse = fades
            .iter()
            .map(|f| {
                find_fade(&fades, 1.0 / f.value, 1e-7)
                    .ok_or_else(|| Error::Internal(format!("1/{} is not enumerated", f.value)))
            })
            .collect::<Result<Vec<_>>>()?;

        let rays = 2 * m;
        let mut outer_by_ray = vec![Vec::new(); rays];
        for f in fades.iter().filter(|f| is_outer(f)) {
            outer_by_ray[f.ray_index(m)].push(f.id);
        }

        let dominant: Vec<DifferencePair> = fades.iter().map(dominant_rep).collect();
        let mut walls = vec![Vec::new(); fades.len()];
        for f in fades.iter().filter(|f| is_outer(f)) {
            let ray = f.ray_index(m);
            let mut competitors: Vec<usize> = [rays - 1, 0, 1]
                .iter()
                .flat_map(|&d| outer_by_ray[(ray + d) % rays].iter().copied())
                .filter(|&id| id != f.id)
                .collect();
            if f.value.norm() > 1.0 + POINT_TOL {
                // Same-ray state of modulus 1/|h|: the inversion boundary.
                let mirror = find_fade(&fades, f.value / f.value.norm_sqr(), 1e-7)
                    .ok_or_else(|| Error::Internal(format!("no mirror of {}", f.value)))?;
                competitors.push(mirror);
            }
            walls[f.id] = competitors
                .into_iter()
                .map(|id| Wall {
                    competitor: id,
                    boundary: geometry::pair_coefficients(&dominant[f.id], &dominant[id]),
                })
                .collect();
        }

        Ok(Self {
            envelope: outer_envelope_disks(m),
            constellation,
            fades,
            pairs,
            tie_tol: TIE_TOL,
            inverse,
            outer_by_ray,
            walls,
            dominant,
        })
    }

    pub fn with_tie_tol(mut self, tol: f64) -> Self {
        self.tie_tol = tol;
        self
    }

    pub fn m(&self) -> usize {
        self.constellation.m()
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn fades(&self) -> &[SingularFadeState] {
        &self.fades
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    /// Walls of the analytic region of fade `id` (empty when `|h| < 1`).
    pub fn walls(&self, id: usize) -> &[Wall] {
        &self.walls[id]
    }

    /// Index of the fade state at `1/h`.
    pub fn inverse_of(&self, id: usize) -> usize {
        self.inverse[id]
    }

    /// Argmin classification over all difference pairs.
    pub fn classify_oracle(&self, z: FadeState) -> OracleOutcome {
        let z = z.z();
        let mut best = vec![f64::INFINITY; self.fades.len() + 1];
        for p in &self.pairs {
            let v = (p.dk + z * p.dl).norm_sqr();
            if v < best[p.slot] {
                best[p.slot] = v;
            }
        }
        let values: Vec<f64> = best.into_iter().map(f64::sqrt).collect();
        let (mut lo, mut second) = (f64::INFINITY, f64::INFINITY);
        for &v in &values {
            if v < lo {
                second = lo;
                lo = v;
            } else if v < second {
                second = v;
            }
        }
        let mut tied = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= lo + self.tie_tol);
        let (slot, _) = tied.next().expect("at least one label");
        let on_boundary = tied.next().is_some();
        let region = if slot == 0 {
            Region::SingularityFree
        } else {
            Region::Fade(slot - 1)
        };
        OracleOutcome {
            label: RegionLabel {
                region,
                on_boundary,
            },
            min_distance: lo,
            margin: second - lo,
        }
    }

    /// Envelope test on `z` or on `1/z`.
    pub fn singularity_free_analytic(&self, z: FadeState) -> bool {
        let z = z.z();
        if z.norm_sqr() == 0.0 {
            return true;
        }
        let m = self.m();
        outside_envelope(m, &self.envelope, z) || outside_envelope(m, &self.envelope, 1.0 / z)
    }

    // Fade `id` with |h| >= 1 and |z| >= 1.
    fn outer_contains(&self, id: usize, z: Complex64) -> bool {
        let f = &self.fades[id];
        if !is_outer(f) {
            return false;
        }
        let axis = f.ray_index(self.m()) as f64 * PI / self.m() as f64;
        if angle_gap(z.arg(), axis) > PI / self.m() as f64 + WEDGE_TOL {
            return false;
        }
        self.walls[id]
            .iter()
            .all(|w| w.boundary.eval(z) <= WALL_TOL)
    }

    /// True if `z` lies in the analytic region of `h`.
    pub fn region_contains_analytic(&self, h: &SingularFadeState, z: FadeState) -> bool {
        let z = z.z();
        if z.norm_sqr() == 0.0 || self.singularity_free_analytic(FadeState::new(z)) {
            return false;
        }
        if z.norm() >= 1.0 {
            self.outer_contains(h.id, z)
        } else {
            self.outer_contains(self.inverse[h.id], 1.0 / z)
        }
    }

    /// Every fade region containing `z`, in id order.
    pub fn analytic_outcome(&self, z: FadeState) -> AnalyticOutcome {
        let z = z.z();
        if self.singularity_free_analytic(FadeState::new(z)) {
            return AnalyticOutcome {
                free: true,
                matches: Vec::new(),
            };
        }
        let (w, inverted) = if z.norm() >= 1.0 {
            (z, false)
        } else {
            (1.0 / z, true)
        };
        let m = self.m();
        let rays = 2 * m;
        let base = (w.arg().rem_euclid(2.0 * PI) / (PI / m as f64)).floor() as usize;
        let mut matches: Vec<usize> = Vec::new();
        for d in [rays - 1, 0, 1, 2] {
            for &id in &self.outer_by_ray[(base + d) % rays] {
                if self.outer_contains(id, w) {
                    matches.push(if inverted { self.inverse[id] } else { id });
                }
            }
        }
        matches.sort_unstable();
        matches.dedup();
        AnalyticOutcome {
            free: false,
            matches,
        }
    }

    /// Analytic classification. Several containing regions mark a boundary and
    /// resolve to the lowest id; a point in no region (only possible within
    /// rounding of a wall) falls to the wedge candidate with the smallest
    /// distance term and is also marked as a boundary.
    pub fn classify_analytic(&self, z: FadeState) -> RegionLabel {
        let out = self.analytic_outcome(z);
        if out.free {
            return RegionLabel {
                region: Region::SingularityFree,
                on_boundary: false,
            };
        }
        match out.matches.as_slice() {
            [id] => RegionLabel {
                region: Region::Fade(*id),
                on_boundary: false,
            },
            [id, ..] => RegionLabel {
                region: Region::Fade(*id),
                on_boundary: true,
            },
            [] => {
                let zz = z.z();
                let id = (0..self.fades.len())
                    .min_by(|&a, &b| {
                        self.dominant[a]
                            .distance(zz)
                            .total_cmp(&self.dominant[b].distance(zz))
                    })
                    .expect("nonempty fade set");
                RegionLabel {
                    region: Region::Fade(id),
                    on_boundary: true,
                }
            }
        }
    }

    pub fn classify(&self, z: FadeState, mode: RasterMode) -> RegionLabel {
        match mode {
            RasterMode::Oracle => self.classify_oracle(z).label,
            RasterMode::Analytic => self.classify_analytic(z),
        }
    }

    /// Labels every lattice point of `window`. The origin is labelled
    /// singularity-free.
    pub fn rasterize(&self, window: Window, step: f64, mode: RasterMode) -> Result<Raster> {
        let (cols, rows) = window.dims(step)?;
        let labels: Vec<RegionLabel> = (0..rows)
            .into_par_iter()
            .flat_map_iter(|j| {
                (0..cols).map(move |i| {
                    let z = window.point(step, i, j);
                    if z.norm_sqr() == 0.0 {
                        RegionLabel {
                            region: Region::SingularityFree,
                            on_boundary: false,
                        }
                    } else {
                        self.classify(FadeState::new(z), mode)
                    }
                })
            })
            .collect();
        Ok(Raster {
            window,
            step,
            cols,
            rows,
            labels,
        })
    }

    /// Compares both classifiers on the lattice of `window`, skipping points
    /// whose oracle margin is below `exclusion` (within `exclusion / 4` of a
    /// region boundary).
    pub fn verify_agreement(
        &self,
        window: Window,
        step: f64,
        exclusion: f64,
    ) -> Result<AgreementReport> {
        let (cols, rows) = window.dims(step)?;
        let parts: Vec<AgreementReport> = (0..rows)
            .into_par_iter()
            .map(|j| {
                let mut r = AgreementReport::empty(self.m(), step);
                for i in 0..cols {
                    let z = window.point(step, i, j);
                    if z.norm_sqr() == 0.0 {
                        continue;
                    }
                    let fz = FadeState::new(z);
                    let oracle = self.classify_oracle(fz);
                    if oracle.margin < exclusion {
                        r.excluded += 1;
                        continue;
                    }
                    r.compared += 1;
                    let analytic = self.analytic_outcome(fz);
                    let agree = match oracle.label.region {
                        Region::SingularityFree => analytic.free,
                        Region::Fade(id) => !analytic.free && analytic.matches == [id],
                    };
                    if !agree {
                        r.mismatches += 1;
                        if r.samples.len() < 20 {
                            r.samples.push(Mismatch {
                                re: z.re,
                                im: z.im,
                                oracle: oracle.label.fade_id(),
                                analytic_free: analytic.free,
                                analytic: analytic.matches,
                            });
                        }
                    }
                }
                r
            })
            .collect();
        let mut total = AgreementReport::empty(self.m(), step);
        for p in parts {
            total.compared += p.compared;
            total.excluded += p.excluded;
            total.mismatches += p.mismatches;
            for s in p.samples {
                if total.samples.len() < 20 {
                    total.samples.push(s);
                }
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub re: f64,
    pub im: f64,
    pub oracle: Option<usize>,
    pub analytic_free: bool,
    pub analytic: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub m: usize,
    pub step: f64,
    pub compared: u64,
    pub excluded: u64,
    pub mismatches: u64,
    /// First few mismatching points in row order.
    pub samples: Vec<Mismatch>,
}

impl AgreementReport {
    fn empty(m: usize, step: f64) -> Self {
        Self {
            m,
            step,
            compared: 0,
            excluded: 0,
            mismatches: 0,
            samples: Vec::new(),
        }
    }
}

/// Margin below which a point counts as lying on a region boundary for the
/// agreement check: `4 · 1e-6`, covering every point within `1e-6` of a
/// boundary locus.
pub const AGREEMENT_EXCLUSION: f64 = 4e-6;

#[cfg(test)]
mod tests {
    use super::*;

    fn q4() -> Quantizer {
        Quantizer::new(4).unwrap()
    }

    fn polar(r: f64, t: f64) -> FadeState {
        FadeState::from_polar(r, t)
    }

    fn fade_near(q: &Quantizer, h: Complex64) -> usize {
        find_fade(q.fades(), h, 1e-6).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let q = q4();
        let out = q.classify_oracle(FadeState::new(Complex64::new(3.0, 0.0)));
        assert_eq!(out.label.region, Region::SingularityFree);
        assert!((out.min_distance - 2f64.sqrt()).abs() < 1e-12);

        let out = q.classify_oracle(polar(1.2, PI / 4.0));
        let id = fade_near(&q, Complex64::from_polar(2f64.sqrt(), PI / 4.0));
        assert_eq!(out.label.region, Region::Fade(id));
        assert!(!out.label.on_boundary);

        for f in q.fades() {
            let out = q.classify_oracle(FadeState::new(f.value));
            assert_eq!(out.label.fade_id(), Some(f.id));
            assert!(out.min_distance < 1e-9);
        }
    }

    #[test]
    fn oracle_marks_ties() {
        let q = q4();
        // Equidistant from the two states on the unit circle at ±π/4 rays' ends.
        let out = q.classify_oracle(FadeState::new(Complex64::new(1.0, 0.0)));
        assert!(out.min_distance < 1e-9);
        let mid = q.classify_oracle(FadeState::new(Complex64::new(0.0, 0.5)));
        assert!(mid.margin >= 0.0);
    }

    #[test]
    fn analytic_free_examples() {
        let q = q4();
        assert!(q.singularity_free_analytic(FadeState::new(Complex64::new(3.0, 0.0))));
        assert!(!q.singularity_free_analytic(polar(1.2, PI / 4.0)));
        assert!(q.singularity_free_analytic(FadeState::new(Complex64::new(0.2, 0.0))));
        // On the unit circle every point is singular or inside a fade region.
        assert!(!q.singularity_free_analytic(FadeState::new(Complex64::new(1.0, 0.0))));
    }

    #[test]
    fn unit_state_is_not_free_for_8psk() {
        let q = Quantizer::new(8).unwrap();
        assert!(!q.singularity_free_analytic(FadeState::new(Complex64::new(1.0, 0.0))));
    }

    #[test]
    fn region_contains_examples() {
        let q = q4();
        let h = &q.fades()[fade_near(&q, Complex64::from_polar(2f64.sqrt(), PI / 4.0))];
        assert!(q.region_contains_analytic(h, polar(1.2, PI / 4.0)));
        assert!(!q.region_contains_analytic(h, polar(1.2, 3.0 * PI / 4.0)));

        let q8 = Quantizer::new(8).unwrap();
        let id = fade_near(&q8, Complex64::from_polar(1.847759065022573, PI / 8.0));
        let h = &q8.fades()[id];
        assert!(q8.region_contains_analytic(h, polar(1.8, PI / 8.0)));
        assert_eq!(
            q8.classify_oracle(polar(1.8, PI / 8.0)).label.fade_id(),
            Some(id)
        );
    }

    #[test]
    fn inverse_table_is_an_involution() {
        let q = Quantizer::new(8).unwrap();
        for f in q.fades() {
            let inv = q.inverse_of(f.id);
            assert_eq!(q.inverse_of(inv), f.id);
            assert!((q.fades()[inv].value * f.value - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn raster_counts_and_far_field() {
        let q = q4();
        let r = q
            .rasterize(Window::square(4.0), 0.05, RasterMode::Oracle)
            .unwrap();
        assert_eq!(r.cols, 161);
        assert_eq!(r.distinct_regions(), 13);

        let far = Window {
            re_min: 2.5,
            re_max: 3.5,
            im_min: 2.5,
            im_max: 3.5,
        };
        for mode in [RasterMode::Oracle, RasterMode::Analytic] {
            let r = q.rasterize(far, 0.1, mode).unwrap();
            assert!(r.labels.iter().all(|l| l.region == Region::SingularityFree));
        }
    }

    #[test]
    fn raster_limits() {
        let q = q4();
        assert!(matches!(
            q.rasterize(Window::square(1e4), 1e-3, RasterMode::Oracle),
            Err(Error::GridTooLarge(_))
        ));
        assert!(q
            .rasterize(Window::square(1.0), 0.0, RasterMode::Oracle)
            .is_err());
        let bad = Window {
            re_min: 1.0,
            re_max: 0.0,
            im_min: 0.0,
            im_max: 1.0,
        };
        assert!(q.rasterize(bad, 0.1, RasterMode::Oracle).is_err());
    }

    #[test]
    fn raster_csv_header_and_rows() {
        let q = q4();
        let w = Window {
            re_min: 0.0,
            re_max: 0.5,
            im_min: 0.0,
            im_max: 0.0,
        };
        let r = q.rasterize(w, 0.5, RasterMode::Oracle).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re,im,kind,fade_id,on_boundary");
        assert_eq!(lines[1], "0,0,SINGULARITY_FREE,,false");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn coarse_agreement_qpsk() {
        let q = q4();
        let r = q
            .verify_agreement(Window::square(4.0), 0.05, AGREEMENT_EXCLUSION)
            .unwrap();
        assert_eq!(r.mismatches, 0, "{:?}", r.samples);
        assert!(r.compared > 20_000);
    }

    #[test]
    fn walls_pass_through_competitor_ties() {
        let q = Quantizer::new(8).unwrap();
        for f in q.fades().iter().filter(|f| f.value.norm() > 1.0) {
            for w in q.walls(f.id) {
                if let Ok(b) = transition_boundary(&q.dominant[f.id], &q.dominant[w.competitor]) {
                    for z in b.sample(8, 2.0) {
                        let lhs = q.dominant[f.id].distance(z);
                        let rhs = q.dominant[w.competitor].distance(z);
                        assert!((lhs - rhs).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
