//! Monte Carlo simulation of the two-phase relay protocol under block
//! Rayleigh fading.
//!
//! Each frame draws four fading coefficients, the relay picks a map from
//! `z = H_B/H_A`, and every symbol goes through a multiple-access phase with
//! joint ML detection at the relay followed by a broadcast of the cluster
//! label on a `t`-point PSK set (`t` = cluster count). End nodes detect the
//! label and invert the map with their own symbol.
//!
//! Throughput is `λ` times the mean per-direction frame success rate, so it
//! tops out at `λ` bits per channel use. SNR is `1/σ²` with unit symbol
//! energy; the same noise variance applies at every receiver.
//!
//! Randomness comes from ChaCha8 with stream number equal to the frame index.
//! Draws are unit-variance and scaled afterwards, so every SNR point and both
//! schemes see the same channels, data, and noise directions.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::constellation::{psk_points, psk_ring, Constellation, FadeState};
use crate::error::{Error, Result};
use crate::netcode_maps::{build_map_set, min_cluster_distance, xor_map, ClusterMap, MapSet};
use crate::quantizer::{Quantizer, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Adaptive,
    Xor,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Adaptive => "adaptive",
            Scheme::Xor => "xor",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m: usize,
    pub snr_db: Vec<f64>,
    pub frames: usize,
    pub frame_len: usize,
    pub scheme: Scheme,
    pub seed: u64,
    /// Variance of every fading link in dB.
    pub fading_variance_db: f64,
}

impl SimConfig {
    pub fn new(m: usize, snr_db: Vec<f64>, frames: usize, scheme: Scheme, seed: u64) -> Self {
        Self {
            m,
            snr_db,
            frames,
            frame_len: 256,
            scheme,
            seed,
            fading_variance_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::constellation::validate_order(self.m)?;
        if self.frames == 0 {
            return Err(Error::InvalidConfig("frames must be at least 1".into()));
        }
        if self.frame_len == 0 {
            return Err(Error::InvalidConfig(
                "frame length must be at least 1".into(),
            ));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("SNR list is empty".into()));
        }
        if self
            .snr_db
            .iter()
            .chain([&self.fading_variance_db])
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "SNR and fading variance must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrRecord {
    pub snr_db: f64,
    pub scheme: Scheme,
    /// Bits per channel use, in `[0, λ]`.
    pub throughput: f64,
    /// Standard error of `throughput` over frames.
    pub throughput_stderr: f64,
    pub fer_a: f64,
    pub fer_b: f64,
    /// Fraction of symbols whose detected cluster label differs from the
    /// label of the transmitted pair.
    pub relay_ser: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub m: usize,
    pub records: Vec<SnrRecord>,
    /// Smallest cluster distance of the selected map at the drawn `z`, over
    /// all frames.
    pub min_selected_distance: f64,
}

impl SimResult {
    /// Writes `snr_db,scheme,throughput,fer_a,fer_b,relay_ser,frames` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "snr_db,scheme,throughput,fer_a,fer_b,relay_ser,frames")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.snr_db,
                r.scheme.as_str(),
                r.throughput,
                r.fer_a,
                r.fer_b,
                r.relay_ser,
                r.frames
            )?;
        }
        Ok(())
    }
}

/// Joint ML estimate of `(x_A, x_B)` labels from `y = h_a·x_A + h_b·x_B + n`.
/// Ties go to the lexicographically smallest pair.
pub fn ml_joint_decode(
    c: &Constellation,
    y: Complex64,
    ha: Complex64,
    hb: Complex64,
) -> (usize, usize) {
    let sym = c.symbols();
    let rx_b: Vec<Complex64> = sym.iter().map(|&s| hb * s).collect();
    let mut best = (0, 0);
    let mut best_d = f64::INFINITY;
    for (a, &sa) in sym.iter().enumerate() {
        let r = y - ha * sa;
        for (b, &sb) in rx_b.iter().enumerate() {
            let d = (r - sb).norm_sqr();
            if d < best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    best
}

fn ml_point(ring: &[Complex64], y: Complex64, h: Complex64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &p) in ring.iter().enumerate() {
        let d = (y - h * p).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Constellation, quantizer, and maps shared by all frames.
#[derive(Debug, Clone)]
pub struct RelaySystem {
    constellation: Constellation,
    quantizer: Quantizer,
    maps: MapSet,
    xor: ClusterMap,
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameTally {
    fail_a: bool,
    fail_b: bool,
    relay_errors: u64,
}

impl RelaySystem {
    pub fn new(m: usize) -> Result<Self> {
        Self::from_parts(Quantizer::new(m)?, build_map_set(m)?)
    }

    pub fn from_parts(quantizer: Quantizer, maps: MapSet) -> Result<Self> {
        let m = quantizer.m();
        if maps.m != m {
            return Err(Error::InvalidConfig(format!(
                "map set is for {}-PSK, quantizer for {m}-PSK",
                maps.m
            )));
        }
        Ok(Self {
            constellation: psk_points(m)?,
            quantizer,
            maps,
            xor: xor_map(m)?,
        })
    }

    pub fn m(&self) -> usize {
        self.constellation.m()
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn maps(&self) -> &MapSet {
        &self.maps
    }

    pub fn xor(&self) -> &ClusterMap {
        &self.xor
    }

    /// Map the relay uses at fade state `z`.
    pub fn select_map(&self, z: FadeState, scheme: Scheme) -> &ClusterMap {
        match scheme {
            Scheme::Xor => &self.xor,
            Scheme::Adaptive => match self.quantizer.classify_oracle(z).label.region {
                Region::SingularityFree => &self.xor,
                Region::Fade(id) => self.maps.map_for(id),
            },
        }
    }

    fn frame(
        &self,
        config: &SimConfig,
        frame: usize,
        sigmas: &[f64],
        tallies: &mut [FrameTally],
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(frame as u64);
        let amp = 10f64.powf(config.fading_variance_db / 20.0);
        let ha = complex_normal(&mut rng) * amp;
        let hb = complex_normal(&mut rng) * amp;
        let ha_bc = complex_normal(&mut rng) * amp;
        let hb_bc = complex_normal(&mut rng) * amp;

        let z = FadeState::new(hb / ha);
        let map = self.select_map(z, config.scheme);
        let selected_distance = min_cluster_distance(map, &self.constellation, z);
        let ring = psk_ring(map.num_clusters());
        let sym = self.constellation.symbols();
        let m = self.m();

        for t in tallies.iter_mut() {
            *t = FrameTally::default();
        }
        for _ in 0..config.frame_len {
            let a = rng.random_range(0..m);
            let b = rng.random_range(0..m);
            let n_r = complex_normal(&mut rng);
            let n_a = complex_normal(&mut rng);
            let n_b = complex_normal(&mut rng);
            let clean = ha * sym[a] + hb * sym[b];
            let label = map.label(a, b);
            for (tally, &sigma) in tallies.iter_mut().zip(sigmas) {
                let (a_hat, b_hat) =
                    ml_joint_decode(&self.constellation, clean + n_r * sigma, ha, hb);
                let sent = map.label(a_hat, b_hat);
                if sent != label {
                    tally.relay_errors += 1;
                }
                let x_r = ring[sent];
                let at_a = ml_point(&ring, ha_bc * x_r + n_a * sigma, ha_bc);
                let at_b = ml_point(&ring, hb_bc * x_r + n_b * sigma, hb_bc);
                if map.invert_at_a(a, at_a) != Some(b) {
                    tally.fail_a = true;
                }
                if map.invert_at_b(b, at_b) != Some(a) {
                    tally.fail_b = true;
                }
            }
        }
        selected_distance
    }

    /// Runs every SNR point of `config`.
    pub fn run(&self, config: &SimConfig) -> Result<SimResult> {
        config.validate()?;
        if config.m != self.m() {
            return Err(Error::InvalidConfig(format!(
                "config is for {}-PSK, system for {}-PSK",
                config.m,
                self.m()
            )));
        }
        let sigmas: Vec<f64> = config
            .snr_db
            .iter()
            .map(|s| 10f64.powf(-s / 20.0))
            .collect();
        let per_frame: Vec<(f64, Vec<FrameTally>)> = (0..config.frames)
            .into_par_iter()
            .map(|f| {
                let mut tallies = vec![FrameTally::default(); sigmas.len()];
                let d = self.frame(config, f, &sigmas, &mut tallies);
                (d, tallies)
            })
            .collect();

        let lambda = self.constellation.lambda() as f64;
        let frames = config.frames as f64;
        let symbols = frames * config.frame_len as f64;
        let records = config
            .snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr_db)| {
                let (mut fa, mut fb, mut errs) = (0u64, 0u64, 0u64);
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for (_, t) in &per_frame {
                    let t = t[i];
                    fa += u64::from(t.fail_a);
                    fb += u64::from(t.fail_b);
                    errs += t.relay_errors;
                    let s = lambda
                        * (f64::from(u8::from(!t.fail_a)) + f64::from(u8::from(!t.fail_b)))
                        / 2.0;
                    sum += s;
                    sum_sq += s * s;
                }
                let mean = sum / frames;
                let var = if config.frames > 1 {
                    ((sum_sq - frames * mean * mean) / (frames - 1.0)).max(0.0)
                } else {
                    0.0
                };
                SnrRecord {
                    snr_db,
                    scheme: config.scheme,
                    throughput: mean,
                    throughput_stderr: (var / frames).sqrt(),
                    fer_a: fa as f64 / frames,
                    fer_b: fb as f64 / frames,
                    relay_ser: errs as f64 / symbols,
                    frames: config.frames,
                }
            })
            .collect();
        let min_selected_distance = per_frame
            .iter()
            .map(|(d, _)| *d)
            .fold(f64::INFINITY, f64::min);
        Ok(SimResult {
            m: self.m(),
            records,
            min_selected_distance,
        })
    }

    /// Relay cluster-label error rate with the channel pinned to `h_A = 1`,
    /// `h_B = z`.
    pub fn conditional_relay_ser(
        &self,
        z: FadeState,
        scheme: Scheme,
        snr_db: f64,
        symbols: usize,
        seed: u64,
    ) -> f64 {
        let map = self.select_map(z, scheme);
        let sigma = 10f64.powf(-snr_db / 20.0);
        let sym = self.constellation.symbols();
        let (ha, hb) = (Complex64::new(1.0, 0.0), z.z());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.m();
        let mut errors = 0usize;
        for _ in 0..symbols {
            let a = rng.random_range(0..m);
            let b = rng.random_range(0..m);
            let y = ha * sym[a] + hb * sym[b] + complex_normal(&mut rng) * sigma;
            let (a_hat, b_hat) = ml_joint_decode(&self.constellation, y, ha, hb);
            if map.label(a_hat, b_hat) != map.label(a, b) {
                errors += 1;
            }
        }
        errors as f64 / symbols as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singular_fades::{colliding_pairs, find_fade};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn noiseless_decode_recovers_pairs() {
        let q = psk_points(4).unwrap();
        let sym = q.symbols();
        let (ha, hb) = (c(0.8, -0.3), c(0.2, 1.1));
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(
                    ml_joint_decode(&q, ha * sym[a] + hb * sym[b], ha, hb),
                    (a, b)
                );
            }
        }
    }

    #[test]
    fn decode_at_a_singular_state_returns_a_colliding_member() {
        let q = psk_points(4).unwrap();
        let sym = q.symbols();
        let h = crate::singular_fades::enumerate_singular_fades(4).unwrap();
        let h = &h[find_fade(&h, c(0.5, 0.5), 1e-9).unwrap()];
        for pair in colliding_pairs(&q, h).unwrap() {
            let y = sym[pair.a.0] + h.value * sym[pair.a.1];
            let got = ml_joint_decode(&q, y, c(1.0, 0.0), h.value);
            assert!(got == pair.a || got == pair.b);
        }
    }

    #[test]
    fn small_noise_decodes_correctly() {
        let q = psk_points(4).unwrap();
        let sym = q.symbols();
        let eps = c(0.2, -0.25);
        let y = sym[1] + 3.0 * sym[2] + eps;
        assert_eq!(ml_joint_decode(&q, y, c(1.0, 0.0), c(3.0, 0.0)), (1, 2));
    }

    #[test]
    fn selection_rules() {
        let sys = RelaySystem::new(4).unwrap();
        let z = FadeState::from_polar(1.2, PI / 4.0);
        let id = find_fade(
            sys.quantizer().fades(),
            Complex64::from_polar(2f64.sqrt(), PI / 4.0),
            1e-9,
        )
        .unwrap();
        assert_eq!(sys.select_map(z, Scheme::Adaptive), sys.maps().map_for(id));
        assert_eq!(
            sys.select_map(FadeState::new(c(3.0, 0.0)), Scheme::Adaptive),
            sys.xor()
        );
        assert_eq!(sys.select_map(z, Scheme::Xor), sys.xor());
    }

    #[test]
    fn config_validation() {
        let sys = RelaySystem::new(4).unwrap();
        let mut cfg = SimConfig::new(4, vec![10.0], 0, Scheme::Xor, 1);
        assert!(sys.run(&cfg).is_err());
        cfg.frames = 1;
        cfg.frame_len = 0;
        assert!(sys.run(&cfg).is_err());
        cfg.frame_len = 4;
        cfg.snr_db.clear();
        assert!(sys.run(&cfg).is_err());
        let other = SimConfig::new(8, vec![10.0], 1, Scheme::Xor, 1);
        assert!(sys.run(&other).is_err());
    }

    #[test]
    fn high_snr_is_error_free_and_deterministic() {
        let sys = RelaySystem::new(4).unwrap();
        let cfg = SimConfig {
            frame_len: 32,
            ..SimConfig::new(4, vec![60.0, 0.0], 40, Scheme::Adaptive, 7)
        };
        let r1 = sys.run(&cfg).unwrap();
        let r2 = sys.run(&cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.records[0].throughput > 0.99 * 2.0);
        assert!(r1.records[1].throughput < r1.records[0].throughput);
        assert!(r1.min_selected_distance > 0.0);
        for r in &r1.records {
            assert!((0.0..=2.0).contains(&r.throughput));
            assert!((0.0..=1.0).contains(&r.relay_ser));
        }
    }

    #[test]
    fn csv_layout() {
        let res = SimResult {
            m: 4,
            records: vec![SnrRecord {
                snr_db: 10.0,
                scheme: Scheme::Xor,
                throughput: 1.5,
                throughput_stderr: 0.1,
                fer_a: 0.25,
                fer_b: 0.25,
                relay_ser: 0.125,
                frames: 8,
            }],
            min_selected_distance: 1.0,
        };
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,scheme,throughput,fer_a,fer_b,relay_ser,frames\n10,xor,1.5,0.25,0.25,0.125,8\n"
        );
    }
}
