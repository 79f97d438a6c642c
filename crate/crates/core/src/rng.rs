//! Counter-based innovation streams.
//!
//! Every innovation `eps_t` is a pure function of `(root, stream_id, lane, t)`:
//! the ChaCha8 keystream block at position `t` (offset so negative times are
//! addressable) feeds the sampler for index `t`. Replaying or substituting a
//! single draw therefore never touches its neighbours.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math::{cos, ln, powf, sqrt};

/// Root seed and replication / coupling index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Seed {
    pub root: u64,
    pub stream_id: u64,
}

impl Seed {
    pub const fn new(root: u64, stream_id: u64) -> Self {
        Seed { root, stream_id }
    }

    pub const fn with_stream(self, stream_id: u64) -> Self {
        Seed { root: self.root, stream_id }
    }

    /// Independent root for a named sub-experiment; keeps `stream_id`.
    pub fn derive(self, tag: u64) -> Self {
        Seed { root: splitmix64(self.root ^ splitmix64(tag)), stream_id: self.stream_id }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Distribution of the i.i.d. innovations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum InnovationLaw {
    Gaussian { mean: f64, sd: f64 },
    StudentT { dof: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Default for InnovationLaw {
    fn default() -> Self {
        InnovationLaw::standard_gaussian()
    }
}

impl InnovationLaw {
    pub const fn standard_gaussian() -> Self {
        InnovationLaw::Gaussian { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::Gaussian { mean, sd } if mean.is_finite() && sd > 0.0 && sd.is_finite() => Ok(()),
            InnovationLaw::StudentT { dof, scale } if dof > 0.0 && scale > 0.0 && scale.is_finite() => Ok(()),
            InnovationLaw::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => Err(Error::invalid("innovation", "parameters out of range")),
        }
    }

    /// Supremum of orders `q` with `E|eps|^q < infinity` (exclusive for Student-t).
    pub fn moment_order(&self) -> f64 {
        match *self {
            InnovationLaw::StudentT { dof, .. } => dof,
            _ => f64::INFINITY,
        }
    }

    pub fn has_moment(&self, q: f64) -> bool {
        match *self {
            InnovationLaw::StudentT { dof, .. } => q < dof,
            _ => true,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            InnovationLaw::Gaussian { mean, .. } => mean,
            InnovationLaw::StudentT { .. } => 0.0,
            InnovationLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// `E[eps^2]`; infinite when it does not exist.
    pub fn second_moment(&self) -> f64 {
        match *self {
            InnovationLaw::Gaussian { mean, sd } => mean * mean + sd * sd,
            InnovationLaw::StudentT { dof, scale } => {
                if dof > 2.0 {
                    scale * scale * dof / (dof - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            InnovationLaw::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    fn sample(&self, w: &mut WordCursor) -> f64 {
        match *self {
            InnovationLaw::Gaussian { mean, sd } => mean + sd * standard_normal(w),
            InnovationLaw::Uniform { lo, hi } => lo + (hi - lo) * w.open01(),
            InnovationLaw::StudentT { dof, scale } => {
                let z = standard_normal(w);
                let chi2 = 2.0 * gamma(0.5 * dof, w);
                scale * z / sqrt(chi2 / dof)
            }
        }
    }
}

fn standard_normal(w: &mut WordCursor) -> f64 {
    let u1 = w.open01();
    let u2 = w.open01();
    sqrt(-2.0 * ln(u1)) * cos(2.0 * core::f64::consts::PI * u2)
}

/// Marsaglia-Tsang gamma(shape, 1) sampler.
fn gamma(shape: f64, w: &mut WordCursor) -> f64 {
    if shape < 1.0 {
        let u = w.open01();
        return gamma(shape + 1.0, w) * powf(u, 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / sqrt(9.0 * d);
    loop {
        let x = standard_normal(w);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = w.open01();
        if ln(u) < 0.5 * x * x + d - d * v + d * ln(v) {
            return d * v;
        }
    }
}

/// Independent sub-streams hanging off one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// The innovations driving every path.
    Primary,
    /// Independent copies `eps*` for coupling substitutions.
    Coupling,
    /// Pilot runs used for burn-in calibration and diagnostics.
    Pilot,
}

impl Lane {
    fn id(self) -> u64 {
        match self {
            Lane::Primary => 0,
            Lane::Coupling => 1,
            Lane::Pilot => 2,
        }
    }
}

const WORDS_PER_INDEX: usize = 16;
const INDEX_OFFSET: i128 = 1 << 48;

fn key(root: u64, lane: u64, salt: u64) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..8].copy_from_slice(&root.to_le_bytes());
    k[8..16].copy_from_slice(&lane.to_le_bytes());
    k[16..24].copy_from_slice(&salt.to_le_bytes());
    k[24..].copy_from_slice(b"locstat\x01");
    k
}

fn block_position(t: i64) -> u128 {
    ((t as i128 + INDEX_OFFSET) as u128) * WORDS_PER_INDEX as u128
}

struct WordCursor {
    block: [u32; WORDS_PER_INDEX],
    pos: usize,
    overflow: Option<ChaCha8Rng>,
    root: u64,
    lane: u64,
    stream: u64,
    t: i64,
}

impl WordCursor {
    fn next_u32(&mut self) -> u32 {
        if self.pos < WORDS_PER_INDEX {
            let w = self.block[self.pos];
            self.pos += 1;
            return w;
        }
        let (root, lane, stream, t) = (self.root, self.lane, self.stream, self.t);
        self.overflow
            .get_or_insert_with(|| {
                let mut r = ChaCha8Rng::from_seed(key(root, lane, 1 + t as u64));
                r.set_stream(stream);
                r
            })
            .next_u32()
    }

    /// Uniform on the open interval (0, 1) with 53 bits.
    fn open01(&mut self) -> f64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        let bits = ((hi << 32) | lo) >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Replayable innovation sequence `t -> eps_t` for integer `t` (negative allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationStream {
    law: InnovationLaw,
    seed: Seed,
    lane: Lane,
}

impl InnovationStream {
    pub fn new(law: InnovationLaw, seed: Seed) -> Self {
        InnovationStream { law, seed, lane: Lane::Primary }
    }

    pub fn lane(self, lane: Lane) -> Self {
        InnovationStream { lane, ..self }
    }

    pub fn law(&self) -> &InnovationLaw {
        &self.law
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(key(self.seed.root, self.lane.id(), 0));
        rng.set_stream(self.seed.stream_id);
        rng
    }

    fn cursor(&self, rng: &mut ChaCha8Rng, t: i64) -> WordCursor {
        let mut block = [0u32; WORDS_PER_INDEX];
        for w in block.iter_mut() {
            *w = rng.next_u32();
        }
        WordCursor {
            block,
            pos: 0,
            overflow: None,
            root: self.seed.root,
            lane: self.lane.id(),
            stream: self.seed.stream_id,
            t,
        }
    }

    /// The innovation at time `t`.
    pub fn draw(&self, t: i64) -> f64 {
        let mut rng = self.generator();
        rng.set_word_pos(block_position(t));
        let mut c = self.cursor(&mut rng, t);
        self.law.sample(&mut c)
    }

    /// Innovations for `t = first, first + 1, ..., first + len - 1`.
    pub fn window(&self, first: i64, len: usize) -> Innovations {
        let mut rng = self.generator();
        rng.set_word_pos(block_position(first));
        let mut values = Vec::with_capacity(len);
        for i in 0..len {
            let mut c = self.cursor(&mut rng, first + i as i64);
            values.push(self.law.sample(&mut c));
        }
        Innovations { first, values }
    }
}

/// A materialised block of innovations indexed by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovations {
    first: i64,
    values: Vec<f64>,
}

impl Innovations {
    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `eps_t`; panics if `t` is outside the window.
    #[inline]
    pub fn at(&self, t: i64) -> f64 {
        self.values[(t - self.first) as usize]
    }

    pub fn set(&mut self, t: i64, value: f64) {
        let i = (t - self.first) as usize;
        self.values[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_matches_pointwise_draws() {
        let s = InnovationStream::new(InnovationLaw::standard_gaussian(), Seed::new(7, 3));
        let w = s.window(-5, 20);
        for t in -5..15 {
            assert_eq!(w.at(t).to_bits(), s.draw(t).to_bits());
        }
    }

    #[test]
    fn lanes_and_streams_are_distinct() {
        let law = InnovationLaw::standard_gaussian();
        let a = InnovationStream::new(law, Seed::new(1, 0));
        let b = InnovationStream::new(law, Seed::new(1, 1));
        let c = a.lane(Lane::Coupling);
        assert_ne!(a.draw(0), b.draw(0));
        assert_ne!(a.draw(0), c.draw(0));
        assert_ne!(a.draw(0), a.draw(1));
    }

    #[test]
    fn student_t_and_uniform_have_expected_moments() {
        let t = InnovationStream::new(InnovationLaw::StudentT { dof: 6.0, scale: 1.0 }, Seed::new(11, 0)).window(0, 200_000);
        let v = crate::math::variance(t.as_slice());
        assert!((v - 1.5).abs() < 0.05, "t variance {v}");
        let u = InnovationStream::new(InnovationLaw::Uniform { lo: -1.0, hi: 3.0 }, Seed::new(11, 0)).window(0, 100_000);
        assert!(u.as_slice().iter().all(|x| (-1.0..3.0).contains(x)));
        assert!((crate::math::mean(u.as_slice()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn derived_roots_differ() {
        let s = Seed::new(5, 9);
        assert_ne!(s.derive(1).root, s.derive(2).root);
        assert_eq!(s.derive(1).stream_id, 9);
    }
}
