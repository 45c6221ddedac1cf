//! Counter-based random numbers (Philox4x32-10).
//!
//! A [`Stream`] is addressed by `(seed, stream id)` and generates values as
//! a pure function of its position, so any partition of work over streams
//! reproduces the same numbers regardless of scheduling.

use core::f64::consts::PI;

use libm::{cos, log, sqrt};

const MUL0: u32 = 0xD251_1F53;
const MUL1: u32 = 0xCD9E_8D57;
const WEYL0: u32 = 0x9E37_79B9;
const WEYL1: u32 = 0xBB67_AE85;

/// The Philox4x32 bijection with 10 rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox4x32 {
    key: [u32; 2],
}

impl Philox4x32 {
    pub fn new(key: [u32; 2]) -> Self {
        Philox4x32 { key }
    }

    pub fn from_seed(seed: u64) -> Self {
        Philox4x32::new([seed as u32, (seed >> 32) as u32])
    }

    pub fn block(&self, counter: [u32; 4]) -> [u32; 4] {
        let mut c = counter;
        let mut k = self.key;
        for round in 0..10 {
            if round > 0 {
                k[0] = k[0].wrapping_add(WEYL0);
                k[1] = k[1].wrapping_add(WEYL1);
            }
            let p0 = u64::from(MUL0) * u64::from(c[0]);
            let p1 = u64::from(MUL1) * u64::from(c[2]);
            let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
            let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
            c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
        }
        c
    }
}

/// Variable tags used to separate substreams within a replication.
pub mod tag {
    pub const COVARIATES: u16 = 1;
    pub const ASSIGNMENT: u16 = 2;
    pub const NOISE: u16 = 3;
}

/// Packs a replication index, redraw attempt and variable tag into a stream
/// id.
pub fn stream_id(replication: u64, attempt: u16, tag: u16) -> u64 {
    debug_assert!(replication < 1 << 32);
    (replication << 32) | (u64::from(attempt) << 16) | u64::from(tag)
}

/// Sequential reader over one Philox substream.
#[derive(Debug, Clone)]
pub struct Stream {
    generator: Philox4x32,
    stream: u64,
    position: u64,
    buffer: [u32; 4],
    used: usize,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream {
            generator: Philox4x32::from_seed(seed),
            stream,
            position: 0,
            buffer: [0; 4],
            used: 4,
            spare_normal: None,
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            let counter = [
                self.position as u32,
                (self.position >> 32) as u32,
                self.stream as u32,
                (self.stream >> 32) as u32,
            ];
            self.buffer = self.generator.block(counter);
            self.position += 1;
            self.used = 0;
        }
        let v = self.buffer[self.used];
        self.used += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform on the open interval `(0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by the Box-Muller transform; the second variate of
    /// each pair is kept for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let radius = sqrt(-2.0 * log(u1));
        let angle = 2.0 * PI * u2;
        self.spare_normal = Some(radius * libm::sin(angle));
        radius * cos(angle)
    }

    /// Uniform integer in `0..bound` by rejection on 64-bit draws.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }
}
