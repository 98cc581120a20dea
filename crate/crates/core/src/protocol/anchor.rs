//! Anchor-X: the reference squeezed through a 3.5 kHz sample-rate
//! bottleneck and brought back to its original rate.
//!
//! Both rate changes use a Kaiser-windowed sinc kernel evaluated on a
//! polyphase table. The kernel is specified in Hz so the same design serves
//! decimation and interpolation: passband edge 1.55 kHz, stopband edge
//! 1.75 kHz (the bottleneck Nyquist), about 80 dB stop-band attenuation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::audio::AudioClip;

pub const ANCHOR_X_RATE_HZ: u32 = 3500;
const MIN_INPUT_RATE_HZ: u32 = 8000;

const PASS_EDGE_HZ: f64 = 1550.0;
const STOP_EDGE_HZ: f64 = 1750.0;
const STOPBAND_DB: f64 = 80.0;
/// Half the kernel support, in seconds.
const HALF_WIDTH_S: f64 = 0.014;
/// Above this many table entries the kernel is evaluated on the fly.
const MAX_TABLE_LEN: usize = 1 << 22;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        let r = half / k as f64;
        term *= r * r;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rational-ratio windowed-sinc resampler with a fixed low-pass cutoff.
#[derive(Debug, Clone)]
pub struct Resampler {
    from: u32,
    to: u32,
    /// Output/input ratio reduced to up/down.
    up: u64,
    down: u64,
    /// Half support in input samples (taps = 2 * half).
    half: usize,
    cutoff_hz: f64,
    beta: f64,
    table: Option<Vec<f64>>,
}

impl Resampler {
    pub fn new(from: u32, to: u32) -> Self {
        let g = gcd(u64::from(from), u64::from(to));
        let beta = 0.1102 * (STOPBAND_DB - 8.7);
        let half = (HALF_WIDTH_S * f64::from(from)).ceil() as usize;
        let mut r = Resampler {
            from,
            to,
            up: u64::from(to) / g,
            down: u64::from(from) / g,
            half,
            cutoff_hz: 0.5 * (PASS_EDGE_HZ + STOP_EDGE_HZ),
            beta,
            table: None,
        };
        let len = r.up as usize * 2 * half;
        if len <= MAX_TABLE_LEN {
            let mut table = Vec::with_capacity(len);
            for phase in 0..r.up {
                for i in 0..2 * half {
                    table.push(r.kernel(r.offset(phase, i)));
                }
            }
            r.table = Some(table);
        }
        r
    }

    /// Distance (in input samples) from output position to tap `i`.
    fn offset(&self, phase: u64, i: usize) -> f64 {
        (self.half as f64 - 1.0 - i as f64) + phase as f64 / self.up as f64
    }

    fn kernel(&self, d: f64) -> f64 {
        let width = HALF_WIDTH_S * f64::from(self.from);
        if d.abs() >= width {
            return 0.0;
        }
        let fc = 2.0 * self.cutoff_hz / f64::from(self.from);
        let x = fc * d;
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let r = d / width;
        let window = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / bessel_i0(self.beta);
        fc * sinc * window
    }

    fn weight(&self, phase: u64, i: usize) -> f64 {
        match &self.table {
            Some(t) => t[phase as usize * 2 * self.half + i],
            None => self.kernel(self.offset(phase, i)),
        }
    }

    /// Resamples to exactly `out_len` output samples; input outside its
    /// bounds is treated as zero.
    pub fn process(&self, input: &[f64], out_len: usize) -> Vec<f64> {
        let n_in = input.len() as i64;
        (0..out_len as u64)
            .map(|j| {
                let pos = j * self.down;
                let base = (pos / self.up) as i64;
                let phase = pos % self.up;
                let first = base - self.half as i64 + 1;
                let mut acc = 0.0;
                for i in 0..2 * self.half {
                    let n = first + i as i64;
                    if (0..n_in).contains(&n) {
                        acc += input[n as usize] * self.weight(phase, i);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn from_rate(&self) -> u32 {
        self.from
    }

    pub fn to_rate(&self) -> u32 {
        self.to
    }
}

/// Builds the Anchor-X version of `clip`: same rate, same length, content
/// band-limited by a round trip through 3.5 kHz.
pub fn make_anchor_x(clip: &AudioClip) -> Result<AudioClip> {
    if clip.sample_rate < MIN_INPUT_RATE_HZ {
        return Err(Error::Format(format!(
            "sample rate {} Hz is below the {MIN_INPUT_RATE_HZ} Hz minimum for Anchor-X",
            clip.sample_rate
        )));
    }
    let rate = clip.sample_rate;
    let n = clip.samples.len();
    let mid_len = (n as u64 * u64::from(ANCHOR_X_RATE_HZ)).div_ceil(u64::from(rate)) as usize;

    let down = Resampler::new(rate, ANCHOR_X_RATE_HZ).process(&clip.samples, mid_len);
    let mut out = Resampler::new(ANCHOR_X_RATE_HZ, rate).process(&down, n);
    for s in &mut out {
        *s = s.clamp(-1.0, 1.0);
    }
    AudioClip::new(out, rate)
}
