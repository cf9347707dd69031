//! The SimpleSong signal: alternating chords built from pure sine waves.
//!
//! An A interval plays C4, E4 and G4 with weights 1, 2, 3; a B interval
//! plays G4, C5 and E5 with weights 3, 2.5, 1.5. The A/B pair is repeated
//! `t` times. Dictionary atoms are full-length unit-amplitude sines at the
//! note frequencies plus a set of distractor frequencies.

use std::f64::consts::TAU;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    pub name: &'static str,
    pub hz: f64,
}

pub const NOTES: [Note; 6] = [
    Note {
        name: "C4",
        hz: 256.0,
    },
    Note {
        name: "E4",
        hz: 330.0,
    },
    Note {
        name: "G4",
        hz: 392.0,
    },
    Note {
        name: "C5",
        hz: 512.0,
    },
    Note {
        name: "E5",
        hz: 660.0,
    },
    Note {
        name: "G5",
        hz: 784.0,
    },
];

pub const DISTRACTOR_FREQUENCIES: [f64; 6] = [128.0, 200.0, 300.0, 440.0, 600.0, 880.0];

const CHORD_A: [(&str, f64); 3] = [("C4", 1.0), ("E4", 2.0), ("G4", 3.0)];
const CHORD_B: [(&str, f64); 3] = [("G4", 3.0), ("C5", 2.5), ("E5", 1.5)];

#[derive(Debug, Clone, PartialEq)]
pub struct SongConfig {
    pub sample_rate: u32,
    pub interval_secs: f64,
    /// Multiplies every frequency; ratios between notes are unchanged.
    pub freq_scale: f64,
}

impl SongConfig {
    /// 44.1 kHz audio with one-minute intervals.
    pub fn full() -> Self {
        Self {
            sample_rate: 44_100,
            interval_secs: 60.0,
            freq_scale: 1.0,
        }
    }

    /// 1 kHz sampling, one-second intervals, frequencies halved so that every
    /// atom stays below the Nyquist limit.
    pub fn reduced() -> Self {
        Self {
            sample_rate: 1_000,
            interval_secs: 1.0,
            freq_scale: 0.5,
        }
    }

    pub fn samples_per_interval(&self) -> usize {
        (self.sample_rate as f64 * self.interval_secs).round() as usize
    }

    /// Length of a song with `t` A/B repetitions.
    pub fn signal_len(&self, t: usize) -> usize {
        2 * t * self.samples_per_interval()
    }
}

#[derive(Debug, Clone)]
pub struct SimpleSong {
    pub signal: Vec<f64>,
    pub atoms: Matrix,
    pub atom_names: Vec<String>,
    pub atom_hz: Vec<f64>,
    pub config: SongConfig,
}

impl SimpleSong {
    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atom_names.iter().position(|n| n == name)
    }
}

/// Validate a repetition count given as a real number.
pub fn repetitions(t: f64) -> Result<usize> {
    if t.fract() != 0.0 || t < 1.0 || !t.is_finite() {
        return Err(Error::config(format!(
            "song repetitions must be a positive integer, got {t}"
        )));
    }
    Ok(t as usize)
}

fn sine(hz: f64, sample_rate: u32, len: usize) -> impl Iterator<Item = f64> {
    let w = TAU * hz / sample_rate as f64;
    (0..len).map(move |i| (w * i as f64).sin())
}

pub fn gen_simple_song(t: usize, config: &SongConfig) -> Result<SimpleSong> {
    repetitions(t as f64)?;
    let per = config.samples_per_interval();
    if per == 0 || config.freq_scale <= 0.0 {
        return Err(Error::config(
            "song interval must contain at least one sample",
        ));
    }
    let len = config.signal_len(t);
    let hz_of = |name: &str| {
        NOTES
            .iter()
            .find(|n| n.name == name)
            .map(|n| n.hz * config.freq_scale)
            .expect("chord notes are in the note table")
    };

    let mut signal = vec![0.0; len];
    for rep in 0..t {
        for (slot, chord) in [CHORD_A, CHORD_B].iter().enumerate() {
            let start = (2 * rep + slot) * per;
            for &(name, weight) in chord {
                let w = TAU * hz_of(name) / config.sample_rate as f64;
                for (i, s) in signal[start..start + per].iter_mut().enumerate() {
                    *s += weight * (w * (start + i) as f64).sin();
                }
            }
        }
    }

    let mut names = Vec::new();
    let mut hz = Vec::new();
    for n in NOTES {
        names.push(n.name.to_owned());
        hz.push(n.hz * config.freq_scale);
    }
    for f in DISTRACTOR_FREQUENCIES {
        names.push(format!("{f}Hz"));
        hz.push(f * config.freq_scale);
    }
    let mut data = Vec::with_capacity(hz.len() * len);
    for &f in &hz {
        data.extend(sine(f, config.sample_rate, len));
    }
    Ok(SimpleSong {
        signal,
        atoms: Matrix::new(hz.len(), len, data)?,
        atom_names: names,
        atom_hz: hz,
        config: config.clone(),
    })
}
