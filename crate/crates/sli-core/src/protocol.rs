//! Shaking waveforms: enveloped Fourier segments and stitched sequences.
//!
//! A lattice-shaking waveform is a truncated Fourier series multiplied by a
//! `sin²(πt/T)` envelope so that the phase starts and ends at exactly zero.
//! Segments can therefore be stitched end to end without discontinuity, and
//! a full interferometer is a stitched sequence: split, propagation slots,
//! and the time-reversed split for recombination.

use alloc::vec::Vec;

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// Duration of every interferometer building block, seconds.
pub const SEGMENT_DURATION: f64 = 2e-4;

/// Bound on the summed coefficient magnitude of one segment, radians.
///
/// The EOM drive chain (0.746 rad/V into a ×40 amplifier, driven from a
/// signal generator with a few volts of range) bounds the realizable phase
/// excursion; capping `Σ(|Aₖ| + |Bₖ|)` keeps optimized waveforms in
/// hardware-plausible territory.
pub const AMPLITUDE_BOUND: f64 = PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("segment duration must be positive and finite")]
    InvalidDuration,
    #[error("frequency and amplitude lists must share one length")]
    MismatchedLists,
    #[error("frequencies and amplitudes must be finite and non-negative")]
    NonFinite,
    #[error("coefficient magnitude {got} rad exceeds the {bound} rad drive bound")]
    AmplitudeBound { got: f64, bound: f64 },
    #[error("time {t} s outside segment domain [0, {duration}] s")]
    OutOfDomain { t: f64, duration: f64 },
    #[error("protocol needs at least one segment")]
    Empty,
    #[error("stitching requires enveloped segments")]
    NotEnveloped,
    #[error("interferometer slot count must be 2(n-1) = {expected}, got {got}")]
    SegmentCount { expected: usize, got: usize },
    #[error("interferometer segments must last {SEGMENT_DURATION} s, got {got} s")]
    WrongDuration { got: f64 },
    #[error("interferometer order n must be at least 1")]
    InvalidOrder,
    #[error("sample rate {rate} Hz is below the Nyquist bound {bound} Hz")]
    SubNyquist { rate: f64, bound: f64 },
}

/// One shaking waveform: an enveloped Fourier series over a fixed duration.
///
/// The phase is
/// `φ(t) = f_env(t) · Σₖ [Aₖ sin(2πfₖt) + Bₖ cos(2πfₖt)]`
/// with `f_env(t) = sin²(πt/T)` when `enveloped` is set and 1 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSegment {
    duration: f64,
    frequencies: Vec<f64>,
    sin_amps: Vec<f64>,
    cos_amps: Vec<f64>,
    enveloped: bool,
}

impl WaveformSegment {
    pub fn new(
        duration: f64,
        frequencies: Vec<f64>,
        sin_amps: Vec<f64>,
        cos_amps: Vec<f64>,
        enveloped: bool,
    ) -> Result<Self, ProtocolError> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(ProtocolError::InvalidDuration);
        }
        if frequencies.len() != sin_amps.len() || frequencies.len() != cos_amps.len() {
            return Err(ProtocolError::MismatchedLists);
        }
        let finite = frequencies.iter().all(|f| f.is_finite() && *f >= 0.0)
            && sin_amps.iter().all(|a| a.is_finite())
            && cos_amps.iter().all(|a| a.is_finite());
        if !finite {
            return Err(ProtocolError::NonFinite);
        }
        let segment = Self { duration, frequencies, sin_amps, cos_amps, enveloped };
        let magnitude = segment.coefficient_magnitude();
        if magnitude > AMPLITUDE_BOUND {
            return Err(ProtocolError::AmplitudeBound { got: magnitude, bound: AMPLITUDE_BOUND });
        }
        Ok(segment)
    }

    /// The all-zero (no shaking) segment.
    pub fn zero(duration: f64) -> Self {
        Self {
            duration,
            frequencies: Vec::new(),
            sin_amps: Vec::new(),
            cos_amps: Vec::new(),
            enveloped: true,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn sin_amps(&self) -> &[f64] {
        &self.sin_amps
    }

    pub fn cos_amps(&self) -> &[f64] {
        &self.cos_amps
    }

    pub fn enveloped(&self) -> bool {
        self.enveloped
    }

    /// `Σₖ (|Aₖ| + |Bₖ|)`, an upper bound on the phase excursion.
    pub fn coefficient_magnitude(&self) -> f64 {
        self.sin_amps.iter().map(|a| a.abs()).sum::<f64>()
            + self.cos_amps.iter().map(|b| b.abs()).sum::<f64>()
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }

    /// Phase at `t`, which must lie in `[0, duration]`.
    pub fn eval_phase(&self, t: f64) -> Result<f64, ProtocolError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(ProtocolError::OutOfDomain { t, duration: self.duration });
        }
        Ok(self.phase_unchecked(t))
    }

    /// Phase at `t` without the domain check; hot propagation loops use this.
    ///
    /// Enveloped segments evaluate to exactly zero at and beyond their
    /// endpoints, which is what makes stitched sequences continuous.
    #[inline]
    pub fn phase_unchecked(&self, t: f64) -> f64 {
        if self.enveloped && (t <= 0.0 || t >= self.duration) {
            return 0.0;
        }
        let mut series = 0.0;
        for ((f, a), b) in self.frequencies.iter().zip(&self.sin_amps).zip(&self.cos_amps) {
            let arg = 2.0 * PI * f * t;
            series += a * arg.sin() + b * arg.cos();
        }
        if self.enveloped {
            let env = (PI * t / self.duration).sin();
            series * env * env
        } else {
            series
        }
    }

    /// The time-mirrored segment: `φ_rev(t) = φ(T - t)`.
    ///
    /// Realized in the same Fourier basis by rotating each coefficient pair
    /// through `θₖ = 2πfₖT` and negating the sine part:
    /// `A'ₖ = -Aₖ cos θₖ + Bₖ sin θₖ`, `B'ₖ = Aₖ sin θₖ + Bₖ cos θₖ`.
    /// The envelope is symmetric about `T/2`, so it is unaffected. Applying
    /// `reverse` twice restores the original coefficients.
    pub fn reverse(&self) -> Self {
        let mut sin_amps = Vec::with_capacity(self.frequencies.len());
        let mut cos_amps = Vec::with_capacity(self.frequencies.len());
        for ((f, a), b) in self.frequencies.iter().zip(&self.sin_amps).zip(&self.cos_amps) {
            let theta = 2.0 * PI * f * self.duration;
            let (sin_t, cos_t) = theta.sin_cos();
            sin_amps.push(-a * cos_t + b * sin_t);
            cos_amps.push(a * sin_t + b * cos_t);
        }
        Self {
            duration: self.duration,
            frequencies: self.frequencies.clone(),
            sin_amps,
            cos_amps,
            enveloped: self.enveloped,
        }
    }

    /// This segment with extra basis elements appended.
    ///
    /// dCRAB super-iterations dress the incumbent waveform with a freshly
    /// drawn frequency set; duplicate frequencies are fine, their
    /// coefficients simply add.
    pub fn extended_with(
        &self,
        frequencies: &[f64],
        sin_amps: &[f64],
        cos_amps: &[f64],
    ) -> Result<Self, ProtocolError> {
        let mut f = self.frequencies.clone();
        let mut a = self.sin_amps.clone();
        let mut b = self.cos_amps.clone();
        f.extend_from_slice(frequencies);
        a.extend_from_slice(sin_amps);
        b.extend_from_slice(cos_amps);
        Self::new(self.duration, f, a, b, self.enveloped)
    }
}

/// Role of a segment inside a stitched sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentLabel {
    Split,
    Propagate,
    Recombine,
}

impl SegmentLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentLabel::Split => "split",
            SegmentLabel::Propagate => "propagate",
            SegmentLabel::Recombine => "recombine",
        }
    }
}

/// A stitched sequence of labeled waveform segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ShakingProtocol {
    segments: Vec<(SegmentLabel, WaveformSegment)>,
    /// Cumulative start times; `starts[i]` is where segment `i` begins and
    /// the final entry equals the total duration.
    starts: Vec<f64>,
}

impl ShakingProtocol {
    /// Stitch labeled segments. All segments must be enveloped so the phase
    /// is continuous (identically zero) across every boundary.
    pub fn from_segments(
        segments: Vec<(SegmentLabel, WaveformSegment)>,
    ) -> Result<Self, ProtocolError> {
        if segments.is_empty() {
            return Err(ProtocolError::Empty);
        }
        if segments.iter().any(|(_, s)| !s.enveloped()) {
            return Err(ProtocolError::NotEnveloped);
        }
        let mut starts = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        starts.push(acc);
        for (_, s) in &segments {
            acc += s.duration();
            starts.push(acc);
        }
        Ok(Self { segments, starts })
    }

    /// The interferometer family: `[split, slots..., reverse(split)]`.
    ///
    /// Order `n` uses `2(n-1)` propagation slots of the standard segment
    /// duration, giving a total interrogation time of `2n` segments
    /// (0.4·n ms); splitting and recombination are counted inside it.
    pub fn interferometer(
        split: WaveformSegment,
        slots: Vec<WaveformSegment>,
        n: usize,
    ) -> Result<Self, ProtocolError> {
        if n < 1 {
            return Err(ProtocolError::InvalidOrder);
        }
        let expected = 2 * (n - 1);
        if slots.len() != expected {
            return Err(ProtocolError::SegmentCount { expected, got: slots.len() });
        }
        for segment in core::iter::once(&split).chain(&slots) {
            let t = segment.duration();
            if (t - SEGMENT_DURATION).abs() > 1e-12 * SEGMENT_DURATION {
                return Err(ProtocolError::WrongDuration { got: t });
            }
        }
        let recombine = split.reverse();
        let mut segments = Vec::with_capacity(2 * n);
        segments.push((SegmentLabel::Split, split));
        segments.extend(slots.into_iter().map(|s| (SegmentLabel::Propagate, s)));
        segments.push((SegmentLabel::Recombine, recombine));
        Self::from_segments(segments)
    }

    pub fn segments(&self) -> &[(SegmentLabel, WaveformSegment)] {
        &self.segments
    }

    /// Total interrogation time: the exact sum of segment durations.
    pub fn total_duration(&self) -> f64 {
        *self.starts.last().expect("protocol is never empty")
    }

    pub fn max_frequency(&self) -> f64 {
        self.segments.iter().map(|(_, s)| s.max_frequency()).fold(0.0, f64::max)
    }

    /// Phase at absolute time `t`.
    ///
    /// Segments own the half-open window `[start, start + T)`; the final
    /// instant belongs to the last segment. Outside `[0, total]` the shaking
    /// is off and the phase is zero.
    pub fn phase_at(&self, t: f64) -> f64 {
        let total = self.total_duration();
        if t < 0.0 || t > total {
            return 0.0;
        }
        if t == total {
            let (_, last) = self.segments.last().expect("non-empty");
            return last.phase_unchecked(last.duration());
        }
        // Linear scan: interferometers have at most a handful of segments.
        let idx = self
            .starts
            .windows(2)
            .position(|w| t >= w[0] && t < w[1])
            .expect("t within total duration");
        self.segments[idx].1.phase_unchecked(t - self.starts[idx])
    }

    /// Uniform time series of the phase over `[0, total_duration]`.
    ///
    /// `sample_rate` must exceed twice the largest series frequency. Samples
    /// sit at integer multiples of the sample period; a final sample at the
    /// exact end time is appended when the period does not divide the total
    /// duration.
    pub fn sample(&self, sample_rate: f64) -> Result<Vec<(f64, f64)>, ProtocolError> {
        let bound = 2.0 * self.max_frequency();
        if !(sample_rate.is_finite() && sample_rate > bound && sample_rate > 0.0) {
            return Err(ProtocolError::SubNyquist { rate: sample_rate, bound });
        }
        let total = self.total_duration();
        let count = (total * sample_rate).floor() as usize;
        let mut series = Vec::with_capacity(count + 2);
        for j in 0..=count {
            let t = j as f64 / sample_rate;
            if t > total {
                break;
            }
            series.push((t, self.phase_at(t)));
        }
        if let Some(&(t_last, _)) = series.last() {
            if t_last < total {
                series.push((total, self.phase_at(total)));
            }
        }
        Ok(series)
    }
}
