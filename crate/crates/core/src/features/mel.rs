use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AudioBuffer, FeatureConfig, FeatureError, BAND_COUNT};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale, peak weight 1.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `[bands][bins]` row-major.
    weights: Vec<f64>,
    /// Nonzero bin range of each band.
    support: Vec<(usize, usize)>,
    centers: Vec<f64>,
    bins: usize,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, n_fft: usize, low_hz: f64, high_hz: f64, bands: usize) -> Self {
        let bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
        let edges: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut weights = vec![0.0; bands * bins];
        let mut support = Vec::with_capacity(bands);
        for b in 0..bands {
            let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
            let row = &mut weights[b * bins..(b + 1) * bins];
            let (mut first, mut last) = (bins, 0);
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let v = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                if v > 0.0 {
                    *w = v;
                    first = first.min(k);
                    last = k + 1;
                }
            }
            support.push(if first < last { (first, last) } else { (0, 0) });
        }
        MelFilterbank {
            weights,
            support,
            centers: edges[1..=bands].to_vec(),
            bins,
        }
    }

    pub fn from_config(cfg: &FeatureConfig, sample_rate: u32) -> Self {
        MelFilterbank::new(sample_rate, cfg.window, cfg.mel_low_hz, cfg.mel_high_hz, BAND_COUNT)
    }

    pub fn bands(&self) -> usize {
        self.centers.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Center frequency of each band in Hz.
    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.weights[band * self.bins..(band + 1) * self.bins]
    }

    fn apply(&self, magnitudes: &[f64], out: &mut [f32]) {
        for (b, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.support[b];
            let row = &self.row(b)[lo..hi];
            let energy: f64 = row.iter().zip(&magnitudes[lo..hi]).map(|(w, m)| w * m).sum();
            *o = energy.ln_1p() as f32;
        }
    }
}

/// Log-compressed mel magnitudes, frame-major `[n_frames][BAND_COUNT]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Vec<f32>,
    n_frames: usize,
    pub hop_seconds: f64,
}

impl MelSpectrogram {
    pub fn from_frames(data: Vec<f32>, hop_seconds: f64) -> Result<Self, FeatureError> {
        if data.len() % BAND_COUNT != 0 {
            return Err(FeatureError::Format(format!(
                "{} values is not a whole number of {BAND_COUNT}-band frames",
                data.len()
            )));
        }
        if !(hop_seconds > 0.0) {
            return Err(FeatureError::Format("hop must be positive".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::Format("non-finite spectrogram value".into()));
        }
        Ok(MelSpectrogram {
            n_frames: data.len() / BAND_COUNT,
            data,
            hop_seconds,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn band_count(&self) -> usize {
        BAND_COUNT
    }

    pub fn frame(&self, k: usize) -> &[f32] {
        &self.data[k * BAND_COUNT..(k + 1) * BAND_COUNT]
    }

    pub fn value(&self, frame: usize, band: usize) -> f32 {
        self.data[frame * BAND_COUNT + band]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Magnitude STFT (periodic Hann window, no centering), 80-band mel
/// filterbank, then `ln(1 + x)`. Frame `k` starts at sample `k * hop`.
pub fn compute_mel_spectrogram(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<MelSpectrogram, FeatureError> {
    cfg.validate()?;
    let (window, hop) = (cfg.window, cfg.hop);
    if audio.samples.len() < window {
        return Err(FeatureError::Format(format!(
            "{} samples is shorter than one {window}-sample window",
            audio.samples.len()
        )));
    }
    let n_frames = (audio.samples.len() - window) / hop + 1;
    let bank = MelFilterbank::from_config(cfg, audio.sample_rate);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let taper = hann(window);
    let mut data = vec![0f32; n_frames * BAND_COUNT];
    data.par_chunks_mut(BAND_COUNT)
        .enumerate()
        .for_each_init(
            || (vec![Complex::new(0.0, 0.0); window], vec![0.0; bank.bins()]),
            |(buf, mags), (k, out)| {
                let frame = &audio.samples[k * hop..k * hop + window];
                for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&taper) {
                    *b = Complex::new(s as f64 * w, 0.0);
                }
                fft.process(buf);
                for (m, c) in mags.iter_mut().zip(buf.iter()) {
                    *m = c.norm();
                }
                bank.apply(mags, out);
            },
        );
    MelSpectrogram::from_frames(data, hop as f64 / audio.sample_rate as f64)
}
