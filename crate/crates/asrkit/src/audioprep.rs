//! WAV ingestion, 8 kHz -> 16 kHz upsampling, RMS loudness normalization,
//! and deterministic augmentation (volume, pitch, pace, Gaussian noise).

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Manifest, Utterance};
use crate::error::{Error, Result};
use crate::seed;

/// Mono audio, samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Invalid("sample rate must be > 0".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Invalid("audio contains NaN or Inf samples".into()));
        }
        Ok(AudioBuffer {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn rms_dbfs(&self) -> f64 {
        20.0 * self.rms().log10()
    }
}

// ---------------------------------------------------------------- WAV I/O

/// Read a PCM16 little-endian mono WAV file. Samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::UnsupportedWav("not a RIFF/WAVE file".into()));
    }
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::UnsupportedWav("truncated fmt chunk".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format != 1 {
                    return Err(Error::UnsupportedWav(format!("format tag {format}, want PCM (1)")));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedWav(format!("{channels} channels, want mono")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedWav(format!("{bits}-bit samples, want 16")));
                }
                sample_rate = Some(rate);
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos += 8 + size + (size & 1);
    }
    let sample_rate = sample_rate.ok_or_else(|| Error::UnsupportedWav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::UnsupportedWav("missing data chunk".into()))?;
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

/// Write a PCM16 little-endian mono WAV file. Quantization is scale by
/// 32768, round half to even, clamp to the i16 range.
pub fn write_wav(buf: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = buf.samples.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buf.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate_hz * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in &buf.samples {
        let q = (s * 32768.0).round_ties_even().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ------------------------------------------------------------- resampling

fn bessel_i0(x: f64) -> f64 {
    // power series; converges quickly for the beta range used here
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..40 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn kaiser(offset: f64, half_width: f64, beta: f64) -> f64 {
    let r = offset / half_width;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

const KAISER_BETA: f64 = 8.6;
const HALFBAND_TAPS: usize = 127; // 64 taps land on each polyphase branch

/// Upsample an 8 kHz buffer to 16 kHz by zero insertion plus a Kaiser
/// windowed-sinc low-pass at the original Nyquist. Output length is exactly
/// twice the input length.
pub fn resample_2x(buf: &AudioBuffer) -> Result<AudioBuffer> {
    if buf.sample_rate_hz != 8000 {
        return Err(Error::WrongSampleRate {
            expected: 8000,
            got: buf.sample_rate_hz,
        });
    }
    let n = buf.samples.len();
    if n == 0 {
        return AudioBuffer::new(Vec::new(), 16000);
    }

    let center = (HALFBAND_TAPS - 1) / 2;
    let mut h = vec![0.0f64; HALFBAND_TAPS];
    for (j, tap) in h.iter_mut().enumerate() {
        let t = j as f64 - center as f64;
        // cutoff at half the new rate's Nyquist = the original Nyquist
        *tap = sinc(t / 2.0) * kaiser(t, center as f64 + 1.0, KAISER_BETA);
    }
    // normalize each polyphase branch so DC passes at unit gain
    let mut branch_sum = [0.0f64; 2];
    for (j, &tap) in h.iter().enumerate() {
        branch_sum[j % 2] += tap;
    }
    for (j, tap) in h.iter_mut().enumerate() {
        *tap /= branch_sum[j % 2];
    }

    let x = &buf.samples;
    let mut y = vec![0.0f64; 2 * n];
    for (m, out) in y.iter_mut().enumerate() {
        // only filter taps aligned with original samples contribute
        let mut acc = 0.0;
        let base = m as i64 + center as i64;
        let mut j = if base % 2 == 0 { 0usize } else { 1usize };
        while j < HALFBAND_TAPS {
            let idx = base - j as i64;
            debug_assert!(idx % 2 == 0);
            let i = idx / 2;
            if i >= 0 && (i as usize) < n {
                acc += h[j] * x[i as usize];
            }
            j += 2;
        }
        *out = acc;
    }
    AudioBuffer::new(y, 16000)
}

/// Arbitrary-ratio windowed-sinc interpolation: output sample i reads the
/// input at position i*step. Used for the pace and pitch augmentations.
fn sinc_resample(x: &[f64], step: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let out_len = ((x.len() as f64) / step).round().max(1.0) as usize;
    let fc = (1.0 / step).min(1.0); // band-limit when reading faster
    let half_width = 16.0 * step.max(1.0);
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 * step;
        let lo = ((center - half_width).ceil() as i64).max(0);
        let hi = ((center + half_width).floor() as i64).min(x.len() as i64 - 1);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for k in lo..=hi {
            let u = k as f64 - center;
            let w = fc * sinc(fc * u) * kaiser(u, half_width, KAISER_BETA);
            acc += w * x[k as usize];
            wsum += w;
        }
        out.push(if wsum.abs() > 1e-9 { acc / wsum } else { acc });
    }
    out
}

/// Plain overlap-add time stretch to an exact target length. Frequencies are
/// approximately preserved; good enough for the pitch compensation path.
fn ola_stretch(x: &[f64], target_len: usize) -> Vec<f64> {
    if x.len() == target_len || x.is_empty() || target_len == 0 {
        let mut out = x.to_vec();
        out.resize(target_len, 0.0);
        return out;
    }
    let frame = 1024.min(x.len()).max(4);
    if x.len() <= frame || target_len <= frame {
        // too short for framing: nearest-sample remap
        let step = x.len() as f64 / target_len as f64;
        return (0..target_len)
            .map(|i| x[((i as f64 * step) as usize).min(x.len() - 1)])
            .collect();
    }
    let hop_out = frame / 4;
    let n_frames = (target_len - frame) / hop_out + 1;
    let hop_in = if n_frames > 1 {
        (x.len() - frame) as f64 / (n_frames - 1) as f64
    } else {
        0.0
    };
    let window: Vec<f64> = (0..frame)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / frame as f64;
            t.sin() * t.sin()
        })
        .collect();
    let mut acc = vec![0.0f64; target_len];
    let mut norm = vec![0.0f64; target_len];
    for f in 0..n_frames {
        let p_out = f * hop_out;
        let p_in = (f as f64 * hop_in).round() as usize;
        for i in 0..frame {
            if p_out + i < target_len && p_in + i < x.len() {
                acc[p_out + i] += window[i] * x[p_in + i];
                norm[p_out + i] += window[i];
            }
        }
    }
    for (a, w) in acc.iter_mut().zip(&norm) {
        if *w > 1e-6 {
            *a /= *w;
        }
    }
    acc
}

// ----------------------------------------------------------- normalization

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeOutcome {
    pub buffer: AudioBuffer,
    /// Fraction of samples hard-clipped to [-1, 1].
    pub clipped_fraction: f64,
}

pub const DEFAULT_TARGET_RMS_DBFS: f64 = -20.0;

/// Scale the buffer to the target RMS level, hard-clipping to [-1, 1].
pub fn loudness_normalize(buf: &AudioBuffer, target_rms_dbfs: f64) -> Result<NormalizeOutcome> {
    let rms = buf.rms();
    if rms <= 0.0 {
        return Err(Error::SilentInput);
    }
    let gain = 10f64.powf((target_rms_dbfs - 20.0 * rms.log10()) / 20.0);
    let mut clipped = 0usize;
    let samples: Vec<f64> = buf
        .samples
        .iter()
        .map(|&s| {
            let v = s * gain;
            if v.abs() > 1.0 {
                clipped += 1;
                v.clamp(-1.0, 1.0)
            } else {
                v
            }
        })
        .collect();
    Ok(NormalizeOutcome {
        buffer: AudioBuffer::new(samples, buf.sample_rate_hz)?,
        clipped_fraction: clipped as f64 / buf.samples.len() as f64,
    })
}

// ------------------------------------------------------------ augmentation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub gain_db: f64,
    pub snr_db: f64,
    pub pace_factor: f64,
    pub pitch_semitones: f64,
    pub seed: u64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=2.0).contains(&self.pace_factor) {
            return Err(Error::InvalidAugmentSpec(format!(
                "pace_factor {} outside [0.5, 2.0]",
                self.pace_factor
            )));
        }
        if !(0.0..=60.0).contains(&self.snr_db) {
            return Err(Error::InvalidAugmentSpec(format!(
                "snr_db {} outside [0, 60]",
                self.snr_db
            )));
        }
        if !self.gain_db.is_finite() || !self.pitch_semitones.is_finite() {
            return Err(Error::InvalidAugmentSpec("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Apply pace, pitch, gain and seeded Gaussian noise in that order.
///
/// Pace is plain resampling (speed and pitch both change, as naive pace
/// does). Pitch is resampling followed by an overlap-add stretch back to the
/// pre-pitch length, so only the pitch moves.
pub fn augment(buf: &AudioBuffer, spec: &AugmentSpec) -> Result<AudioBuffer> {
    spec.validate()?;
    let mut samples = buf.samples.clone();

    if (spec.pace_factor - 1.0).abs() > 1e-9 {
        samples = sinc_resample(&samples, spec.pace_factor);
    }
    if spec.pitch_semitones.abs() > 1e-9 {
        let ratio = 2f64.powf(spec.pitch_semitones / 12.0);
        let target_len = samples.len();
        let shifted = sinc_resample(&samples, ratio);
        samples = ola_stretch(&shifted, target_len);
    }
    let gain = 10f64.powf(spec.gain_db / 20.0);
    for s in &mut samples {
        *s *= gain;
    }
    if !samples.is_empty() {
        let rms = (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt();
        let sigma = rms * 10f64.powf(-spec.snr_db / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for s in &mut samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += sigma * z;
        }
    }
    AudioBuffer::new(samples, buf.sample_rate_hz)
}

/// Write two augmented copies of every utterance's audio, tripling the
/// manifest. Per-utterance RNG is derived from (spec.seed, utt_id) so the
/// result is independent of processing order.
pub fn augment_manifest(
    m: &Manifest,
    specs: &[AugmentSpec],
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    if specs.len() != 2 {
        return Err(Error::InvalidAugmentSpec(format!(
            "expected exactly 2 augmentation specs, got {}",
            specs.len()
        )));
    }
    for spec in specs {
        spec.validate()?;
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let augmented: Vec<Vec<Utterance>> = m
        .entries()
        .par_iter()
        .map(|u| -> Result<Vec<Utterance>> {
            let audio = u
                .audio
                .as_ref()
                .ok_or_else(|| Error::MissingAudio(u.utt_id.clone()))?;
            let buf = read_wav(audio).map_err(|_| Error::MissingAudio(u.utt_id.clone()))?;
            let mut out = Vec::with_capacity(2);
            for (k, spec) in specs.iter().enumerate() {
                let mut per_utt = spec.clone();
                per_utt.seed = seed::derive(spec.seed, &u.utt_id);
                let aug = augment(&buf, &per_utt)?;
                let utt_id = format!("{}__aug{}", u.utt_id, k + 1);
                let path: PathBuf = out_dir.join(format!("{utt_id}.wav"));
                write_wav(&aug, &path)?;
                out.push(Utterance {
                    utt_id,
                    audio: Some(path.to_string_lossy().into_owned()),
                    text: u.text.clone(),
                    language: u.language.clone(),
                    duration_s: Some(aug.duration_s()),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries: Vec<Utterance> = m.entries().to_vec();
    entries.extend(augmented.into_iter().flatten());
    Manifest::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, rate: u32, seconds: f64, amp: f64) -> AudioBuffer {
        let n = (rate as f64 * seconds) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    /// Magnitude spectrum peak (Hz) over the interior of the buffer.
    fn dominant_freq(buf: &AudioBuffer) -> f64 {
        let trim = 256.min(buf.len() / 8);
        let x = &buf.samples[trim..buf.len() - trim];
        let n = x.len();
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut spec: Vec<rustfft::num_complex::Complex<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                rustfft::num_complex::Complex::new(s * w, 0.0)
            })
            .collect();
        fft.process(&mut spec);
        let half = n / 2;
        let peak = (1..half).max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm())).unwrap();
        peak as f64 * buf.sample_rate_hz as f64 / n as f64
    }

    #[test]
    fn wav_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        let buf = sine(440.0, 8000, 0.5, 0.8);
        write_wav(&buf, &p).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.sample_rate_hz, 8000);
        assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn one_second_of_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_wav(&AudioBuffer::new(vec![0.0; 8000], 8000).unwrap(), &p).unwrap();
        let buf = read_wav(&p).unwrap();
        assert_eq!(buf.len(), 8000);
        assert!(buf.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        // minimal stereo header
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&40u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes()); // stereo
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&32000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_wav(&p), Err(Error::UnsupportedWav(_))));
    }

    #[test]
    fn resample_doubles_length_and_keeps_tone() {
        let buf = sine(440.0, 8000, 1.0, 1.0);
        let up = resample_2x(&buf).unwrap();
        assert_eq!(up.len(), 2 * buf.len());
        assert_eq!(up.sample_rate_hz, 16000);
        let f = dominant_freq(&up);
        assert!((f - 440.0).abs() <= 1.0, "peak at {f} Hz");
    }

    #[test]
    fn resample_preserves_dc() {
        let buf = AudioBuffer::new(vec![0.5; 4000], 8000).unwrap();
        let up = resample_2x(&buf).unwrap();
        // steady state away from the edges
        for &s in &up.samples[200..up.len() - 200] {
            assert!((s - 0.5).abs() < 1e-6, "dc drifted to {s}");
        }
    }

    #[test]
    fn resample_empty_and_wrong_rate() {
        let empty = AudioBuffer::new(vec![], 8000).unwrap();
        assert!(resample_2x(&empty).unwrap().is_empty());
        let wrong = AudioBuffer::new(vec![0.0; 10], 16000).unwrap();
        assert!(matches!(
            resample_2x(&wrong),
            Err(Error::WrongSampleRate { .. })
        ));
    }

    #[test]
    fn resample_is_linear() {
        let buf = sine(700.0, 8000, 0.2, 0.3);
        let scaled = AudioBuffer::new(buf.samples.iter().map(|s| s * 2.5).collect(), 8000).unwrap();
        let a = resample_2x(&buf).unwrap();
        let b = resample_2x(&scaled).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let expect = x * 2.5;
            let rel = if expect.abs() > 1e-12 {
                ((y - expect) / expect).abs()
            } else {
                (y - expect).abs()
            };
            assert!(rel < 1e-9);
        }
    }

    #[test]
    fn passband_amplitude_within_tenth_db() {
        for freq in [440.0, 1000.0, 3000.0, 3400.0] {
            let buf = sine(freq, 8000, 1.0, 0.5);
            let up = resample_2x(&buf).unwrap();
            let trim = 200;
            let rms_in = (buf.samples[trim..buf.len() - trim]
                .iter()
                .map(|s| s * s)
                .sum::<f64>()
                / (buf.len() - 2 * trim) as f64)
                .sqrt();
            let rms_out = (up.samples[2 * trim..up.len() - 2 * trim]
                .iter()
                .map(|s| s * s)
                .sum::<f64>()
                / (up.len() - 4 * trim) as f64)
                .sqrt();
            let db = 20.0 * (rms_out / rms_in).log10();
            assert!(db.abs() < 0.1, "{freq} Hz passband error {db} dB");
        }
    }

    #[test]
    fn normalize_hits_target_rms() {
        let buf = sine(440.0, 8000, 1.0, 0.0447); // about -30 dBFS RMS
        let out = loudness_normalize(&buf, -20.0).unwrap();
        assert!((out.buffer.rms_dbfs() - (-20.0)).abs() < 0.1);
        assert_eq!(out.clipped_fraction, 0.0);
        // already at target -> near identity
        let again = loudness_normalize(&out.buffer, -20.0).unwrap();
        assert!((again.buffer.rms_dbfs() - out.buffer.rms_dbfs()).abs() < 0.01);
    }

    #[test]
    fn normalize_silent_is_error() {
        let buf = AudioBuffer::new(vec![0.0; 100], 8000).unwrap();
        assert!(matches!(
            loudness_normalize(&buf, -20.0),
            Err(Error::SilentInput)
        ));
    }

    fn identity_spec(seed: u64) -> AugmentSpec {
        AugmentSpec {
            gain_db: 0.0,
            snr_db: 60.0,
            pace_factor: 1.0,
            pitch_semitones: 0.0,
            seed,
        }
    }

    #[test]
    fn gain_doubles_amplitude() {
        let buf = sine(440.0, 16000, 1.0, 0.25);
        let spec = AugmentSpec {
            gain_db: 6.02,
            ..identity_spec(1)
        };
        let out = augment(&buf, &spec).unwrap();
        let amp = out.rms() * std::f64::consts::SQRT_2;
        assert!((amp - 0.5).abs() < 1e-3, "amplitude {amp}");
    }

    #[test]
    fn identity_spec_is_near_identity() {
        let buf = sine(300.0, 16000, 0.5, 0.4);
        let out = augment(&buf, &identity_spec(7)).unwrap();
        assert_eq!(out.len(), buf.len());
        for (a, b) in buf.samples.iter().zip(&out.samples) {
            assert!((a - b).abs() <= 1e-2);
        }
    }

    #[test]
    fn pace_halves_length() {
        let buf = sine(440.0, 16000, 1.0, 0.5);
        let spec = AugmentSpec {
            pace_factor: 2.0,
            ..identity_spec(3)
        };
        let out = augment(&buf, &spec).unwrap();
        assert!((out.len() as i64 - 8000).abs() <= 1, "len {}", out.len());
    }

    #[test]
    fn pitch_shifts_tone_and_keeps_length() {
        let buf = sine(440.0, 16000, 1.0, 0.5);
        let spec = AugmentSpec {
            pitch_semitones: 12.0,
            ..identity_spec(5)
        };
        let out = augment(&buf, &spec).unwrap();
        let len_err = (out.len() as f64 - buf.len() as f64).abs() / buf.len() as f64;
        assert!(len_err <= 0.01, "length error {len_err}");
        let f = dominant_freq(&out);
        assert!((f - 880.0).abs() / 880.0 <= 0.02, "peak at {f} Hz");
    }

    #[test]
    fn noise_snr_within_half_db() {
        let buf = sine(440.0, 16000, 1.0, 0.5);
        let spec = AugmentSpec {
            snr_db: 20.0,
            ..identity_spec(11)
        };
        let out = augment(&buf, &spec).unwrap();
        let noise: Vec<f64> = out
            .samples
            .iter()
            .zip(&buf.samples)
            .map(|(y, x)| y - x)
            .collect();
        let noise_rms =
            (noise.iter().map(|s| s * s).sum::<f64>() / noise.len() as f64).sqrt();
        let snr = 20.0 * (buf.rms() / noise_rms).log10();
        assert!((snr - 20.0).abs() < 0.5, "measured snr {snr}");
    }

    #[test]
    fn augment_is_deterministic() {
        let buf = sine(250.0, 16000, 0.3, 0.4);
        let spec = AugmentSpec {
            gain_db: 2.0,
            snr_db: 25.0,
            pace_factor: 1.1,
            pitch_semitones: -2.0,
            seed: 99,
        };
        assert_eq!(augment(&buf, &spec).unwrap(), augment(&buf, &spec).unwrap());
    }

    #[test]
    fn invalid_spec_rejected() {
        let buf = sine(440.0, 16000, 0.1, 0.5);
        let bad_pace = AugmentSpec {
            pace_factor: 3.0,
            ..identity_spec(1)
        };
        assert!(augment(&buf, &bad_pace).is_err());
        let bad_snr = AugmentSpec {
            snr_db: -5.0,
            ..identity_spec(1)
        };
        assert!(augment(&buf, &bad_snr).is_err());
    }
}
