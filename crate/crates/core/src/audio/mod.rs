//! Audio ingestion: WAV clips, log-mel features, the synthetic tone corpus and
//! on-disk manifests.

mod manifest;
mod mel;
mod synth;

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};

pub use manifest::{load_manifest, write_manifest, ManifestRow, MANIFEST_FILE};
pub use mel::{hz_to_mel, log_mel_spectrogram, mel_filterbank, mel_to_hz, power_spectrum, LogMel, MelConfig, SpectrogramFeature, LOG_FLOOR};
pub use synth::{synth_clip, synth_dataset, synth_dataset_with, SynthProfile, SynthSpec, SYNTH_SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct WavClip {
    pub sample_rate: u32,
    /// Mono samples in `[-1, 1]`.
    pub samples: Vec<f64>,
}

impl WavClip {
    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::config("clip has no samples"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("clip contains a non-finite sample".into()));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("not a RIFF/WAVE file")]
    NotRiffWave,
    #[error("big-endian RIFX files are not supported")]
    BigEndian,
    #[error("unsupported sample format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error("WAV data is truncated")]
    Truncated,
    #[error("WAV contains no samples")]
    Empty,
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            // hound reports a short read as `Other` with this message
            hound::Error::IoError(io)
                if io.kind() == std::io::ErrorKind::UnexpectedEof
                    || io.to_string().contains("read enough bytes") =>
            {
                WavError::Truncated
            }
            hound::Error::IoError(io) => WavError::Io(io),
            hound::Error::FormatError(msg) => WavError::Malformed(msg.to_string()),
            hound::Error::Unsupported => WavError::UnsupportedFormat("codec not supported".into()),
            hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
                WavError::UnsupportedFormat("sample width".into())
            }
            hound::Error::UnfinishedSample => WavError::Truncated,
        }
    }
}

/// Reads 16-bit PCM or 32-bit float WAV, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WavClip> {
    let path = path.as_ref();
    read_wav_inner(path).map_err(|source| Error::Wav { path: path.to_path_buf(), source })
}

fn read_wav_inner(path: &Path) -> std::result::Result<WavClip, WavError> {
    let mut head = [0u8; 4];
    let mut f = File::open(path).map_err(WavError::Io)?;
    match f.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Err(WavError::Truncated),
        Err(e) => return Err(WavError::Io(e)),
    }
    match &head {
        b"RIFF" => {}
        b"RIFX" => return Err(WavError::BigEndian),
        _ => return Err(WavError::NotRiffWave),
    }
    drop(f);

    let reader = hound::WavReader::new(BufReader::new(File::open(path).map_err(WavError::Io)?))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => return Err(WavError::UnsupportedFormat(format!("{fmt:?} {bits}-bit"))),
    };
    if interleaved.len() % channels != 0 {
        return Err(WavError::Truncated);
    }
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if samples.is_empty() {
        return Err(WavError::Empty);
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(WavError::Malformed("non-finite float sample".into()));
    }
    Ok(WavClip { sample_rate: spec.sample_rate, samples })
}

/// Writes a mono 16-bit PCM file. Samples are clamped to `[-1, 1)`.
pub fn write_wav(path: impl AsRef<Path>, clip: &WavClip) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| Error::Wav { path: path.to_path_buf(), source: e.into() };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(q).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}
