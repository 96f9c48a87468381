use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("WAV error at {path}: {detail}")]
    Wav { path: PathBuf, detail: String },

    #[error("unsupported WAV encoding at {path}: {detail} (PCM16 and float32 only)")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("unsupported sample rate {rate} Hz (this toolkit is fixed at 16000 Hz)")]
    UnsupportedRate { rate: u32 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid argument for {context}: {detail}")]
    InvalidArgument { context: &'static str, detail: String },

    #[error("STFT config mismatch: spectrogram was produced with fft={spec_fft}, frame={spec_frame}, hop={spec_hop}")]
    ConfigMismatch {
        spec_fft: usize,
        spec_frame: usize,
        spec_hop: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("power iteration did not converge after {max_iter} iterations{}", bin.map(|b| format!(" (frequency bin {b})")).unwrap_or_default())]
    NonConvergence { max_iter: usize, bin: Option<usize> },

    #[error("degenerate steering vector at frequency bin {bin} (norm {norm:.3e})")]
    DegenerateSteering { bin: usize, norm: f64 },

    #[error("non-finite beamforming weight at frame {frame}, bin {bin}")]
    NonFiniteWeight { frame: usize, bin: usize },

    #[error("zero reference signal: metric undefined")]
    ZeroReference,

    #[error("silent source (zero energy): cannot set SIR/SNR")]
    SilentSource,

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("model/input mismatch: {0}")]
    ModelMismatch(String),

    #[error("NaN gradient in parameter {0}; aborting epoch")]
    NanGradient(String),

    #[error("training aborted: {0} consecutive NaN losses")]
    NanLoss(usize),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
