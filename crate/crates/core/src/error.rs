use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix has {values} values, expected {frames} x {pdfs}")]
    DimensionMismatch { frames: usize, pdfs: usize, values: usize },
    #[error("posterior matrix must have at least one column")]
    NoColumns,
    #[error("posterior at frame {frame}, pdf {pdf} is {value}, outside [0, 1]")]
    PosteriorOutOfRange { frame: usize, pdf: usize, value: f32 },
    #[error("row {frame} sums to {sum}, expected 1")]
    RowSum { frame: usize, sum: f64 },
    #[error("frame step must be positive, got {0}")]
    FrameStep(f64),
    #[error("invalid language spec `{language}`: {reason}")]
    LanguageSpec { language: String, reason: String },
    #[error("matrix has {got} columns but language `{language}` has {expected} pdfs")]
    ColumnCount { language: String, expected: usize, got: usize },
    #[error("invalid interval ({start}, {end})")]
    Interval { start: f64, end: f64 },
    #[error("step ratio {from} -> {to} is not an integer")]
    StepRatio { from: f64, to: f64 },
    #[error("track length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("frame step mismatch: {0} vs {1}")]
    StepMismatch(f64, f64),
    #[error("no tracks given")]
    NoTracks,
    #[error("segment ends at {end} beyond total duration {total}")]
    SegmentBeyondEnd { end: f64, total: f64 },
    #[error("reference has no {0} frames")]
    SingleClass(&'static str),
    #[error("reference speech duration is zero, DetER is undefined")]
    NoReferenceSpeech,
    #[error("unknown utterance `{0}`")]
    UnknownUtterance(String),
    #[error("language `{0}` missing")]
    MissingLanguage(String),
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: u64, step: u64 },
}
