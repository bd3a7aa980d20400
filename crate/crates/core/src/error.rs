use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. `σ ≤ 0`).
    #[error("domain error: {0}")]
    Domain(String),
    /// A value lies outside the image of a transform and cannot be inverted.
    #[error("value {value} is outside the range of {transform}")]
    Range { transform: String, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("image {width}x{height} is smaller than the {window}-pixel SSIM window")]
    Window { width: usize, height: usize, window: usize },
    #[error("image {width}x{height} too small for {scales} MS-SSIM scales (needs side >= {required})")]
    Scale {
        width: usize,
        height: usize,
        scales: usize,
        required: usize,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("thin-plate spline system is singular")]
    SingularSystem,
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error: {0}")]
    Parse(String),
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
