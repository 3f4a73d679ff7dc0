use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("W = {w} must be smaller than floor(1/b_thres) = {limit}")]
    SlotCapacity { w: usize, limit: usize },

    #[error("inverse error function is undefined at {0} (requires |u| < 1)")]
    ErfInvDomain(f64),

    #[error("circular convolution period {period} is shorter than an input of length {len}")]
    InvalidPeriod { period: usize, len: usize },

    #[error("{what} did not reach its minimum within {cap} iterations")]
    CapExceeded { what: &'static str, cap: usize },

    #[error("lower bound is singular: ln(1 - alpha) + ln W = 0")]
    SingularBound,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}
