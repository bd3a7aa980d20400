//! Sigma-space transforms `φ: (0, ∞) → ℝ` and their inverses.
//!
//! A schedule built from a transform places its noise levels at equal steps
//! of `φ(σ)`. The candidate family covers plain powers and logarithms plus a
//! set of bounded "squash" maps; see [`candidate_set`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{atan, atanh, exp, expm1, log, log1p, pow, sinh, sqrt, tan, tanh};

use crate::error::bail;
use crate::{Error, Result};

/// Lower end of the bracket used by [`TransformSpec::invert_bisect`].
pub const BISECT_LO: f64 = 1e-12;
/// Upper end of the bracket used by [`TransformSpec::invert_bisect`].
pub const BISECT_HI: f64 = 1e6;
/// Margin kept from the supremum of a saturating transform when inverting.
pub const SATURATION_MARGIN: f64 = 1e-12;

/// One member of the transform family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformSpec {
    /// `σ`
    Identity,
    /// `ln σ`
    Log,
    /// `ln(1 + σ)`
    Log1p,
    /// `σ²`
    Square,
    /// `1/σ`
    Recip,
    /// `1/σ²`
    RecipSq,
    /// `asinh σ`
    Arcsinh,
    /// `tanh σ`
    Tanh,
    /// `1/(1 + e^-σ)`
    Sigmoid,
    /// `σ/(σ + c)`, `c > 0`
    SquashC(f64),
    /// `σ^p/(σ^p + 1)`, `p > 0`
    PowerSquash(f64),
    /// `ln(σ² + 1)`
    LogSqPlus1,
    /// `atan σ`
    Arctan,
}

/// The sixteen candidates in ascending order of reported linearity, so the
/// last entry is the reference choice `σ/(σ+0.3)`.
pub fn candidate_set() -> Vec<TransformSpec> {
    use TransformSpec::*;
    alloc::vec![
        Square,
        RecipSq,
        Identity,
        Recip,
        LogSqPlus1,
        Log1p,
        Arcsinh,
        PowerSquash(2.0),
        Sigmoid,
        SquashC(0.9),
        Tanh,
        SquashC(0.7),
        Log,
        SquashC(0.1),
        SquashC(0.5),
        SquashC(0.3),
    ]
}

/// The transform used for schedules and noise embeddings by default.
pub const PHI_STAR: TransformSpec = TransformSpec::SquashC(0.3);

impl TransformSpec {
    /// Checks parameter constraints.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::SquashC(c) if !(c > 0.0 && c.is_finite()) => {
                bail!(Domain, "squash constant must be positive, got {c}")
            }
            Self::PowerSquash(p) if !(p > 0.0 && p.is_finite()) => {
                bail!(Domain, "squash power must be positive, got {p}")
            }
            _ => Ok(()),
        }
    }

    /// `true` unless the transform decreases in `σ` (`1/σ`, `1/σ²`).
    pub fn is_increasing(&self) -> bool {
        !matches!(self, Self::Recip | Self::RecipSq)
    }

    /// Whether the transform is bounded above and rounds to its supremum in
    /// double precision for moderate `σ`.
    fn saturates(&self) -> bool {
        matches!(self, Self::Tanh | Self::Sigmoid)
    }

    /// Open interval `φ((0, ∞))`.
    pub fn image(&self) -> (f64, f64) {
        match *self {
            Self::Log => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Tanh | Self::SquashC(_) | Self::PowerSquash(_) => (0.0, 1.0),
            Self::Sigmoid => (0.5, 1.0),
            Self::Arctan => (0.0, core::f64::consts::FRAC_PI_2),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Evaluates `φ(σ)` without checking the domain.
    #[inline]
    pub(crate) fn eval(&self, s: f64) -> f64 {
        match *self {
            Self::Identity => s,
            Self::Log => log(s),
            Self::Log1p => log1p(s),
            Self::Square => s * s,
            Self::Recip => 1.0 / s,
            Self::RecipSq => 1.0 / (s * s),
            Self::Arcsinh => libm::asinh(s),
            Self::Tanh => tanh(s),
            Self::Sigmoid => 1.0 / (1.0 + exp(-s)),
            Self::SquashC(c) => s / (s + c),
            Self::PowerSquash(p) => {
                let sp = pow(s, p);
                sp / (sp + 1.0)
            }
            Self::LogSqPlus1 => log1p(s * s),
            Self::Arctan => atan(s),
        }
    }

    /// `φ(σ)` for `σ > 0`.
    pub fn apply(&self, sigma: f64) -> Result<f64> {
        self.validate()?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            bail!(Domain, "{self} is defined for finite sigma > 0, got {sigma}");
        }
        Ok(self.eval(sigma))
    }

    fn range_error(&self, value: f64) -> Error {
        Error::Range {
            transform: self.to_string(),
            value,
        }
    }

    /// Checks that `value` can be inverted, pulling values of saturating
    /// transforms that rounded onto the supremum back inside the image.
    fn admissible(&self, value: f64) -> Result<f64> {
        self.validate()?;
        let (lo, hi) = self.image();
        if value.is_nan() {
            return Err(self.range_error(value));
        }
        if self.saturates() && value >= hi - SATURATION_MARGIN && value <= hi {
            return Ok(hi - SATURATION_MARGIN);
        }
        if value > lo && value < hi {
            Ok(value)
        } else {
            Err(self.range_error(value))
        }
    }

    /// `φ⁻¹(value)` in closed form.
    pub fn invert(&self, value: f64) -> Result<f64> {
        let v = self.admissible(value)?;
        let sigma = match *self {
            Self::Identity => v,
            Self::Log => exp(v),
            Self::Log1p => expm1(v),
            Self::Square => sqrt(v),
            Self::Recip => 1.0 / v,
            Self::RecipSq => 1.0 / sqrt(v),
            Self::Arcsinh => sinh(v),
            Self::Tanh => atanh(v),
            Self::Sigmoid => log(v / (1.0 - v)),
            Self::SquashC(c) => c * v / (1.0 - v),
            Self::PowerSquash(p) => pow(v / (1.0 - v), 1.0 / p),
            Self::LogSqPlus1 => sqrt(expm1(v)),
            Self::Arctan => tan(v),
        };
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(self.range_error(value));
        }
        Ok(sigma)
    }

    /// `φ⁻¹(value)` by bisection in `ln σ` over `[1e-12, 1e6]`, to a relative
    /// tolerance of `1e-12`. Independent of the closed forms in [`invert`].
    ///
    /// [`invert`]: TransformSpec::invert
    pub fn invert_bisect(&self, value: f64) -> Result<f64> {
        let v = self.admissible(value)?;
        let inc = self.is_increasing();
        // Orient so that `g` increases in σ.
        let g = |s: f64| if inc { self.eval(s) - v } else { v - self.eval(s) };
        let (mut lo, mut hi) = (BISECT_LO, BISECT_HI);
        let (glo, ghi) = (g(lo), g(hi));
        if glo > 0.0 || ghi < 0.0 {
            return Err(self.range_error(value));
        }
        if glo == 0.0 {
            return Ok(lo);
        }
        if ghi == 0.0 {
            return Ok(hi);
        }
        for _ in 0..256 {
            if hi - lo <= 1e-12 * lo {
                break;
            }
            let mid = sqrt(lo * hi);
            let gm = g(mid);
            if gm == 0.0 {
                return Ok(mid);
            }
            if gm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Human-readable formula.
    pub fn formula(&self) -> String {
        match *self {
            Self::Identity => "σ".into(),
            Self::Log => "log(σ)".into(),
            Self::Log1p => "log1p(σ)".into(),
            Self::Square => "σ²".into(),
            Self::Recip => "1/σ".into(),
            Self::RecipSq => "1/σ²".into(),
            Self::Arcsinh => "arcsinh(σ)".into(),
            Self::Tanh => "tanh(σ)".into(),
            Self::Sigmoid => "sigmoid(σ)".into(),
            Self::SquashC(c) => format!("σ/(σ+{c})"),
            Self::PowerSquash(p) => format!("σ^{p}/(σ^{p}+1)"),
            Self::LogSqPlus1 => "log(σ²+1)".into(),
            Self::Arctan => "arctan(σ)".into(),
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Identity => f.write_str("identity"),
            Self::Log => f.write_str("log"),
            Self::Log1p => f.write_str("log1p"),
            Self::Square => f.write_str("square"),
            Self::Recip => f.write_str("recip"),
            Self::RecipSq => f.write_str("recipsq"),
            Self::Arcsinh => f.write_str("arcsinh"),
            Self::Tanh => f.write_str("tanh"),
            Self::Sigmoid => f.write_str("sigmoid"),
            Self::SquashC(c) => write!(f, "squash:{c}"),
            Self::PowerSquash(p) => write!(f, "powsquash:{p}"),
            Self::LogSqPlus1 => f.write_str("logsq1"),
            Self::Arctan => f.write_str("arctan"),
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let param = |arg: Option<&str>| -> Result<f64> {
            let Some(a) = arg else {
                bail!(Parse, "transform `{name}` needs a parameter, e.g. `{name}:0.3`");
            };
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad parameter `{a}` for `{name}`")))
        };
        let spec = match name {
            "squash" => Self::SquashC(param(arg)?),
            "powsquash" => Self::PowerSquash(param(arg)?),
            _ if arg.is_some() => bail!(Parse, "transform `{name}` takes no parameter"),
            "identity" | "sigma" => Self::Identity,
            "log" => Self::Log,
            "log1p" => Self::Log1p,
            "square" => Self::Square,
            "recip" => Self::Recip,
            "recipsq" => Self::RecipSq,
            "arcsinh" => Self::Arcsinh,
            "tanh" => Self::Tanh,
            "sigmoid" => Self::Sigmoid,
            "logsq1" => Self::LogSqPlus1,
            "arctan" => Self::Arctan,
            other => bail!(Parse, "unknown transform `{other}`"),
        };
        spec.validate().map_err(|e| Error::Parse(format!("{s}: {e}")))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * pow(hi / lo, i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn point_values() {
        assert_eq!(TransformSpec::SquashC(0.3).apply(0.3).unwrap(), 0.5);
        assert_eq!(TransformSpec::Log.apply(1.0).unwrap(), 0.0);
        assert_eq!(TransformSpec::PowerSquash(2.0).apply(1.0).unwrap(), 0.5);
        assert_eq!(TransformSpec::SquashC(0.3).invert(0.5).unwrap(), 0.3);
    }

    #[test]
    fn domain_and_range_errors() {
        assert!(matches!(TransformSpec::Log.apply(0.0), Err(Error::Domain(_))));
        assert!(TransformSpec::Identity.apply(-1.0).is_err());
        assert!(matches!(
            TransformSpec::SquashC(0.3).invert(1.0),
            Err(Error::Range { .. })
        ));
        assert!(TransformSpec::SquashC(0.3).invert(0.0).is_err());
        assert!(TransformSpec::Sigmoid.invert(0.4).is_err());
        assert!(TransformSpec::Arctan.invert(2.0).is_err());
        assert!(TransformSpec::Tanh.invert(1.5).is_err());
        assert!(TransformSpec::SquashC(-1.0).apply(1.0).is_err());
    }

    #[test]
    fn saturated_values_are_pulled_inside() {
        let v = TransformSpec::Tanh.apply(40.0).unwrap();
        assert_eq!(v, 1.0);
        let s = TransformSpec::Tanh.invert(v).unwrap();
        assert!(s.is_finite() && s > 10.0);
        let back = TransformSpec::Tanh.apply(s).unwrap();
        assert!((back - v).abs() <= 1e-10);
    }

    #[test]
    fn candidate_set_has_sixteen_ordered_entries() {
        let set = candidate_set();
        assert_eq!(set.len(), 16);
        assert_eq!(set[0], TransformSpec::Square);
        assert_eq!(*set.last().unwrap(), PHI_STAR);
    }

    #[test]
    fn round_trip_in_value_space() {
        for spec in candidate_set() {
            for s in log_space(1e-3, 100.0, 100) {
                let v = spec.apply(s).unwrap();
                let back = spec.apply(spec.invert(v).unwrap()).unwrap();
                let rel = (back - v).abs() / v.abs().max(f64::MIN_POSITIVE);
                assert!(rel < 1e-10, "{spec} at σ={s}: {back} vs {v}");
            }
        }
    }

    #[test]
    fn round_trip_in_sigma_space() {
        // Saturating maps lose σ information once tanh/sigmoid round to 1.
        for spec in candidate_set() {
            let hi = if spec.saturates() { 8.0 } else { 100.0 };
            for s in log_space(1e-3, hi, 100) {
                let back = spec.invert(spec.apply(s).unwrap()).unwrap();
                let rel = (back - s).abs() / s;
                assert!(rel < 1e-9, "{spec} at σ={s}: {back}");
            }
        }
    }

    #[test]
    fn bisection_agrees_with_closed_form() {
        for spec in candidate_set() {
            let hi = if spec.saturates() { 8.0 } else { 100.0 };
            for s in log_space(1e-3, hi, 40) {
                let v = spec.apply(s).unwrap();
                let a = spec.invert(v).unwrap();
                let b = spec.invert_bisect(v).unwrap();
                assert!((a - b).abs() / a < 1e-9, "{spec} at σ={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn strictly_monotone_over_working_range() {
        let grid = log_space(1e-3, 100.0, 400);
        for spec in candidate_set() {
            let up = spec.is_increasing();
            for w in grid.windows(2) {
                let (a, b) = (spec.apply(w[0]).unwrap(), spec.apply(w[1]).unwrap());
                if spec.saturates() && a == b {
                    // Both rounded to the supremum.
                    assert_eq!(a, spec.image().1);
                    continue;
                }
                assert_eq!(b > a, up, "{spec} between {} and {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn text_encoding() {
        for spec in candidate_set() {
            let text = spec.to_string();
            assert_eq!(text.parse::<TransformSpec>().unwrap(), spec);
        }
        assert_eq!(
            "squash:0.3".parse::<TransformSpec>().unwrap(),
            TransformSpec::SquashC(0.3)
        );
        for bad in ["squash", "squash:x", "squash:-1", "log:2", "cosh", "powsquash:0"] {
            assert!(bad.parse::<TransformSpec>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn parameter_text_round_trip(c in 1e-6f64..1e3, p in 1e-3f64..10.0) {
            for spec in [TransformSpec::SquashC(c), TransformSpec::PowerSquash(p)] {
                prop_assert_eq!(spec.to_string().parse::<TransformSpec>().unwrap(), spec);
            }
        }

        #[test]
        fn squash_inverse_round_trip(c in 0.01f64..5.0, s in 1e-4f64..1e3) {
            let spec = TransformSpec::SquashC(c);
            let back = spec.invert(spec.apply(s).unwrap()).unwrap();
            prop_assert!((back - s).abs() / s < 1e-9);
        }
    }

    #[test]
    fn images_contain_values() {
        for spec in candidate_set() {
            let (lo, hi) = spec.image();
            for s in [1e-3, 0.5, 3.0] {
                let v = spec.apply(s).unwrap();
                assert!(v > lo && v < hi, "{spec}");
            }
        }
    }
}
