//! Right-hand sides `f`, restricted to the closed physical domain `[−l, l]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SourceKind {
    /// `f(x) = exp(−(2k/(5π))² x²)`.
    GaussianNarrow { k: f64 },
    /// User callable with an optional derivative.
    Custom { f: RealFn, df: Option<RealFn> },
}

impl fmt::Debug for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::GaussianNarrow { k } => write!(f, "GaussianNarrow {{ k: {k} }}"),
            SourceKind::Custom { df, .. } => {
                write!(f, "Custom {{ derivative: {} }}", df.is_some())
            }
        }
    }
}

/// A source `f` cut off outside `[−l, l]`.
///
/// At `x = ±l` the restriction takes the mean of the one-sided limits, which
/// is what a nodal sample of the truncated function converges to under
/// refinement when `±l` is a grid node.
#[derive(Clone, Debug)]
pub struct SourceFunction {
    kind: SourceKind,
    half_width: f64,
}

impl SourceFunction {
    pub fn gaussian_narrow(k: f64, l: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::invalid("k", format!("must be positive, got {k}")));
        }
        Self::with_kind(SourceKind::GaussianNarrow { k }, l)
    }

    pub fn custom<F>(f: F, l: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_kind(SourceKind::Custom { f: Arc::new(f), df: None }, l)
    }

    pub fn custom_with_derivative<F, G>(f: F, df: G, l: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_kind(
            SourceKind::Custom {
                f: Arc::new(f),
                df: Some(Arc::new(df)),
            },
            l,
        )
    }

    pub fn zero(l: f64) -> Result<Self> {
        Self::custom_with_derivative(|_| 0.0, |_| 0.0, l)
    }

    fn with_kind(kind: SourceKind, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid("l", format!("must be positive, got {l}")));
        }
        Ok(Self { kind, half_width: l })
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// Half-width `l` of the support.
    pub fn support(&self) -> f64 {
        self.half_width
    }

    /// The untruncated formula.
    pub fn raw(&self, x: f64) -> f64 {
        match &self.kind {
            SourceKind::GaussianNarrow { k } => {
                let a = 2.0 * k / (5.0 * PI);
                (-(a * x) * (a * x)).exp()
            }
            SourceKind::Custom { f, .. } => f(x),
        }
    }

    /// Derivative of the untruncated formula, when known.
    pub fn raw_derivative(&self, x: f64) -> Option<f64> {
        match &self.kind {
            SourceKind::GaussianNarrow { k } => {
                let a = 2.0 * k / (5.0 * PI);
                Some(-2.0 * a * a * x * (-(a * x) * (a * x)).exp())
            }
            SourceKind::Custom { df, .. } => df.as_ref().map(|g| g(x)),
        }
    }

    /// `f(x)` on `(−l, l)`, half of it at `±l`, zero outside.
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a < self.half_width {
            self.raw(x)
        } else if a == self.half_width {
            0.5 * self.raw(x)
        } else {
            0.0
        }
    }

    /// `f'(x)` away from `±l`.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        if x.abs() < self.half_width {
            self.raw_derivative(x)
        } else {
            Some(0.0)
        }
    }

    /// `max |f|` sampled on a fine grid over the support.
    pub fn sup_norm(&self) -> f64 {
        let n = 4096;
        (0..=n)
            .map(|i| self.eval(-self.half_width + 2.0 * self.half_width * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}
