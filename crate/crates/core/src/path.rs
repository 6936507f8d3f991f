//! Space–time fields sampled on a uniform time grid.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::operator::Operator;
use crate::{CVector, C64};

/// `u(t_k) ∈ ℂⁿ` at `t_k = k·T/(N−1)`, `k = 0..N−1`. `values[0]` is the trace `u(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    t_end: f64,
    values: Vec<CVector>,
}

impl SampledPath {
    pub fn new(t_end: f64, values: Vec<CVector>) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(invalid(format!("time horizon must be positive, got {t_end}")));
        }
        if values.len() < 2 {
            return Err(invalid("a sampled path needs at least two grid points"));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(invalid("path values must be non-empty vectors"));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if !v.iter().all(|z| z.is_finite()) {
                return Err(invalid("path values must be finite"));
            }
        }
        Ok(Self { t_end, values })
    }

    /// Samples `f` on the grid.
    pub fn from_fn(t_end: f64, n_points: usize, mut f: impl FnMut(f64) -> CVector) -> Result<Self> {
        if n_points < 2 {
            return Err(invalid("a sampled path needs at least two grid points"));
        }
        let dt = t_end / (n_points as f64 - 1.0);
        let values = (0..n_points).map(|k| f(k as f64 * dt)).collect();
        Self::new(t_end, values)
    }

    /// Scalar path `t ↦ g(t)` in ℂ¹.
    pub fn scalar_fn(t_end: f64, n_points: usize, mut g: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::from_fn(t_end, n_points, |t| CVector::from_element(1, C64::new(g(t), 0.0)))
    }

    /// Separable path `t ↦ g(t)·profile`.
    pub fn separable(t_end: f64, n_points: usize, profile: &CVector, mut g: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::from_fn(t_end, n_points, |t| profile * C64::new(g(t), 0.0))
    }

    pub fn zeros(t_end: f64, n_points: usize, dim: usize) -> Result<Self> {
        Self::from_fn(t_end, n_points, |_| CVector::zeros(dim))
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn step(&self) -> f64 {
        self.t_end / (self.values.len() as f64 - 1.0)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &CVector {
        &self.values[k]
    }

    pub fn into_values(self) -> Vec<CVector> {
        self.values
    }

    pub fn same_grid(&self, other: &SampledPath) -> bool {
        self.len() == other.len() && self.dim() == other.dim() && (self.t_end - other.t_end).abs() <= 1e-14 * self.t_end
    }

    fn check_grid(&self, other: &SampledPath) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if (self.t_end - other.t_end).abs() > 1e-14 * self.t_end {
            return Err(invalid("paths live on different time horizons"));
        }
        Ok(())
    }

    pub fn map(&self, f: impl FnMut(&CVector) -> CVector) -> Result<Self> {
        Self::new(self.t_end, self.values.iter().map(f).collect())
    }

    pub fn map_indexed(&self, mut f: impl FnMut(usize, &CVector) -> CVector) -> Result<Self> {
        Self::new(self.t_end, self.values.iter().enumerate().map(|(k, v)| f(k, v)).collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            t_end: self.t_end,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SampledPath) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            t_end: self.t_end,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &SampledPath) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            t_end: self.t_end,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pointwise `t ↦ M·u(t)`.
    pub fn apply(&self, op: &Operator) -> Result<Self> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.dim(),
            });
        }
        Ok(Self {
            t_end: self.t_end,
            values: self.values.iter().map(|v| op.apply(v)).collect(),
        })
    }

    /// `max_k ‖u(t_k)‖`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_k ‖u(t_k) − v(t_k)‖`.
    pub fn sup_distance(&self, other: &SampledPath) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    /// Component `j` as a scalar path.
    pub fn component(&self, j: usize) -> Result<Self> {
        if j >= self.dim() {
            return Err(invalid(format!("component {j} out of range")));
        }
        Ok(Self {
            t_end: self.t_end,
            values: self.values.iter().map(|v| CVector::from_element(1, v[j])).collect(),
        })
    }
}

/// Second-order first derivative on the grid: central in the interior,
/// three-point one-sided at the endpoints.
pub fn grid_derivative(u: &SampledPath) -> Result<SampledPath> {
    let n = u.len();
    if n < 3 {
        return Err(invalid("grid differentiation needs at least three points"));
    }
    let h = u.step();
    let v = u.values();
    let half = C64::new(0.5 / h, 0.0);
    let mut out = Vec::with_capacity(n);
    out.push((&v[1] * C64::new(4.0, 0.0) - &v[0] * C64::new(3.0, 0.0) - &v[2]) * half);
    for k in 1..n - 1 {
        out.push((&v[k + 1] - &v[k - 1]) * half);
    }
    out.push((&v[n - 1] * C64::new(3.0, 0.0) - &v[n - 2] * C64::new(4.0, 0.0) + &v[n - 3]) * half);
    SampledPath::new(u.t_end(), out)
}

/// Second-order second derivative: central in the interior, four-point
/// one-sided `(2u₀ − 5u₁ + 4u₂ − u₃)/h²` at the endpoints.
pub fn grid_second_derivative(u: &SampledPath) -> Result<SampledPath> {
    let n = u.len();
    if n < 4 {
        return Err(invalid("second differences need at least four points"));
    }
    let h = u.step();
    let v = u.values();
    let inv = C64::new(1.0 / (h * h), 0.0);
    let c = |x: f64| C64::new(x, 0.0);
    let mut out = Vec::with_capacity(n);
    out.push((&v[0] * c(2.0) - &v[1] * c(5.0) + &v[2] * c(4.0) - &v[3]) * inv);
    for k in 1..n - 1 {
        out.push((&v[k + 1] - &v[k] * c(2.0) + &v[k - 1]) * inv);
    }
    out.push((&v[n - 1] * c(2.0) - &v[n - 2] * c(5.0) + &v[n - 3] * c(4.0) - &v[n - 4]) * inv);
    SampledPath::new(u.t_end(), out)
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    t_end: f64,
    n_points: usize,
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for SampledPath {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PathRepr {
            t_end: self.t_end,
            n_points: self.len(),
            dim: self.dim(),
            re: self.values.iter().map(|v| v.iter().map(|z| z.re).collect()).collect(),
            im: self.values.iter().map(|v| v.iter().map(|z| z.im).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SampledPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = PathRepr::deserialize(d)?;
        if repr.re.len() != repr.n_points || repr.im.len() != repr.n_points {
            return Err(D::Error::custom("path arrays disagree with n_points"));
        }
        let values = repr
            .re
            .iter()
            .zip(&repr.im)
            .map(|(re, im)| {
                if re.len() != repr.dim || im.len() != repr.dim {
                    return Err(D::Error::custom("path row disagrees with dim"));
                }
                Ok(CVector::from_iterator(
                    repr.dim,
                    re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)),
                ))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        SampledPath::new(repr.t_end, values).map_err(D::Error::custom)
    }
}
