//! Spatial operators: construction, resolvents, fractional powers and norms.
//!
//! Every operator is a dense square complex matrix. The one-dimensional
//! finite-difference families use `n` interior points on `(0, length)` with
//! homogeneous Dirichlet conditions, so `h = length / (n + 1)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Factor};
use crate::{CMatrix, CVector, C64};

/// Eigenvector matrices with a larger condition number are treated as
/// defective by [`fractional_power`].
pub const DIAGONALIZABLE_COND_LIMIT: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    label: String,
}

impl Operator {
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(invalid(format!(
                "operator matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !matrix.iter().all(|z| z.is_finite()) {
            return Err(invalid("operator entries must be finite"));
        }
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            matrix: CMatrix::from_element(1, 1, value),
            label: format!("scalar({value})"),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            label: format!("identity({dim})"),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
            label: format!("zeros({dim})"),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        let d = CVector::from_column_slice(entries);
        Self::new(CMatrix::from_diagonal(&d), "diagonal")
    }

    pub fn from_real_diagonal(entries: &[f64]) -> Result<Self> {
        let e: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(&e)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.matrix * x
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * factor),
            label: format!("{factor}*({})", self.label),
        }
    }

    pub fn compose(&self, other: &Operator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            label: format!("({})*({})", self.label, other.label),
        })
    }

    pub fn sum(&self, other: &Operator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            label: format!("({})+({})", self.label, other.label),
        })
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        linalg::is_hermitian(&self.matrix, rel_tol)
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.matrix)
    }

    /// Largest `|arg μ|` over the spectrum; zero eigenvalues are ignored.
    pub fn spectral_angle(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .filter(|z| z.norm() > 0.0)
            .map(|z| z.arg().abs())
            .fold(0.0, f64::max))
    }

    /// Relative distance `‖self − other‖ / max(‖other‖, 1)` in the spectral norm.
    pub fn relative_distance(&self, other: &Operator) -> f64 {
        let diff = &self.matrix - &other.matrix;
        linalg::spectral_norm(&diff) / linalg::spectral_norm(&other.matrix).max(1.0)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Declarative description of an operator, as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Scalar {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    MatrixFile {
        path: PathBuf,
    },
    Laplacian1d {
        n: usize,
        length: f64,
    },
    Bilaplacian1d {
        n: usize,
        length: f64,
    },
    Elliptic1d {
        n: usize,
        length: f64,
        diffusion: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default)]
        potential: f64,
    },
    Power {
        base: Box<OperatorSpec>,
        eps: f64,
    },
    Scaled {
        alpha: f64,
        base: Box<OperatorSpec>,
    },
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            OperatorSpec::Scalar { re, im } => {
                if !re.is_finite() || !im.is_finite() {
                    return Err(invalid("scalar operator must be finite"));
                }
            }
            OperatorSpec::MatrixFile { .. } => {}
            OperatorSpec::Laplacian1d { n, length } | OperatorSpec::Bilaplacian1d { n, length } => {
                grid_params(*n, *length)?;
            }
            OperatorSpec::Elliptic1d {
                n,
                length,
                diffusion,
                drift,
                potential,
            } => {
                grid_params(*n, *length)?;
                if !(*diffusion > 0.0) || !diffusion.is_finite() {
                    return Err(invalid("diffusion coefficient must be positive (ellipticity)"));
                }
                if !drift.is_finite() || !potential.is_finite() {
                    return Err(invalid("drift and potential must be finite"));
                }
            }
            OperatorSpec::Power { base, eps } => {
                check_power(*eps)?;
                base.validate()?;
            }
            OperatorSpec::Scaled { alpha, base } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(invalid("scaling factor α must be positive"));
                }
                base.validate()?;
            }
        }
        Ok(())
    }
}

fn grid_params(n: usize, length: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("number of interior points must be at least 1"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(invalid("interval length must be positive"));
    }
    Ok(length / (n as f64 + 1.0))
}

fn check_power(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("fractional exponent must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

pub fn build_operator(spec: &OperatorSpec) -> Result<Operator> {
    spec.validate()?;
    match spec {
        OperatorSpec::Scalar { re, im } => Ok(Operator::scalar(C64::new(*re, *im))),
        OperatorSpec::MatrixFile { path } => read_matrix_file(path),
        OperatorSpec::Laplacian1d { n, length } => laplacian1d(*n, *length),
        OperatorSpec::Bilaplacian1d { n, length } => {
            let lap = laplacian1d(*n, *length)?;
            Ok(lap
                .compose(&lap)?
                .with_label(format!("bilaplacian1d(n={n}, length={length})")))
        }
        OperatorSpec::Elliptic1d {
            n,
            length,
            diffusion,
            drift,
            potential,
        } => elliptic1d(*n, *length, *diffusion, *drift, *potential),
        OperatorSpec::Power { base, eps } => {
            let b = build_operator(base)?;
            fractional_power(&b, *eps)
        }
        OperatorSpec::Scaled { alpha, base } => {
            let b = build_operator(base)?;
            Ok(b.scaled(C64::new(*alpha, 0.0)))
        }
    }
}

/// `(1/h²)·tridiag(−1, 2, −1)`.
pub fn laplacian1d(n: usize, length: f64) -> Result<Operator> {
    let h = grid_params(n, length)?;
    let d = 1.0 / (h * h);
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(2.0 * d, 0.0);
        if i + 1 < n {
            m[(i, i + 1)] = C64::new(-d, 0.0);
            m[(i + 1, i)] = C64::new(-d, 0.0);
        }
    }
    Operator::new(m, format!("laplacian1d(n={n}, length={length})"))
}

/// `−(a u′)′ + b u′ + c u` with constant coefficients, central differences for
/// the drift term.
pub fn elliptic1d(n: usize, length: f64, diffusion: f64, drift: f64, potential: f64) -> Result<Operator> {
    let h = grid_params(n, length)?;
    let diff = diffusion / (h * h);
    let adv = drift / (2.0 * h);
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(2.0 * diff + potential, 0.0);
        if i + 1 < n {
            m[(i, i + 1)] = C64::new(-diff + adv, 0.0);
            m[(i + 1, i)] = C64::new(-diff - adv, 0.0);
        }
    }
    Operator::new(
        m,
        format!("elliptic1d(n={n}, length={length}, a={diffusion}, b={drift}, c={potential})"),
    )
}

/// `R(λ, M) = (λI − M)⁻¹`.
pub fn resolvent(op: &Operator, lambda: C64) -> Result<Operator> {
    let n = op.dim();
    let shifted = CMatrix::identity(n, n) * lambda - op.matrix();
    let scale = lambda.norm() + linalg::max_abs_entry(op.matrix());
    let inv = Factor::new(shifted, scale)
        .and_then(|f| f.inverse())
        .ok_or(Error::Singular {
            what: "resolvent",
            at: lambda,
        })?;
    Operator::new(inv, format!("R({lambda}, {})", op.label()))
}

/// Principal fractional power `op^ε` via eigendecomposition.
pub fn fractional_power(op: &Operator, eps: f64) -> Result<Operator> {
    check_power(eps)?;
    if eps == 1.0 {
        return Ok(op.clone());
    }
    let eig = linalg::eigen_decomposition(op.matrix())?;
    let scale = eig.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut powered = Vec::with_capacity(eig.values.len());
    for &mu in &eig.values {
        if mu.norm() <= f64::EPSILON * scale {
            powered.push(C64::new(0.0, 0.0));
            continue;
        }
        if mu.re < 0.0 && mu.im.abs() <= 1e-12 * mu.norm() {
            return Err(Error::BranchCut { eigenvalue: mu });
        }
        powered.push(mu.powf(eps));
    }
    let v = &eig.vectors;
    let v_inv = if eig.unitary {
        v.adjoint()
    } else {
        let cond = linalg::condition_number(v);
        if !(cond <= DIAGONALIZABLE_COND_LIMIT) {
            return Err(Error::NonDiagonalizable { cond });
        }
        linalg::inverse(v).ok_or(Error::NonDiagonalizable { cond: f64::INFINITY })?
    };
    let d = CMatrix::from_diagonal(&CVector::from_vec(powered));
    Operator::new(v * d * v_inv, format!("({})^{eps}", op.label()))
}

/// Spectral norm (largest singular value).
pub fn operator_norm(op: &Operator) -> f64 {
    linalg::spectral_norm(op.matrix())
}

fn parse_complex(token: &str) -> Option<C64> {
    let t = token.trim();
    if let Some(body) = t.strip_suffix(['j', 'i']) {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        return match split {
            Some(k) => {
                let re: f64 = body[..k].parse().ok()?;
                let im_str = &body[k..];
                let im: f64 = match im_str {
                    "+" => 1.0,
                    "-" => -1.0,
                    s => s.parse().ok()?,
                };
                Some(C64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    s => s.parse().ok()?,
                };
                Some(C64::new(0.0, im))
            }
        };
    }
    t.parse::<f64>().ok().map(|re| C64::new(re, 0.0))
}

/// Parses the plain-text matrix format: the dimension on the first line, then
/// one row per line with whitespace-separated entries `re`, `re+imj` or `re-imj`.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (first_no, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty matrix file".into(),
    })?;
    let n: usize = first.parse().map_err(|_| Error::Parse {
        line: first_no,
        msg: format!("expected dimension, found {first:?}"),
    })?;
    if n == 0 {
        return Err(Error::Parse {
            line: first_no,
            msg: "dimension must be positive".into(),
        });
    }
    let mut m = CMatrix::zeros(n, n);
    for row in 0..n {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: first_no + row + 1,
            msg: format!("expected {n} rows, found {row}"),
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {n} entries, found {}", tokens.len()),
            });
        }
        for (col, tok) in tokens.iter().enumerate() {
            let z = parse_complex(tok).ok_or(Error::Parse {
                line: line_no,
                msg: format!("cannot parse entry {tok:?}"),
            })?;
            if !z.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite entry {tok:?}"),
                });
            }
            m[(row, col)] = z;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            msg: "trailing content after matrix rows".into(),
        });
    }
    Ok(m)
}

pub fn read_matrix_file(path: &Path) -> Result<Operator> {
    let text = std::fs::read_to_string(path)?;
    Operator::new(parse_matrix(&text)?, format!("matrix_file({})", path.display()))
}

/// Inverse of [`parse_matrix`], with 17 significant digits per component.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for row in m.row_iter() {
        let entries: Vec<String> = row
            .iter()
            .map(|z| {
                if z.im == 0.0 {
                    format!("{:.16e}", z.re)
                } else {
                    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
                    format!("{:.16e}{sign}{:.16e}j", z.re, z.im.abs())
                }
            })
            .collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    out
}
