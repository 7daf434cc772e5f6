//! Design-matrix builders mapping nonlinear parameters to `M(P)`.
//!
//! Column order follows the parameter order `(α, β, γ)`: highest polynomial
//! power first, and `(cos, sin, constant)` for the sinusoid.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::gaussian::ensure_finite_vector;
use crate::scalar::Scalar;

/// Which design a model uses.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind<T: Scalar> {
    /// `K = degree + 1` columns `(x^degree, …, x, 1)`.
    Polynomial { degree: usize },
    /// `K = 3` columns `(cos ωx, sin ωx, 1)`.
    Sinusoid { omega: T },
    /// A fixed matrix supplied by the caller.
    Custom(DMatrix<T>),
}

/// A design kind together with its column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec<T: Scalar> {
    pub kind: DesignKind<T>,
    pub column_names: Vec<String>,
}

impl<T: Scalar> DesignSpec<T> {
    pub fn polynomial(degree: usize) -> Self {
        let column_names = (0..=degree)
            .rev()
            .map(|p| match p {
                0 => "1".to_string(),
                1 => "x".to_string(),
                p => format!("x^{p}"),
            })
            .collect();
        Self {
            kind: DesignKind::Polynomial { degree },
            column_names,
        }
    }

    pub fn sinusoid(omega: T) -> Self {
        Self {
            kind: DesignKind::Sinusoid { omega },
            column_names: vec!["cos".into(), "sin".into(), "const".into()],
        }
    }

    pub fn custom(matrix: DMatrix<T>, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "custom design column names",
                expected: matrix.ncols(),
                actual: column_names.len(),
            });
        }
        Ok(Self {
            kind: DesignKind::Custom(matrix),
            column_names,
        })
    }

    pub fn n_params(&self) -> usize {
        match &self.kind {
            DesignKind::Polynomial { degree } => degree + 1,
            DesignKind::Sinusoid { .. } => 3,
            DesignKind::Custom(m) => m.ncols(),
        }
    }

    /// Evaluates the design at the abscissae `x`.
    pub fn build(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        match &self.kind {
            DesignKind::Polynomial { degree } => polynomial_design(x, *degree as i64),
            DesignKind::Sinusoid { omega } => sinusoid_design(x, *omega),
            DesignKind::Custom(m) => {
                if m.nrows() != x.len() {
                    return Err(Error::DimensionMismatch {
                        context: "custom design rows vs x",
                        expected: m.nrows(),
                        actual: x.len(),
                    });
                }
                Ok(m.clone())
            }
        }
    }
}

/// `x^power` for the decimal value `x` prints as, rounded once to the nearest `f64`.
///
/// Data abscissae are usually typed as short decimals, and `2.7 * 2.7` in binary
/// lands one ulp away from `7.29`. Working on the shortest round-trip decimal
/// string keeps the design matrix equal to the powers of the decimals as written.
fn decimal_power(x: f64, power: u32) -> f64 {
    if power == 0 {
        return 1.0;
    }
    if power == 1 || x == 0.0 {
        return x;
    }
    let repr = format!("{}", x.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let digits = format!("{int_part}{frac_part}");
    let mantissa: BigUint = digits.parse().expect("float formats as decimal digits");
    let scale = frac_part.len() as u64 * power as u64;
    let magnitude: f64 = format!("{}e-{}", mantissa.pow(power), scale)
        .parse()
        .expect("decimal power parses as f64");
    if x < 0.0 && power % 2 == 1 {
        -magnitude
    } else {
        magnitude
    }
}

/// Rows `(x_i^degree, …, x_i, 1)`.
pub fn polynomial_design<T: Scalar>(x: &DVector<T>, degree: i64) -> Result<DMatrix<T>> {
    if degree < 0 || degree > u32::MAX as i64 {
        return Err(Error::InvalidDegree(degree));
    }
    ensure_finite_vector(x, "abscissae")?;
    let degree = degree as usize;
    Ok(DMatrix::from_fn(x.len(), degree + 1, |i, j| {
        let power = (degree - j) as u32;
        T::lit(decimal_power(x[i].as_f64(), power))
    }))
}

/// Rows `(cos(ω·x_i), sin(ω·x_i), 1)`.
pub fn sinusoid_design<T: Scalar>(x: &DVector<T>, omega: T) -> Result<DMatrix<T>> {
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(Error::InvalidFrequency(omega.as_f64()));
    }
    ensure_finite_vector(x, "abscissae")?;
    let mut m = DMatrix::zeros(x.len(), 3);
    for (i, xi) in x.iter().enumerate() {
        let (s, c) = (omega * *xi).sin_cos();
        m[(i, 0)] = c;
        m[(i, 1)] = s;
        m[(i, 2)] = T::one();
    }
    Ok(m)
}
