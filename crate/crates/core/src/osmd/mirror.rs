//! The binary-entropy regularizer on `(−1, 1)ⁿ`, its gradient (the link
//! function) and the Bregman divergence it induces.

use crate::error::{Error, Result};

fn check_interior(x: &[f64]) -> Result<()> {
    for (index, &value) in x.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        if value.abs() >= 1.0 {
            return Err(Error::OutsideCube { index, value });
        }
    }
    Ok(())
}

/// `(1+x)ln(1+x) + (1−x)ln(1−x)` for one coordinate.
fn entropy_term(x: f64) -> f64 {
    (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p()
}

/// `F(x) = ½ Σ_i ((1+x_i)ln(1+x_i) + (1−x_i)ln(1−x_i))`.
pub fn regularizer_f(x: &[f64]) -> Result<f64> {
    check_interior(x)?;
    Ok(0.5 * x.iter().map(|&v| entropy_term(v)).sum::<f64>())
}

/// `∇F(x)_i = ½ ln((1+x_i)/(1−x_i)) = atanh(x_i)`.
pub fn link(x: &[f64]) -> Result<Vec<f64>> {
    check_interior(x)?;
    Ok(x.iter().map(|v| v.atanh()).collect())
}

/// Inverse of [`link`]: `tanh(y_i) = (e^{2y_i}−1)/(e^{2y_i}+1)`.
///
/// Saturates to `±1` for large `|y|` without overflowing.
pub fn link_inv(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.tanh()).collect()
}

/// `Δ_F(p, q) = F(p) − F(q) − ∇F(q)'(p − q)`, evaluated in the cancellation-free form
/// `½ Σ ((1+p)ln((1+p)/(1+q)) + (1−p)ln((1−p)/(1−q)))`.
pub fn bregman(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: p.len(),
        });
    }
    check_interior(q)?;
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        if value.abs() > 1.0 {
            return Err(Error::OutsideCube { index, value });
        }
    }
    // 0·ln 0 = 0 lets p sit on the boundary of the cube
    let xlog = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok(0.5
        * p.iter()
            .zip(q)
            .map(|(&pi, &qi)| xlog(1.0 + pi, 1.0 + qi) + xlog(1.0 - pi, 1.0 - qi))
            .sum::<f64>())
}
