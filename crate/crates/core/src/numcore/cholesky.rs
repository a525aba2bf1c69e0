use super::Matrix;
use crate::error::{invalid, Error, Result};

/// Lower-triangular `L` with `L Lᵀ = sigma`.
///
/// Symmetry is checked to a relative tolerance of 1e-12; only the lower
/// triangle is read afterwards.
pub fn cholesky(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return invalid(format!(
            "cholesky needs a square matrix, got {}x{}",
            sigma.rows(),
            sigma.cols()
        ));
    }
    if !sigma.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let n = sigma.rows();
    let scale = sigma.max_abs();
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = sigma[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = sigma[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}
