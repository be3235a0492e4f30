use nalgebra::{DMatrix, DVector};

/// Systems whose column-equilibrated condition estimate exceeds this are
/// treated as collinear.
pub(crate) const MAX_CONDITION: f64 = 1e12;

pub(crate) enum LstsqError {
    Singular { condition: f64 },
}

/// Least squares `min ||A x - b||` through a Householder QR of the
/// column-equilibrated design.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LstsqError> {
    let mut scaled = a.clone();
    let mut scale = DVector::<f64>::zeros(a.ncols());
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(LstsqError::Singular {
                condition: f64::INFINITY,
            });
        }
        col /= norm;
        scale[j] = norm;
    }

    let sv = scaled.clone().singular_values();
    let (max, min) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(LstsqError::Singular { condition });
    }

    let qr = scaled.qr();
    let qtb = qr.q().transpose() * b;
    let z = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(LstsqError::Singular {
            condition: f64::INFINITY,
        })?;
    Ok(z.component_div(&scale))
}

/// Inverse of the lower Cholesky factor of `sigma`, regularized with a
/// growing ridge when `sigma` is numerically singular.
pub(crate) fn inverse_cholesky_factor(sigma: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = sigma.nrows();
    let mean_diag = sigma.trace() / m as f64;
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut s = sigma.clone();
        for i in 0..m {
            s[(i, i)] += ridge;
        }
        if let Some(chol) = s.cholesky() {
            let l = chol.l();
            if let Some(inv) = l.solve_lower_triangular(&DMatrix::identity(m, m)) {
                if inv.iter().all(|v| v.is_finite()) {
                    return Some(inv);
                }
            }
        }
        ridge = if ridge == 0.0 {
            1e-10 * mean_diag.max(f64::MIN_POSITIVE)
        } else {
            ridge * 100.0
        };
    }
    None
}
