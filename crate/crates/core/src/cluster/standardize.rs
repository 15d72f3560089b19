use crate::error::{IcsError, Result};
use crate::matrix::Matrix;
use crate::matstat::check_data;
use crate::scalar::Scalar;
use crate::scatter::median;

/// Normal-consistency factor of the median absolute deviation.
const MAD_SCALE: f64 = 1.4826;

/// Columnwise `(x − location)/scale`: mean and standard deviation, or with
/// `robust` the median and the scaled MAD.
pub fn standardize<T: Scalar>(x: &Matrix<T>, robust: bool) -> Result<Matrix<T>> {
    check_data(x)?;
    let (n, d) = x.shape();
    let mut loc = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let (l, s) = if robust {
            let m = median(&col);
            let dev: Vec<T> = col.iter().map(|&v| (v - m).abs()).collect();
            (m, median(&dev) * T::lit(MAD_SCALE))
        } else {
            let m = col.iter().copied().sum::<T>() / T::from_usize_lossy(n);
            let ss = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
            (m, (ss / T::from_usize_lossy(n - 1)).sqrt())
        };
        if !(s > T::zero()) {
            return Err(IcsError::DegenerateColumn { column: j });
        }
        loc.push(l);
        scale.push(s);
    }
    Ok(Matrix::from_fn(n, d, |i, j| (x[(i, j)] - loc[j]) / scale[j]))
}
