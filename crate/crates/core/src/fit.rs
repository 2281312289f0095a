//! Least-squares fits used to extract empirical exponents and rates.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

/// Ordinary least squares `y ≈ a + b x`.
pub fn line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need two points for a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    LineFit { slope, intercept, max_residual }
}

/// Least squares on an arbitrary design matrix (rows = samples), via SVD.
pub fn linear_model(rows: &[Vec<f64>], ys: &[f64]) -> Vec<f64> {
    let m = rows.len();
    let k = rows[0].len();
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-12).expect("SVD solve").iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = line(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
    }

    #[test]
    fn three_term_model() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64 * 0.1).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x.ln(), x]).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 0.3 - 1.5 * x.ln() - 2.0 * x).collect();
        let c = linear_model(&rows, &ys);
        assert!((c[1] + 1.5).abs() < 1e-10 && (c[2] + 2.0).abs() < 1e-10);
    }
}
