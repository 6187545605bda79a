//! Least squares with heteroskedasticity-robust errors, Puffer
//! preconditioning, LASSO paths by coordinate descent, post-selection OLS and
//! the synthetic experiment pipeline.

mod rct;

pub use rct::*;

use nalgebra::{DMatrix, DVector, SVD};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::util::log_grid_descending;

pub const LASSO_TOL: f64 = 1e-9;
pub const LASSO_MAX_SWEEPS: usize = 100_000;

/// Named regressor columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    data: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidParameter("one name per column required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidParameter(format!("duplicate column `{dup}`")));
        }
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidParameter("columns differ in length".into()));
        }
        let data = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
        Ok(DesignMatrix { names, data })
    }

    pub fn from_matrix(names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        let cols: Vec<Vec<f64>> = data.column_iter().map(|c| c.iter().copied().collect()).collect();
        Self::new(names, cols)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.data.column(j).iter().copied().collect())
    }

    /// A leading column of ones named `intercept`.
    pub fn with_intercept(&self) -> Result<Self> {
        if self.names.iter().any(|n| n == "intercept") {
            return Err(Error::InvalidParameter("design already has an intercept".into()));
        }
        let mut names = vec!["intercept".to_owned()];
        names.extend(self.names.iter().cloned());
        Ok(DesignMatrix {
            names,
            data: self.data.clone().insert_column(0, 1.0),
        })
    }

    /// Columns side by side.
    pub fn hstack(&self, other: &DesignMatrix) -> Result<Self> {
        if self.rows() != other.rows() {
            return Err(Error::InvalidParameter("row counts differ".into()));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut columns: Vec<Vec<f64>> = self.data.column_iter().map(|c| c.iter().copied().collect()).collect();
        columns.extend(other.data.column_iter().map(|c| c.iter().copied().collect()));
        Self::new(names, columns)
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| Error::InvalidParameter(format!("no column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names.iter().map(|n| n.to_string()).collect(), columns)
    }

    /// Centers every column and scales it to unit population variance.
    /// Returns the standardized design with the original means and standard
    /// deviations.
    pub fn standardized(&self) -> Result<(Self, Vec<f64>, Vec<f64>)> {
        let n = self.rows() as f64;
        let mut data = self.data.clone();
        let (mut means, mut sds) = (Vec::new(), Vec::new());
        for (j, mut col) in data.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            if !(sd > 0.0) {
                return Err(Error::Precondition(format!(
                    "column `{}` is constant and cannot be standardized",
                    self.names[j]
                )));
            }
            col.iter_mut().for_each(|x| *x = (*x - mean) / sd);
            means.push(mean);
            sds.push(sd);
        }
        Ok((
            DesignMatrix {
                names: self.names.clone(),
                data,
            },
            means,
            sds,
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// HC1 heteroskedasticity-robust standard errors.
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Centered; zero when the outcome is constant.
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.p_values[j])
    }
}

struct ThinSvd {
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
}

fn full_rank_svd(x: &DMatrix<f64>) -> Result<ThinSvd> {
    let (m, k) = x.shape();
    if k == 0 {
        return Err(Error::InvalidParameter("design has no columns".into()));
    }
    let svd = SVD::new(x.clone(), true, true);
    let top = svd.singular_values.max();
    let tol = m.max(k) as f64 * f64::EPSILON * top;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    Ok(ThinSvd {
        u: svd.u.expect("requested"),
        singular: svd.singular_values,
        v_t: svd.v_t.expect("requested"),
    })
}

fn check_rows(y: &[f64], x: &DesignMatrix) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::InvalidParameter(format!(
            "{} outcomes for {} design rows",
            y.len(),
            x.rows()
        )));
    }
    Ok(())
}

/// Least squares with HC1 robust standard errors and two-sided t-test
/// p-values on `n - k` degrees of freedom.
pub fn ols(y: &[f64], x: &DesignMatrix) -> Result<OlsFit> {
    check_rows(y, x)?;
    let (n, k) = (x.rows(), x.cols());
    if n <= k {
        return Err(Error::Precondition(format!(
            "{n} observations do not exceed {k} regressors"
        )));
    }
    let svd = full_rank_svd(x.matrix())?;
    let yv = DVector::from_column_slice(y);
    let inv_s = svd.singular.map(|s| 1.0 / s);
    let beta = svd.v_t.transpose() * DVector::from_fn(k, |j, _| inv_s[j] * svd.u.column(j).dot(&yv));
    let resid = &yv - x.matrix() * &beta;
    // (X'X)^-1 = V S^-2 V'
    let v_scaled = svd.v_t.transpose() * DMatrix::from_diagonal(&inv_s.map(|s| s * s));
    let xtx_inv = &v_scaled * &svd.v_t;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let row = x.matrix().row(i).transpose();
        meat += (&row * row.transpose()) * resid[i].powi(2);
    }
    let cov = &xtx_inv * meat * &xtx_inv * (n as f64 / (n - k) as f64);
    let df = (n - k) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let std_errors: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let p_values = (0..k)
        .map(|j| {
            let (b, se) = (beta[j], std_errors[j]);
            if se > 0.0 {
                2.0 * (1.0 - t_dist.cdf((b / se).abs()))
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mean = yv.mean();
    let sst: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = resid.iter().map(|r| r * r).sum();
    Ok(OlsFit {
        names: x.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        p_values,
        r_squared: if sst > 0.0 { (1.0 - ssr / sst).max(0.0) } else { 0.0 },
        residuals: resid.iter().copied().collect(),
    })
}

/// Preconditions `(X, y)` with `F = U D^-1 U'` from the thin SVD `X = U D V'`,
/// so that `FX = U V'` has orthonormal columns.
pub fn puffer_transform(x: &DesignMatrix, y: &[f64]) -> Result<(DesignMatrix, Vec<f64>)> {
    check_rows(y, x)?;
    if x.rows() < x.cols() {
        return Err(Error::Precondition(
            "preconditioning needs at least as many rows as columns".into(),
        ));
    }
    let svd = full_rank_svd(x.matrix())?;
    let fx = &svd.u * &svd.v_t;
    let uty = svd.u.transpose() * DVector::from_column_slice(y);
    let fy = &svd.u * DVector::from_fn(uty.len(), |j, _| uty[j] / svd.singular[j]);
    Ok((
        DesignMatrix::from_matrix(x.names().to_vec(), fx)?,
        fy.iter().copied().collect(),
    ))
}

/// `sign(z) max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Solutions of `(1/2n)|y - Xb|^2 + lambda |b|_1` along a penalty grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoPath {
    pub names: Vec<String>,
    pub penalties: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    /// Indices of nonzero coefficients at each penalty.
    pub active: Vec<Vec<usize>>,
    pub converged: Vec<bool>,
}

impl LassoPath {
    /// The variable that enters first as the penalty decreases, i.e. the last
    /// to leave as it grows. Simultaneous entries are broken by coefficient
    /// magnitude.
    pub fn last_survivor(&self) -> Option<usize> {
        let k = self.active.iter().position(|a| !a.is_empty())?;
        self.active[k]
            .iter()
            .copied()
            .max_by(|&a, &b| self.coefficients[k][a].abs().total_cmp(&self.coefficients[k][b].abs()))
    }

    /// Largest penalty at which each variable is active.
    pub fn entry_penalties(&self) -> Vec<Option<f64>> {
        (0..self.names.len())
            .map(|j| {
                self.active
                    .iter()
                    .position(|a| a.contains(&j))
                    .map(|k| self.penalties[k])
            })
            .collect()
    }

    /// Long-format table `penalty,variable,coefficient`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("penalty,variable,coefficient\n");
        for (k, lambda) in self.penalties.iter().enumerate() {
            for (j, name) in self.names.iter().enumerate() {
                out.push_str(&format!("{lambda:e},{name},{:e}\n", self.coefficients[k][j]));
            }
        }
        out
    }
}

/// `max_j |X_j' y| / n`, the smallest penalty at which every coefficient is 0.
pub fn lambda_max(x: &DesignMatrix, y: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let yv = DVector::from_column_slice(y);
    x.matrix()
        .column_iter()
        .map(|c| c.dot(&yv).abs() / n)
        .fold(0.0, f64::max)
}

/// 100 log-spaced penalties from `lambda_max` down to `1e-3 lambda_max`.
pub fn default_penalty_grid(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
    let top = lambda_max(x, y);
    if top == 0.0 {
        return vec![0.0];
    }
    log_grid_descending(top, top * 1e-3, 100)
}

/// Objective `(1/2n)|y - Xb|^2 + lambda |b|_1`.
pub fn lasso_objective(x: &DesignMatrix, y: &[f64], b: &[f64], lambda: f64) -> f64 {
    let n = x.rows() as f64;
    let fit = x.matrix() * DVector::from_column_slice(b);
    let rss: f64 = y.iter().zip(fit.iter()).map(|(a, f)| (a - f).powi(2)).sum();
    rss / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent from `b`, updating it in place. Returns whether
/// the largest scaled coefficient change fell below the tolerance.
fn coordinate_descent(
    cols: &[Vec<f64>],
    norms: &[f64],
    resid: &mut [f64],
    b: &mut [f64],
    lambda: f64,
    n: f64,
) -> bool {
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for (j, col) in cols.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let rho: f64 = col.iter().zip(resid.iter()).map(|(x, r)| x * r).sum::<f64>() / n + norms[j] * b[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                b[j] = new;
                max_change = max_change.max(delta.abs() * norms[j].sqrt());
            }
        }
        if max_change < LASSO_TOL {
            return true;
        }
    }
    false
}

/// Coordinate-descent LASSO along a descending penalty grid with warm starts.
/// No intercept is fitted.
pub fn lasso_path(x: &DesignMatrix, y: &[f64], penalties: &[f64]) -> Result<LassoPath> {
    check_rows(y, x)?;
    if penalties.is_empty() || penalties.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParameter("penalties must be nonnegative".into()));
    }
    if penalties.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("penalty grid must be descending".into()));
    }
    let n = x.rows() as f64;
    let cols: Vec<Vec<f64>> = x.matrix().column_iter().map(|c| c.iter().copied().collect()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut b = vec![0.0; x.cols()];
    let mut resid = y.to_vec();
    let mut path = LassoPath {
        names: x.names().to_vec(),
        penalties: penalties.to_vec(),
        coefficients: Vec::new(),
        active: Vec::new(),
        converged: Vec::new(),
    };
    for &lambda in penalties {
        let ok = coordinate_descent(&cols, &norms, &mut resid, &mut b, lambda, n);
        if !ok {
            log::warn!("coordinate descent did not converge at penalty {lambda:e}");
        }
        path.converged.push(ok);
        path.active.push((0..b.len()).filter(|&j| b[j] != 0.0).collect());
        path.coefficients.push(b.clone());
    }
    Ok(path)
}

/// Residuals of every column of `x` and of `y` after projecting out `controls`.
pub fn partial_out(x: &DesignMatrix, y: &[f64], controls: &DesignMatrix) -> Result<(DesignMatrix, Vec<f64>)> {
    check_rows(y, x)?;
    check_rows(y, controls)?;
    let svd = full_rank_svd(controls.matrix())?;
    let project = |v: DVector<f64>| -> DVector<f64> {
        let coef = svd.u.transpose() * &v;
        &v - &svd.u * coef
    };
    let xr = DMatrix::from_columns(
        &x.matrix()
            .column_iter()
            .map(|c| project(c.into_owned()))
            .collect::<Vec<_>>(),
    );
    let yr = project(DVector::from_column_slice(y));
    Ok((DesignMatrix::from_matrix(x.names().to_vec(), xr)?, yr.iter().copied().collect()))
}

/// LASSO on the layer columns with the controls left unpenalized.
///
/// Controls (which should include an intercept) are projected out of the
/// layer columns and the outcome. With `precondition`, the residualized
/// problem is Puffer-transformed and rescaled by `sqrt(n)` so that
/// `X'X / n = I`. The grid defaults to [`default_penalty_grid`].
pub fn lasso_with_controls(
    layers: &DesignMatrix,
    controls: &DesignMatrix,
    y: &[f64],
    precondition: bool,
    penalties: Option<&[f64]>,
) -> Result<LassoPath> {
    let (xr, yr) = partial_out(layers, y, controls)?;
    let (x, yv) = if precondition {
        let (fx, fy) = puffer_transform(&xr, &yr)?;
        let scale = (fx.rows() as f64).sqrt();
        (
            DesignMatrix::from_matrix(fx.names().to_vec(), fx.matrix() * scale)?,
            fy.iter().map(|v| v * scale).collect::<Vec<f64>>(),
        )
    } else {
        (xr, yr)
    };
    let grid = match penalties {
        Some(p) => p.to_vec(),
        None => default_penalty_grid(&x, &yv),
    };
    lasso_path(&x, &yv, &grid)
}

/// OLS of `y` on the controls and the selected layer columns.
pub fn post_lasso_ols(layers: &DesignMatrix, controls: &DesignMatrix, y: &[f64], active: &[usize]) -> Result<OlsFit> {
    if active.is_empty() {
        return Err(Error::Precondition("no layer was selected".into()));
    }
    let names: Vec<&str> = active
        .iter()
        .map(|&j| {
            layers
                .names()
                .get(j)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidParameter(format!("no layer column {j}")))
        })
        .collect::<Result<_>>()?;
    ols(y, &controls.hstack(&layers.select(&names)?)?)
}

/// OLS of `y` on an intercept, `dc`, the high-multiplexing flag, their
/// product and the controls.
pub fn interaction_regression(y: &[f64], dc: &[f64], high_mpx: &[bool], controls: &DesignMatrix) -> Result<OlsFit> {
    if dc.len() != y.len() || high_mpx.len() != y.len() {
        return Err(Error::InvalidParameter("vectors are not aligned".into()));
    }
    if high_mpx.iter().all(|&h| h) || high_mpx.iter().all(|&h| !h) {
        return Err(Error::Precondition(
            "every village has the same multiplexing flag; the interaction is not identified".into(),
        ));
    }
    let flag: Vec<f64> = high_mpx.iter().map(|&h| h as u8 as f64).collect();
    let base = DesignMatrix::new(
        vec!["intercept".into(), "dc".into(), "high_mpx".into(), "dc_x_high_mpx".into()],
        vec![
            vec![1.0; y.len()],
            dc.to_vec(),
            flag.clone(),
            dc.iter().zip(&flag).map(|(d, f)| d * f).collect(),
        ],
    )?;
    ols(y, &base.hstack(controls)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn design(cols: Vec<Vec<f64>>) -> DesignMatrix {
        let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
        DesignMatrix::new(names, cols).unwrap()
    }

    fn random_design(rows: usize, cols: usize, seed: u64) -> DesignMatrix {
        let mut rng = crate::util::stream(seed, &[]);
        design((0..cols).map(|_| (0..rows).map(|_| rng.random::<f64>() - 0.5).collect()).collect())
    }

    #[test]
    fn ols_examples() {
        let x = design(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let fit = ols(&[2.0, 4.0, 6.0, 8.0], &x).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);

        let ones = design(vec![vec![1.0; 4]]);
        let fit = ols(&[1.0, 2.0, 4.0, 9.0], &ones).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 4.0, epsilon = 1e-12);

        let x = design(vec![vec![1.0; 3], vec![0.0, 1.0, 2.0]]);
        let fit = ols(&[1.0, 2.0, 2.0], &x).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 7.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ols_residuals_are_orthogonal() {
        let x = random_design(40, 4, 3).with_intercept().unwrap();
        let mut rng = crate::util::stream(4, &[]);
        let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let fit = ols(&y, &x).unwrap();
        for c in x.matrix().column_iter() {
            let dot: f64 = c.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8);
        }
        assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn hc1_matches_hand_computation() {
        let x = design(vec![vec![1.0; 4], vec![0.0, 1.0, 2.0, 3.0]]);
        let y = [0.0, 2.0, 1.0, 4.0];
        let fit = ols(&y, &x).unwrap();
        // Slope 1.1, intercept 0.1; residuals -0.1, 0.8, -1.3, 0.6.
        let e = [-0.1f64, 0.8, -1.3, 0.6];
        let xs = [0.0, 1.0, 2.0, 3.0];
        let sxx: f64 = xs.iter().map(|v| (v - 1.5f64).powi(2)).sum();
        let meat: f64 = xs.iter().zip(&e).map(|(v, r)| (v - 1.5f64).powi(2) * r * r).sum();
        let se_slope = (meat / (sxx * sxx) * 4.0 / 2.0).sqrt();
        assert_abs_diff_eq!(fit.coefficients[1], 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.std_errors[1], se_slope, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = design(vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]]);
        assert!(matches!(ols(&[1.0, 2.0, 3.0, 4.0], &x), Err(Error::RankDeficient { rank: 1, cols: 2 })));
    }

    #[test]
    fn constant_outcome_gives_zero_slopes() {
        let x = random_design(20, 2, 9).with_intercept().unwrap();
        let fit = ols(&[3.0; 20], &x).unwrap();
        assert_abs_diff_eq!(fit.coefficients[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[2], 0.0, epsilon = 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn puffer_orthonormalizes() {
        let x = random_design(68, 9, 1);
        let y: Vec<f64> = (0..68).map(|i| i as f64).collect();
        let (fx, _) = puffer_transform(&x, &y).unwrap();
        let gram = fx.matrix().transpose() * fx.matrix();
        let err = (gram - DMatrix::<f64>::identity(9, 9)).abs().max();
        assert!(err < 1e-8);
        let (again, _) = puffer_transform(&fx, &y).unwrap();
        assert!((again.matrix() - fx.matrix()).abs().max() < 1e-10);
    }

    #[test]
    fn lasso_examples() {
        let x = random_design(50, 4, 2);
        let mut rng = crate::util::stream(5, &[]);
        let y: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let path = lasso_path(&x, &y, &[lambda_max(&x, &y), 0.0]).unwrap();
        assert!(path.coefficients[0].iter().all(|&b| b == 0.0));
        let fit = ols(&y, &x).unwrap();
        for (a, b) in path.coefficients[1].iter().zip(&fit.coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert!(path.converged.iter().all(|&c| c));
        assert!(lasso_path(&x, &y, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn orthonormal_lasso_is_soft_thresholding() {
        let x = random_design(68, 5, 8);
        let mut rng = crate::util::stream(6, &[]);
        let y: Vec<f64> = (0..68).map(|_| rng.random::<f64>() * 3.0).collect();
        let (fx, fy) = puffer_transform(&x, &y).unwrap();
        let s = 68f64.sqrt();
        let fx = DesignMatrix::from_matrix(fx.names().to_vec(), fx.matrix() * s).unwrap();
        let fy: Vec<f64> = fy.iter().map(|v| v * s).collect();
        let grid = default_penalty_grid(&fx, &fy);
        let path = lasso_path(&fx, &fy, &grid).unwrap();
        let yv = DVector::from_column_slice(&fy);
        for (k, &lambda) in grid.iter().enumerate() {
            for j in 0..5 {
                let z = fx.matrix().column(j).dot(&yv) / 68.0;
                assert_abs_diff_eq!(path.coefficients[k][j], soft_threshold(z, lambda), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn objective_decreases_along_sweeps() {
        let x = random_design(30, 3, 11);
        let y: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let n = 30.0;
        let cols: Vec<Vec<f64>> = x.matrix().column_iter().map(|c| c.iter().copied().collect()).collect();
        let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
        let lambda = 0.05;
        let mut b = vec![0.0; 3];
        let mut resid = y.clone();
        let mut prev = lasso_objective(&x, &y, &b, lambda);
        for j in (0..3).cycle().take(30) {
            let rho: f64 = cols[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n + norms[j] * b[j];
            let new = soft_threshold(rho, lambda) / norms[j];
            for (r, a) in resid.iter_mut().zip(&cols[j]) {
                *r -= a * (new - b[j]);
            }
            b[j] = new;
            let obj = lasso_objective(&x, &y, &b, lambda);
            assert!(obj <= prev + 1e-14);
            prev = obj;
        }
    }

    #[test]
    fn last_survivor_is_first_entry() {
        let path = LassoPath {
            names: vec!["a".into(), "b".into(), "c".into()],
            penalties: vec![3.0, 2.0, 1.0],
            coefficients: vec![vec![0.0; 3], vec![0.0, 0.4, 0.1], vec![0.2, 0.5, 0.3]],
            active: vec![vec![], vec![1, 2], vec![0, 1, 2]],
            converged: vec![true; 3],
        };
        assert_eq!(path.last_survivor(), Some(1));
        assert_eq!(path.entry_penalties(), vec![Some(1.0), Some(2.0), Some(2.0)]);
    }

    #[test]
    fn post_lasso_with_all_columns_is_ols() {
        let layers = random_design(40, 3, 12);
        let controls = random_design(40, 1, 13).with_intercept().unwrap();
        let controls = DesignMatrix::new(
            vec!["intercept".into(), "c".into()],
            controls.matrix().column_iter().map(|c| c.iter().copied().collect()).collect(),
        )
        .unwrap();
        let y: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let post = post_lasso_ols(&layers, &controls, &y, &[0, 1, 2]).unwrap();
        let full = ols(&y, &controls.hstack(&layers).unwrap()).unwrap();
        assert_eq!(post.coefficients, full.coefficients);
        assert!(post_lasso_ols(&layers, &controls, &y, &[]).is_err());
        let one = post_lasso_ols(&layers, &controls, &y, &[1]).unwrap();
        assert_eq!(one.names, vec!["intercept", "c", "x1"]);
    }

    #[test]
    fn partialled_lasso_without_penalty_matches_ols() {
        let layers = random_design(60, 3, 21);
        let controls = DesignMatrix::new(
            vec!["intercept".into(), "size".into()],
            vec![vec![1.0; 60], (0..60).map(|i| i as f64 / 10.0).collect()],
        )
        .unwrap();
        let y: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64).collect();
        let full = ols(&y, &controls.hstack(&layers).unwrap()).unwrap();
        for precondition in [false, true] {
            let path = lasso_with_controls(&layers, &controls, &y, precondition, Some(&[0.0])).unwrap();
            if !precondition {
                for j in 0..3 {
                    assert_abs_diff_eq!(path.coefficients[0][j], full.coefficients[2 + j], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn interaction_needs_both_flags() {
        let controls = DesignMatrix::new(vec!["size".into()], vec![(0..10).map(|i| i as f64).collect()]).unwrap();
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 2.0).collect();
        let dc: Vec<f64> = (0..10).map(|i| ((i * 3) % 5) as f64).collect();
        assert!(interaction_regression(&y, &dc, &[false; 10], &controls).is_err());
        let flags: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let fit = interaction_regression(&y, &dc, &flags, &controls).unwrap();
        assert_eq!(fit.names[3], "dc_x_high_mpx");
    }

    #[test]
    fn standardization_round_trip() {
        let x = random_design(25, 2, 30);
        let y: Vec<f64> = (0..25).map(|i| i as f64 * 0.3).collect();
        let (z, means, sds) = x.standardized().unwrap();
        let fit_z = ols(&y, &z.with_intercept().unwrap()).unwrap();
        let slopes: Vec<f64> = (0..2).map(|j| fit_z.coefficients[j + 1] / sds[j]).collect();
        let intercept = fit_z.coefficients[0] - slopes.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
        let fit_x = ols(&y, &x.with_intercept().unwrap()).unwrap();
        for i in 0..25 {
            let row = x.matrix().row(i);
            let pred = intercept + slopes[0] * row[0] + slopes[1] * row[1];
            let direct = fit_x.coefficients[0] + fit_x.coefficients[1] * row[0] + fit_x.coefficients[2] * row[1];
            assert_abs_diff_eq!(pred, direct, epsilon = 1e-10);
        }
    }
}
