//! Ordinary least squares with intercept, solved through a Householder QR
//! of the column-equilibrated design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::{pearson, student_t_two_sided_p};
use crate::error::{Error, Result};

/// Correlation above which two columns are reported as collinear.
pub const COLLINEARITY_THRESHOLD: f64 = 0.9999;

const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Standard errors, intercept first.
    pub std_errors: Vec<f64>,
    /// t statistics, intercept first.
    pub t_statistics: Vec<f64>,
    /// Two-sided p-values, intercept first.
    pub p_values: Vec<f64>,
    pub dof: usize,
}

impl OlsFit {
    pub fn coefficient_p_values(&self) -> &[f64] {
        &self.p_values[1..]
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, t)| x * t).sum::<f64>()
    }
}

fn collinear_names<S: AsRef<str>>(columns: &[Vec<f64>], names: &[S], weak: &[usize]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let push = |out: &mut Vec<String>, s: String| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    for (c, col) in columns.iter().enumerate() {
        if col.iter().all(|v| *v == col[0]) {
            push(&mut out, format!("{} (constant)", names[c].as_ref()));
        }
    }
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            if let Some(r) = pearson(&columns[a], &columns[b]) {
                if r.abs() > COLLINEARITY_THRESHOLD {
                    push(&mut out, names[a].as_ref().to_string());
                    push(&mut out, names[b].as_ref().to_string());
                }
            }
        }
    }
    if out.is_empty() {
        for &j in weak {
            if j == 0 {
                push(&mut out, "intercept".into());
            } else {
                push(&mut out, names[j - 1].as_ref().to_string());
            }
        }
    }
    out
}

/// Fits `y = θ₀ + Σ θ_c x_c + ε`. `columns` holds the C feature columns,
/// each of length M; `names` labels them for diagnostics.
pub fn ols_fit<S: AsRef<str>>(columns: &[Vec<f64>], target: &[f64], names: &[S]) -> Result<OlsFit> {
    let m = target.len();
    let c = columns.len();
    if names.len() != c {
        return Err(Error::ShapeError(format!("{} names for {c} columns", names.len())));
    }
    if let Some(bad) = columns.iter().position(|col| col.len() != m) {
        return Err(Error::ShapeError(format!(
            "column {} has {} rows, target has {m}",
            names[bad].as_ref(),
            columns[bad].len()
        )));
    }
    if m < c + 2 {
        return Err(Error::InsufficientSamples {
            needed: c + 2,
            available: m,
        });
    }
    if columns.iter().flatten().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::NumericsError("non-finite value in regression input".into()));
    }

    let x = DMatrix::from_fn(m, c + 1, |r, j| if j == 0 { 1.0 } else { columns[j - 1][r] });
    let scale: Vec<f64> = (0..=c)
        .map(|j| {
            let n = x.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let xs = DMatrix::from_fn(m, c + 1, |r, j| x[(r, j)] / scale[j]);
    let qr = xs.qr();
    let r = qr.r();
    let q = qr.q();
    let diag_max = (0..=c).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let weak: Vec<usize> = (0..=c)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * diag_max)
        .collect();
    if !weak.is_empty() {
        return Err(Error::CollinearDesign(collinear_names(columns, names, &weak)));
    }

    let y = DVector::from_column_slice(target);
    let qty = q.transpose() * &y;
    let theta_s = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::NumericsError("singular triangular factor".into()))?;
    let theta: Vec<f64> = (0..=c).map(|j| theta_s[j] / scale[j]).collect();

    let fitted = &x * DVector::from_column_slice(&theta);
    let residuals: Vec<f64> = (0..m).map(|k| target[k] - fitted[k]).collect();
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = target.iter().sum::<f64>() / m as f64;
    let sst: f64 = target.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let dof = m - c - 1;
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (m as f64 - 1.0) / dof as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(c + 1, c + 1))
        .ok_or_else(|| Error::NumericsError("singular triangular factor".into()))?;
    let sigma2 = sse / dof as f64;
    let mut std_errors = Vec::with_capacity(c + 1);
    let mut t_statistics = Vec::with_capacity(c + 1);
    let mut p_values = Vec::with_capacity(c + 1);
    for j in 0..=c {
        let var_s: f64 = r_inv.row(j).iter().map(|v| v * v).sum::<f64>() * sigma2;
        let se = var_s.sqrt() / scale[j];
        let t = if se > 0.0 {
            theta[j] / se
        } else if theta[j] == 0.0 {
            0.0
        } else {
            theta[j].signum() * f64::INFINITY
        };
        std_errors.push(se);
        t_statistics.push(t);
        p_values.push(student_t_two_sided_p(t, dof as f64));
    }

    Ok(OlsFit {
        intercept: theta[0],
        coefficients: theta[1..].to_vec(),
        residuals,
        r_squared,
        adj_r_squared,
        std_errors,
        t_statistics,
        p_values,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_line() {
        let fit = ols_fit(&[vec![1.0, 2.0, 3.0]], &[2.0, 4.0, 6.0], &["x"]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjusted_r_squared_formula() {
        // R² = 0.9, M = 11, C = 1 -> 1 - 0.1 * 10 / 9
        let adj: f64 = 1.0 - (1.0 - 0.9) * 10.0 / 9.0;
        assert!((adj - 0.8889).abs() < 1e-4);
        let mut rng = Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let fit = ols_fit(&[x], &y, &["x"]).unwrap();
        let want = 1.0 - (1.0 - fit.r_squared) * 10.0 / 9.0;
        assert!((fit.adj_r_squared - want).abs() < 1e-14);
        assert!(fit.adj_r_squared <= fit.r_squared);
    }

    #[test]
    fn recovers_coefficients_without_noise() {
        let mut rng = Rng::seed_from_u64(2);
        let (m, c) = (200, 11);
        let cols: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let truth: Vec<f64> = (0..c).map(|j| j as f64 * 0.3 - 1.2).collect();
        let y: Vec<f64> = (0..m)
            .map(|r| 0.7 + (0..c).map(|j| truth[j] * cols[j][r]).sum::<f64>())
            .collect();
        let names: Vec<String> = (0..c).map(|j| format!("x{j}")).collect();
        let fit = ols_fit(&cols, &y, &names).unwrap();
        assert!((fit.intercept - 0.7).abs() < 1e-10);
        for j in 0..c {
            assert!((fit.coefficients[j] - truth[j]).abs() < 1e-10);
        }
        assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let mut rng = Rng::seed_from_u64(3);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..50).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = ols_fit(&cols, &y, &["a", "b", "c"]).unwrap();
        for col in &cols {
            let dot: f64 = col.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8);
        }
        assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn noise_p_values_are_rarely_significant() {
        // under the null the p-value is uniform: P(p > 0.01) = 0.99
        let mut hits = 0;
        for seed in 0..1000 {
            let mut rng = Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ols_fit(&[x], &y, &["x"]).unwrap().p_values[1] > 0.01 {
                hits += 1;
            }
        }
        assert!(hits >= 950, "{hits}");
    }

    #[test]
    fn duplicate_column_is_collinear() {
        let a = vec![1.0, 2.0, 3.5, 4.0, 7.0, 1.0];
        let b = vec![0.5, 0.1, 0.3, 0.9, 0.2, 0.4];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        match ols_fit(&[a.clone(), b, a], &y, &["a", "b", "a_copy"]) {
            Err(Error::CollinearDesign(names)) => assert_eq!(names, vec!["a", "a_copy"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            ols_fit(&[vec![1.0, 2.0]], &[1.0, 2.0], &["x"]),
            Err(Error::InsufficientSamples { needed: 3, available: 2 })
        ));
    }
}
