use statrs::function::beta::beta_reg;

/// Two-sided Student-t tail probability `P(|T| ≥ |t|)` with `dof` degrees
/// of freedom, evaluated as `I_{ν/(ν+t²)}(ν/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    assert!(dof >= 1.0, "degrees of freedom must be >= 1");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Pearson correlation; `None` if either input is constant or the lengths
/// differ or fewer than two observations are given.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric matrix of pairwise Pearson correlations. The diagonal is 1 for
/// non-constant columns; entries involving a constant column are `None`.
pub fn pearson_matrix(columns: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let c = columns.len();
    let mut out = vec![vec![None; c]; c];
    for a in 0..c {
        for b in a..c {
            let r = if a == b {
                pearson(&columns[a], &columns[a]).map(|_| 1.0)
            } else {
                pearson(&columns[a], &columns[b])
            };
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    out
}
