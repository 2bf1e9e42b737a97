//! Pairwise and pointwise ranking losses with analytic gradients.

use super::{dot, Embeddings};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

/// Loss value with gradients with respect to user and item rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub users: Embeddings,
    pub items: Embeddings,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Mean BPR loss `-ln σ(x_ui - x_uj)` over (user, positive, negative) triples.
pub fn bpr_loss(users: &Embeddings, items: &Embeddings, triples: &[(u32, u32, u32)]) -> LossAndGrad {
    let mut gu = Embeddings::zeros(users.rows(), users.dim());
    let mut gi = Embeddings::zeros(items.rows(), items.dim());
    let scale = 1.0 / triples.len().max(1) as f64;
    let mut loss = 0.0;
    for &(u, i, j) in triples {
        let (u, i, j) = (u as usize, i as usize, j as usize);
        let (eu, ei, ej) = (users.row(u), items.row(i), items.row(j));
        let x = dot(eu, ei) - dot(eu, ej);
        loss -= log_sigmoid(x);
        let c = -sigmoid(-x) * scale;
        let gu_row = gu.row_mut(u);
        axpy(c, ei, gu_row);
        axpy(-c, ej, gu_row);
        axpy(c, eu, gi.row_mut(i));
        axpy(-c, eu, gi.row_mut(j));
    }
    LossAndGrad {
        loss: loss * scale,
        users: gu,
        items: gi,
    }
}

/// Same-partition similarity loss
/// `-Σ ln σ(e_v·e_w) - Σ ln σ(-e_v·e_j)` and its gradient.
pub fn svdgcn_partition_loss(
    embeddings: &Embeddings,
    positive_pairs: &[(u32, u32)],
    negative_pairs: &[(u32, u32)],
) -> (f64, Embeddings) {
    let mut grad = Embeddings::zeros(embeddings.rows(), embeddings.dim());
    let mut loss = 0.0;
    for (pairs, sign) in [(positive_pairs, 1.0), (negative_pairs, -1.0)] {
        for &(v, w) in pairs {
            let (v, w) = (v as usize, w as usize);
            let x = sign * dot(embeddings.row(v), embeddings.row(w));
            loss -= log_sigmoid(x);
            let c = -sign * sigmoid(-x);
            let (ev, ew) = (embeddings.row(v).to_vec(), embeddings.row(w).to_vec());
            axpy(c, &ew, grad.row_mut(v));
            axpy(c, &ev, grad.row_mut(w));
        }
    }
    (loss, grad)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::SeedableRng;

    /// Worst relative error between an analytic gradient and central
    /// differences of `f` around `x`.
    pub(crate) fn finite_difference_error(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut p = x.to_vec();
        for k in 0..x.len() {
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic[k].abs().max(numeric.abs());
            if scale > 1e-7 {
                worst = worst.max((analytic[k] - numeric).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sigmoid(1000.0), 0.0);
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() < 1e-9);
        assert!((log_sigmoid(2.0) - (1.0 / (1.0 + (-2.0f64).exp())).ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_positive_pair() {
        let e = Embeddings::from_vec(2, 2, vec![30.0, 0.0, 30.0, 0.0]).unwrap();
        let (loss, _) = svdgcn_partition_loss(&e, &[(0, 1)], &[]);
        assert!(loss < 1e-300);
    }

    #[test]
    fn orthogonal_negative_pair_costs_ln2() {
        let e = Embeddings::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.0, 2.0]).unwrap();
        let (loss, _) = svdgcn_partition_loss(&e, &[], &[(0, 1), (0, 2)]);
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn partition_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(11);
        let e = Embeddings::uniform(5, 3, &mut rng);
        let pos = [(0, 1), (2, 3)];
        let neg = [(0, 4), (1, 2)];
        let (_, g) = svdgcn_partition_loss(&e, &pos, &neg);
        let err = finite_difference_error(e.as_slice(), g.as_slice(), |x| {
            svdgcn_partition_loss(&Embeddings::from_vec(5, 3, x.to_vec()).unwrap(), &pos, &neg).0
        });
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn bpr_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(12);
        let u = Embeddings::uniform(3, 4, &mut rng);
        let i = Embeddings::uniform(4, 4, &mut rng);
        let t = [(0, 1, 2), (1, 0, 3), (2, 3, 1), (0, 2, 1)];
        let g = bpr_loss(&u, &i, &t);
        let err_u = finite_difference_error(u.as_slice(), g.users.as_slice(), |x| {
            bpr_loss(&Embeddings::from_vec(3, 4, x.to_vec()).unwrap(), &i, &t).loss
        });
        let err_i = finite_difference_error(i.as_slice(), g.items.as_slice(), |x| {
            bpr_loss(&u, &Embeddings::from_vec(4, 4, x.to_vec()).unwrap(), &t).loss
        });
        assert!(err_u < 1e-4 && err_i < 1e-4, "{err_u} {err_i}");
    }
}
