//! Ranking losses over critic scores, each with its gradient with respect to
//! the scores.

use super::RewardError;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-ln σ(score_w - score_l)`.
pub fn pairwise_loss(score_w: f64, score_l: f64) -> f64 {
    softplus(score_l - score_w)
}

/// Loss and its gradient `(d/d score_w, d/d score_l)`.
pub fn pairwise_loss_grad(score_w: f64, score_l: f64) -> (f64, [f64; 2]) {
    let d = score_w - score_l;
    let g = sigmoid(-d);
    (softplus(-d), [-g, g])
}

/// Squared distance to the target rank level.
pub fn pointwise_loss(score: f64, target_rank: u8) -> f64 {
    let e = score - f64::from(target_rank);
    e * e
}

pub fn pointwise_loss_grad(score: f64, target_rank: u8) -> (f64, f64) {
    let e = score - f64::from(target_rank);
    (e * e, 2.0 * e)
}

/// Plackett-Luce negative log-likelihood of the given order, where
/// `scores[0]` belongs to the item that should be ranked first.
pub fn listwise_loss(scores: &[f64]) -> Result<f64, RewardError> {
    listwise_loss_grad(scores).map(|(loss, _)| loss)
}

pub fn listwise_loss_grad(scores: &[f64]) -> Result<(f64, Vec<f64>), RewardError> {
    if scores.len() < 2 {
        return Err(RewardError::Argument(format!(
            "listwise loss needs at least 2 items, got {}",
            scores.len()
        )));
    }
    let n = scores.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    // Position i chooses item i among the remaining suffix i..n.
    for i in 0..n - 1 {
        let tail = &scores[i..];
        let lse = log_sum_exp(tail);
        loss += lse - scores[i];
        grad[i] -= 1.0;
        for (j, s) in tail.iter().enumerate() {
            grad[i + j] += (s - lse).exp();
        }
    }
    Ok((loss, grad))
}

/// Item order used for the listwise loss: rank descending, ties kept in
/// input order.
pub fn canonical_order(ranks: &[u8]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ranks.len()).collect();
    idx.sort_by(|&a, &b| ranks[b].cmp(&ranks[a]));
    idx
}
