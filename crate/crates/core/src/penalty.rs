//! Cross-group fairness penalty over same-label score pairs, its exact
//! gradient, and the composite training objective
//! loss + lambda * penalty + gamma * ||w||^2.
//!
//! Three penalty variants share the pair structure:
//!
//! * `signed-ordered` - the sum of signed differences over ordered group
//!   pairs. Antisymmetry cancels it identically; it is kept for fidelity
//!   testing, not training.
//! * `absolute-pair` (default) - |s_i - s_j| per unordered cross-group
//!   same-label pair, normalized by the count of all unordered cross-group
//!   pairs. Convex; piecewise linear in the scores.
//! * `squared-group-mean` - per (group pair, label) block, the squared gap
//!   of mean scores, weighted by the block's pair count. Convex and smooth.
//!
//! Penalties are functions of the score vector only, so gradients reduce to
//! per-sample score coefficients that feed the models' shared backward pass.
//!
//! Scale note: the pair average makes the penalty gradient comparable in
//! magnitude to the prediction-loss gradient, so useful weights sit around
//! 0.01-0.3 on standardized tabular data. Weights near 1 or above flatten
//! the scores into a constant and stall learning; the strength search in
//! `tune` finds the usable range per dataset.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    SignedOrdered,
    #[default]
    AbsolutePair,
    SquaredGroupMean,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PenaltyConfig {
    #[serde(default)]
    pub mode: PenaltyMode,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { mode: PenaltyMode::AbsolutePair, lambda: 0.0, gamma: 0.0 }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(crate::error::Error::config("lambda must be finite and >= 0"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(crate::error::Error::config("gamma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyValue {
    pub value: f64,
    /// Cross-group same-label pairs that entered the sum.
    pub pair_count: u64,
    /// The divisor actually applied (0 when fewer than two groups).
    pub normalizer: f64,
}

impl PenaltyValue {
    fn empty() -> Self {
        PenaltyValue { value: 0.0, pair_count: 0, normalizer: 0.0 }
    }
}

/// Penalty value plus d(penalty)/d(score_i) for every sample.
///
/// `groups` assigns each sample its sensitive group id; labels gate which
/// pairs count. A batch with fewer than two groups yields a zero penalty
/// and zero coefficients.
pub fn penalty_terms(
    scores: &[f64],
    y: &[u8],
    groups: &[u32],
    mode: PenaltyMode,
) -> (PenaltyValue, Vec<f64>) {
    let n = scores.len();
    debug_assert_eq!(n, y.len());
    debug_assert_eq!(n, groups.len());
    let mut coeffs = vec![0.0; n];
    let distinct: std::collections::BTreeSet<u32> = groups.iter().copied().collect();
    if distinct.len() < 2 {
        return (PenaltyValue::empty(), coeffs);
    }

    // Unordered cross-group pair count, labels ignored (the normalizer).
    let mut group_sizes: BTreeMap<u32, u64> = BTreeMap::new();
    for &g in groups {
        *group_sizes.entry(g).or_insert(0) += 1;
    }
    let n_u64 = n as u64;
    let within: u64 = group_sizes.values().map(|&m| m * (m - 1) / 2).sum();
    let cross_unordered = n_u64 * (n_u64 - 1) / 2 - within;
    let normalizer_unordered = cross_unordered as f64;
    let normalizer_ordered = 2.0 * normalizer_unordered;

    match mode {
        PenaltyMode::SignedOrdered => {
            // Both ordered orientations of every pair appear, so each |s_i - s_j|
            // enters once with each sign. Computed as written via group sums;
            // the two accumulations are identical and cancel exactly.
            let mut pair_count = 0u64;
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for label in [0u8, 1u8] {
                let mut cell: BTreeMap<u32, (f64, u64)> = BTreeMap::new();
                for i in 0..n {
                    if y[i] == label {
                        let e = cell.entry(groups[i]).or_insert((0.0, 0));
                        e.0 += scores[i];
                        e.1 += 1;
                    }
                }
                let m_total: u64 = cell.values().map(|v| v.1).sum();
                for (_, &(sum, count)) in cell.iter() {
                    let others = (m_total - count) as f64;
                    lhs += sum * others;
                    rhs += sum * others;
                    pair_count += count * (m_total - count);
                }
            }
            let value =
                if normalizer_ordered > 0.0 { (lhs - rhs) / normalizer_ordered } else { 0.0 };
            (
                PenaltyValue { value, pair_count, normalizer: normalizer_ordered },
                coeffs,
            )
        }
        PenaltyMode::AbsolutePair => {
            let mut pair_count = 0u64;
            let mut total = 0.0;
            for label in [0u8, 1u8] {
                let members: Vec<usize> = (0..n).filter(|&i| y[i] == label).collect();
                if members.len() < 2 {
                    continue;
                }
                // all-pairs minus within-group pairs, via sorted prefix sums
                let mut all: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                total += sum_abs_pairwise(&all);
                let mut cross_pairs =
                    (members.len() as u64) * (members.len() as u64 - 1) / 2;
                let mut buckets: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
                for &i in &members {
                    buckets.entry(groups[i]).or_default().push(i);
                }
                for rows in buckets.values() {
                    let mut own: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
                    own.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    total -= sum_abs_pairwise(&own);
                    cross_pairs -= (rows.len() as u64) * (rows.len() as u64 - 1) / 2;
                }
                pair_count += cross_pairs;

                // coefficient of sample i: (#cross partners below) - (#above);
                // equal scores contribute zero (sign(0) = 0)
                let all_counts = rank_counts(&members, scores);
                for rows in buckets.values() {
                    let own_counts = rank_counts(rows, scores);
                    for &i in rows {
                        let (la, ga) = all_counts[&i];
                        let (lo, go) = own_counts[&i];
                        let surplus = (la - lo) - (ga - go);
                        coeffs[i] += surplus as f64 / normalizer_unordered;
                    }
                }
            }
            let value = total / normalizer_unordered;
            (
                PenaltyValue { value, pair_count, normalizer: normalizer_unordered },
                coeffs,
            )
        }
        PenaltyMode::SquaredGroupMean => {
            let mut blocks: BTreeMap<(u8, u32), (f64, u64)> = BTreeMap::new();
            for i in 0..n {
                let e = blocks.entry((y[i], groups[i])).or_insert((0.0, 0));
                e.0 += scores[i];
                e.1 += 1;
            }
            let mut value_num = 0.0;
            let mut norm = 0.0;
            let mut pair_count = 0u64;
            let cells: Vec<((u8, u32), (f64, u64))> =
                blocks.iter().map(|(k, v)| (*k, *v)).collect();
            // d(value)/d(mean of cell): accumulated, then spread over members
            let mut dmean: BTreeMap<(u8, u32), f64> = BTreeMap::new();
            for (ai, &((la, ga), (sa, ca))) in cells.iter().enumerate() {
                for &((lb, gb), (sb, cb)) in &cells[ai + 1..] {
                    if la != lb || ga == gb {
                        continue;
                    }
                    let weight = (ca * cb) as f64;
                    let gap = sa / ca as f64 - sb / cb as f64;
                    value_num += weight * gap * gap;
                    norm += weight;
                    pair_count += ca * cb;
                    *dmean.entry((la, ga)).or_insert(0.0) += 2.0 * weight * gap;
                    *dmean.entry((lb, gb)).or_insert(0.0) -= 2.0 * weight * gap;
                }
            }
            if norm == 0.0 {
                return (PenaltyValue::empty(), coeffs);
            }
            for i in 0..n {
                if let Some(d) = dmean.get(&(y[i], groups[i])) {
                    let count = blocks[&(y[i], groups[i])].1 as f64;
                    coeffs[i] = d / count / norm;
                }
            }
            (
                PenaltyValue { value: value_num / norm, pair_count, normalizer: norm },
                coeffs,
            )
        }
    }
}

/// Sum over i<j of |x_j - x_i| for an ascending slice, via prefix weights.
fn sum_abs_pairwise(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &s)| s * (2.0 * k as f64 - (m - 1.0)))
        .sum()
}

/// For each listed row, how many of the other listed rows score strictly
/// below and strictly above it.
fn rank_counts(rows: &[usize], scores: &[f64]) -> BTreeMap<usize, (i64, i64)> {
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let m = order.len() as i64;
    let mut out = BTreeMap::new();
    let mut start = 0usize;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        for &i in &order[start..=end] {
            out.insert(i, (start as i64, m - 1 - end as i64));
        }
        start = end + 1;
    }
    out
}

/// Penalty evaluated at the model's current scores.
pub fn penalty(
    params: &ModelParams,
    a: &Matrix,
    y: &[u8],
    groups: &[u32],
    mode: PenaltyMode,
) -> Result<PenaltyValue> {
    let scores = params.forward(a)?;
    Ok(penalty_terms(&scores.logits, y, groups, mode).0)
}

/// Penalty value and its gradient in parameter space.
pub fn penalty_grad(
    params: &ModelParams,
    a: &Matrix,
    y: &[u8],
    groups: &[u32],
    mode: PenaltyMode,
) -> Result<(PenaltyValue, ModelParams)> {
    let scores = params.forward(a)?;
    let (value, coeffs) = penalty_terms(&scores.logits, y, groups, mode);
    Ok((value, params.backprop_logit_coeffs(a, &coeffs)))
}

/// Composite objective parts, reported alongside training traces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObjectiveParts {
    pub loss: f64,
    pub penalty: f64,
    pub l2: f64,
}

/// value = loss + lambda * penalty + gamma * ||w||^2 (biases excluded from
/// the norm), with the exact gradient. One shared backward pass serves the
/// loss and penalty terms.
pub fn composite_objective(
    params: &ModelParams,
    a: &Matrix,
    y: &[u8],
    groups: &[u32],
    cfg: &PenaltyConfig,
) -> Result<(f64, ModelParams, ObjectiveParts)> {
    if y.is_empty() {
        return Err(crate::error::Error::model("empty batch"));
    }
    let scores = params.forward(a)?;
    let m = y.len() as f64;
    let mut loss = 0.0;
    let mut coeffs = Vec::with_capacity(y.len());
    for (&z, &yi) in scores.logits.iter().zip(y) {
        let yf = f64::from(yi);
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        loss += softplus - z * yf;
        coeffs.push((crate::model::sigmoid(z) - yf) / m);
    }
    loss /= m;

    let pen = if cfg.lambda > 0.0 {
        let (value, pen_coeffs) = penalty_terms(&scores.logits, y, groups, cfg.mode);
        for (c, p) in coeffs.iter_mut().zip(&pen_coeffs) {
            *c += cfg.lambda * p;
        }
        value.value
    } else {
        0.0
    };

    let mut grad = params.backprop_logit_coeffs(a, &coeffs);
    let l2 = params.weight_sq_norm();
    if cfg.gamma > 0.0 {
        grad.add_l2_grad(cfg.gamma, params);
    }
    let value = loss + cfg.lambda * pen + cfg.gamma * l2;
    Ok((value, grad, ObjectiveParts { loss, penalty: pen, l2 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::rng::{derive_rng, tag};
    use rand::Rng;

    /// O(n^2) reference: value and coefficients by direct pair enumeration.
    pub(crate) fn brute_force(
        scores: &[f64],
        y: &[u8],
        groups: &[u32],
        mode: PenaltyMode,
    ) -> (f64, f64, u64, Vec<f64>) {
        let n = scores.len();
        let mut coeffs = vec![0.0; n];
        let distinct: std::collections::BTreeSet<u32> = groups.iter().copied().collect();
        if distinct.len() < 2 {
            return (0.0, 0.0, 0, coeffs);
        }
        let mut cross_unordered = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                if groups[i] != groups[j] {
                    cross_unordered += 1;
                }
            }
        }
        match mode {
            PenaltyMode::SignedOrdered => {
                let norm = (2 * cross_unordered) as f64;
                let mut total = 0.0;
                let mut pairs = 0u64;
                for i in 0..n {
                    for j in 0..n {
                        if i != j && groups[i] != groups[j] && y[i] == y[j] {
                            total += scores[i] - scores[j];
                            pairs += 1;
                        }
                    }
                }
                (total / norm, norm, pairs, coeffs)
            }
            PenaltyMode::AbsolutePair => {
                let norm = cross_unordered as f64;
                let mut total = 0.0;
                let mut pairs = 0u64;
                for i in 0..n {
                    for j in i + 1..n {
                        if groups[i] != groups[j] && y[i] == y[j] {
                            total += (scores[i] - scores[j]).abs();
                            pairs += 1;
                            let sign = match scores[i].partial_cmp(&scores[j]).unwrap() {
                                std::cmp::Ordering::Greater => 1.0,
                                std::cmp::Ordering::Less => -1.0,
                                std::cmp::Ordering::Equal => 0.0,
                            };
                            coeffs[i] += sign / norm;
                            coeffs[j] -= sign / norm;
                        }
                    }
                }
                (total / norm, norm, pairs, coeffs)
            }
            PenaltyMode::SquaredGroupMean => {
                // block means by pair enumeration
                let mut value_num = 0.0;
                let mut norm = 0.0;
                let mut pairs = 0u64;
                let mut keys: Vec<(u8, u32)> = Vec::new();
                for i in 0..n {
                    if !keys.contains(&(y[i], groups[i])) {
                        keys.push((y[i], groups[i]));
                    }
                }
                keys.sort_unstable();
                for (ai, &(la, ga)) in keys.iter().enumerate() {
                    for &(lb, gb) in &keys[ai + 1..] {
                        if la != lb || ga == gb {
                            continue;
                        }
                        let rows_a: Vec<usize> =
                            (0..n).filter(|&i| y[i] == la && groups[i] == ga).collect();
                        let rows_b: Vec<usize> =
                            (0..n).filter(|&i| y[i] == lb && groups[i] == gb).collect();
                        let mut gap_sum = 0.0;
                        for &i in &rows_a {
                            for &j in &rows_b {
                                gap_sum += scores[i] - scores[j];
                            }
                        }
                        let weight = (rows_a.len() * rows_b.len()) as f64;
                        let gap = gap_sum / weight;
                        value_num += weight * gap * gap;
                        norm += weight;
                        pairs += weight as u64;
                    }
                }
                if norm == 0.0 {
                    return (0.0, 0.0, 0, coeffs);
                }
                (value_num / norm, norm, pairs, coeffs)
            }
        }
    }

    fn random_batch(n: usize, k: u32, seed: u64) -> (Vec<f64>, Vec<u8>, Vec<u32>) {
        let mut rng = derive_rng(seed, &[tag("pen-test")]);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..k)).collect();
        groups[0] = 0;
        groups[n - 1] = k - 1;
        (scores, y, groups)
    }

    #[test]
    fn worked_two_sample_example() {
        // one sample per group, same label: single cross pair
        let (v, coeffs) =
            penalty_terms(&[0.3, 0.7], &[1, 1], &[0, 1], PenaltyMode::AbsolutePair);
        assert!((v.value - 0.4).abs() < 1e-15);
        assert_eq!(v.pair_count, 1);
        assert_eq!(v.normalizer, 1.0);
        assert!((coeffs[0] + 1.0).abs() < 1e-15);
        assert!((coeffs[1] - 1.0).abs() < 1e-15);

        let (v, _) = penalty_terms(&[0.3, 0.7], &[1, 1], &[0, 1], PenaltyMode::SignedOrdered);
        assert_eq!(v.value, 0.0);

        // differing labels: no weighted pair in any mode
        for mode in
            [PenaltyMode::SignedOrdered, PenaltyMode::AbsolutePair, PenaltyMode::SquaredGroupMean]
        {
            let (v, coeffs) = penalty_terms(&[0.3, 0.7], &[1, 0], &[0, 1], mode);
            assert_eq!(v.value, 0.0, "{mode:?}");
            assert!(coeffs.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn single_group_batch_is_zero_not_error() {
        let (v, coeffs) =
            penalty_terms(&[0.1, 0.9, 0.5], &[1, 1, 0], &[2, 2, 2], PenaltyMode::AbsolutePair);
        assert_eq!(v.value, 0.0);
        assert_eq!(v.pair_count, 0);
        assert_eq!(v.normalizer, 0.0);
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn fast_paths_match_brute_force() {
        for trial in 0..50 {
            let n = 8 + (trial % 7) * 8;
            let k = 2 + (trial % 3) as u32;
            let (mut scores, y, groups) = random_batch(n, k, 100 + trial as u64);
            if trial % 4 == 0 {
                // inject ties
                for s in scores.iter_mut() {
                    *s = (*s * 2.0).round() / 2.0;
                }
            }
            for mode in [
                PenaltyMode::SignedOrdered,
                PenaltyMode::AbsolutePair,
                PenaltyMode::SquaredGroupMean,
            ] {
                let (v, coeffs) = penalty_terms(&scores, &y, &groups, mode);
                let (bv, bnorm, bpairs, bcoeffs) = brute_force(&scores, &y, &groups, mode);
                assert!(
                    (v.value - bv).abs() <= 1e-10,
                    "{mode:?} trial {trial}: {} vs {bv}",
                    v.value
                );
                assert!((v.normalizer - bnorm).abs() < 1e-9);
                assert_eq!(v.pair_count, bpairs, "{mode:?} trial {trial}");
                if mode == PenaltyMode::AbsolutePair {
                    for (c, b) in coeffs.iter().zip(&bcoeffs) {
                        assert!((c - b).abs() < 1e-10, "{mode:?} trial {trial}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weight_linear_model_has_zero_gradient() {
        let params = ModelParams::init(ModelKind::Linear, 3, 0, 0);
        let a = Matrix::from_rows(vec![
            vec![1.0, 0.5, -0.5],
            vec![-1.0, 0.25, 0.5],
            vec![0.5, -1.0, 2.0],
            vec![2.0, 1.0, -1.0],
        ]);
        let y = vec![1, 1, 0, 1];
        let groups = vec![0, 1, 0, 1];
        let (v, grad) =
            penalty_grad(&params, &a, &y, &groups, PenaltyMode::AbsolutePair).unwrap();
        assert_eq!(v.value, 0.0);
        match grad {
            ModelParams::Linear { weights, bias } => {
                assert!(weights.iter().all(|&w| w == 0.0));
                assert_eq!(bias, 0.0);
            }
            _ => unreachable!(),
        }
    }

    fn fd_check(
        params: &ModelParams,
        a: &Matrix,
        y: &[u8],
        groups: &[u32],
        mode: PenaltyMode,
        tol: f64,
        kink_guard: bool,
    ) {
        let (_, grad) = penalty_grad(params, a, y, groups, mode).unwrap();
        let (weights, bias) = match params {
            ModelParams::Linear { weights, bias } => (weights.clone(), *bias),
            _ => panic!("linear only here"),
        };
        let gw = match &grad {
            ModelParams::Linear { weights, .. } => weights.clone(),
            _ => unreachable!(),
        };
        let h = 1e-6;
        for d in 0..weights.len() {
            let eval = |delta: f64| {
                let mut w = weights.clone();
                w[d] += delta;
                let p = ModelParams::Linear { weights: w, bias };
                penalty(&p, a, y, groups, mode).unwrap().value
            };
            if kink_guard {
                // skip coordinates whose perturbation crosses a |.| kink
                let probe = ModelParams::Linear { weights: weights.clone(), bias };
                let scores = probe.forward(a).unwrap().logits;
                let mut near_kink = false;
                for i in 0..y.len() {
                    for j in i + 1..y.len() {
                        if groups[i] != groups[j]
                            && y[i] == y[j]
                            && (scores[i] - scores[j]).abs() < 1e-4
                        {
                            near_kink = true;
                        }
                    }
                }
                if near_kink {
                    continue;
                }
            }
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let denom = fd.abs().max(gw[d].abs()).max(1e-8);
            assert!((fd - gw[d]).abs() / denom < tol, "coord {d}: fd={fd} an={}", gw[d]);
        }
    }

    #[test]
    fn absolute_pair_gradient_matches_finite_differences() {
        for trial in 0..12 {
            let mut rng = derive_rng(500 + trial, &[tag("pen-fd")]);
            let n = 20;
            let a = Matrix::from_rows(
                (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.5..1.5)).collect()).collect(),
            );
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            groups[0] = 0;
            groups[1] = 1;
            let params = ModelParams::Linear {
                weights: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: rng.random_range(-0.5..0.5),
            };
            fd_check(&params, &a, &y, &groups, PenaltyMode::AbsolutePair, 1e-4, true);
        }
    }

    #[test]
    fn squared_mode_gradient_matches_everywhere() {
        for trial in 0..12 {
            let mut rng = derive_rng(900 + trial, &[tag("pen-fd2")]);
            let n = 24;
            let a = Matrix::from_rows(
                (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.5..1.5)).collect()).collect(),
            );
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
            groups[0] = 0;
            groups[1] = 1;
            let params = ModelParams::Linear {
                weights: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: rng.random_range(-0.5..0.5),
            };
            fd_check(&params, &a, &y, &groups, PenaltyMode::SquaredGroupMean, 1e-5, false);
        }
    }

    #[test]
    fn fcnn_penalty_gradient_matches_finite_differences() {
        let mut rng = derive_rng(4242, &[tag("pen-fcnn")]);
        let n = 14;
        let a = Matrix::from_rows(
            (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        );
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        groups[0] = 0;
        groups[1] = 1;
        let params = ModelParams::init(ModelKind::Fcnn, 3, 5, 31);
        let (_, grad) =
            penalty_grad(&params, &a, &y, &groups, PenaltyMode::SquaredGroupMean).unwrap();
        // flatten both and compare against finite differences
        let flat = |p: &ModelParams| -> Vec<f64> {
            match p {
                ModelParams::Fcnn { w1, b1, w2, b2 } => {
                    let mut v = w1.data().to_vec();
                    v.extend_from_slice(b1);
                    v.extend_from_slice(w2);
                    v.push(*b2);
                    v
                }
                _ => unreachable!(),
            }
        };
        let rebuild = |template: &ModelParams, v: &[f64]| -> ModelParams {
            match template {
                ModelParams::Fcnn { w1, b1, w2, .. } => {
                    let n1 = w1.rows() * w1.cols();
                    let mut off = 0;
                    let w1n = Matrix::from_flat(w1.rows(), w1.cols(), v[..n1].to_vec());
                    off += n1;
                    let b1n = v[off..off + b1.len()].to_vec();
                    off += b1.len();
                    let w2n = v[off..off + w2.len()].to_vec();
                    off += w2.len();
                    ModelParams::Fcnn { w1: w1n, b1: b1n, w2: w2n, b2: v[off] }
                }
                _ => unreachable!(),
            }
        };
        let p0 = flat(&params);
        let g = flat(&grad);
        let h = 1e-6;
        for d in 0..p0.len() {
            let mut up = p0.clone();
            up[d] += h;
            let mut dn = p0.clone();
            dn[d] -= h;
            let vu = penalty(&rebuild(&params, &up), &a, &y, &groups, PenaltyMode::SquaredGroupMean)
                .unwrap()
                .value;
            let vd = penalty(&rebuild(&params, &dn), &a, &y, &groups, PenaltyMode::SquaredGroupMean)
                .unwrap()
                .value;
            let fd = (vu - vd) / (2.0 * h);
            let denom = fd.abs().max(g[d].abs()).max(1e-7);
            assert!((fd - g[d]).abs() / denom < 2e-4, "coord {d}: fd={fd} an={}", g[d]);
        }
    }

    #[test]
    fn composite_reduces_to_plain_loss() {
        let params = ModelParams::Linear { weights: vec![0.3, -0.2], bias: 0.1 };
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.2, -0.3]]);
        let y = vec![1, 0, 1];
        let groups = vec![0, 1, 0];
        let cfg = PenaltyConfig { mode: PenaltyMode::AbsolutePair, lambda: 0.0, gamma: 0.0 };
        let (value, grad, _) = composite_objective(&params, &a, &y, &groups, &cfg).unwrap();
        let (loss, lgrad) = params.loss_and_grad(&a, &y).unwrap();
        assert!((value - loss).abs() < 1e-15);
        assert_eq!(grad, lgrad);
    }

    #[test]
    fn composite_l2_term_arithmetic() {
        let params = ModelParams::Linear { weights: vec![2.0], bias: 5.0 };
        let a = Matrix::from_rows(vec![vec![0.0], vec![0.0]]);
        let y = vec![1, 0];
        let groups = vec![0, 1];
        let cfg = PenaltyConfig { mode: PenaltyMode::AbsolutePair, lambda: 0.0, gamma: 1.0 };
        let (value, grad, parts) = composite_objective(&params, &a, &y, &groups, &cfg).unwrap();
        assert!((parts.l2 - 4.0).abs() < 1e-15);
        assert!((value - (parts.loss + 4.0)).abs() < 1e-12);
        match grad {
            ModelParams::Linear { weights, .. } => {
                // zero inputs: loss gradient on w is 0, L2 adds 2*gamma*w = 4
                assert!((weights[0] - 4.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn composite_matches_separate_evaluation() {
        let mut rng = derive_rng(777, &[tag("pen-comp")]);
        let n = 30;
        let a = Matrix::from_rows(
            (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        );
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..3)).collect();
        groups[0] = 0;
        groups[1] = 1;
        groups[2] = 2;
        let params = ModelParams::Linear {
            weights: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: 0.2,
        };
        let cfg = PenaltyConfig { mode: PenaltyMode::AbsolutePair, lambda: 2.0, gamma: 0.05 };
        let (value, ..) = composite_objective(&params, &a, &y, &groups, &cfg).unwrap();
        let loss = params.loss(&a, &y).unwrap();
        let (bv, ..) = brute_force(
            &params.forward(&a).unwrap().logits,
            &y,
            &groups,
            PenaltyMode::AbsolutePair,
        );
        let expect = loss + 2.0 * bv + 0.05 * params.weight_sq_norm();
        assert!((value - expect).abs() < 1e-10, "{value} vs {expect}");
    }

    #[test]
    fn convexity_probe_linear_scores() {
        let mut rng = derive_rng(31337, &[tag("pen-convex")]);
        let n = 16;
        let a = Matrix::from_rows(
            (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        );
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let mut groups: Vec<u32> = (0..n).map(|_| rng.random_range(0..2)).collect();
        groups[0] = 0;
        groups[1] = 1;
        for mode in [PenaltyMode::AbsolutePair, PenaltyMode::SquaredGroupMean] {
            for _ in 0..100 {
                let w1: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let w2: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let t: f64 = rng.random();
                let mix: Vec<f64> =
                    w1.iter().zip(&w2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                let eval = |w: &[f64]| {
                    let p = ModelParams::Linear { weights: w.to_vec(), bias: 0.0 };
                    penalty(&p, &a, &y, &groups, mode).unwrap().value
                };
                let lhs = eval(&mix);
                let rhs = t * eval(&w1) + (1.0 - t) * eval(&w2);
                assert!(lhs <= rhs + 1e-9, "{mode:?}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn equal_cross_group_scores_zero_penalty() {
        // same-label scores equal across groups; within-label constant
        let scores = [1.3, 1.3, -0.7, -0.7, 1.3, -0.7];
        let y = [1, 1, 0, 0, 1, 0];
        let groups = [0, 1, 0, 1, 2, 2];
        for mode in
            [PenaltyMode::SignedOrdered, PenaltyMode::AbsolutePair, PenaltyMode::SquaredGroupMean]
        {
            let (v, _) = penalty_terms(&scores, &y, &groups, mode);
            assert!(v.value.abs() < 1e-15, "{mode:?}");
        }
    }
}
