//! Ranking metrics and the node-count/CTR analysis.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney rank statistic: the chance a
/// random positive outscores a random negative, ties counting one half.
///
/// Tied scores share their average rank, which gives the half credit.
/// The result is exact: rank sums are accumulated in doubled integer units.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("AUC needs both positive and negative labels".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled 1-based ranks of the positives; a tie group spanning
    // ranks lo..=hi gives every member rank (lo + hi) / 2.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled = (i + 1 + j + 1) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        doubled_rank_sum += doubled * positives;
        i = j + 1;
    }
    // Doubled Mann-Whitney U = 2·Σrank − pos·(pos + 1).
    let doubled_u = doubled_rank_sum - pos * (pos + 1);
    Ok(doubled_u as f64 / (2 * pos * neg) as f64)
}

/// `|model − base| / base × 100`.
pub fn relative_improvement(model_auc: f64, base_auc: f64) -> Result<f64> {
    if !(base_auc > 0.0) {
        return Err(Error::Contract(format!("base AUC must be positive, got {base_auc}")));
    }
    Ok((model_auc - base_auc).abs() / base_auc * 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CtrBucket {
    pub node_count: usize,
    pub ctr: f64,
    pub support: usize,
}

/// Mean label per subgraph node count, buckets ascending.
pub fn ctr_by_node_count(node_counts: &[usize], labels: &[u8]) -> Result<Vec<CtrBucket>> {
    if node_counts.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} node counts for {} labels",
            node_counts.len(),
            labels.len()
        )));
    }
    let mut buckets: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&n, &y) in node_counts.iter().zip(labels) {
        let b = buckets.entry(n).or_default();
        b.0 += y as usize;
        b.1 += 1;
    }
    Ok(buckets
        .into_iter()
        .map(|(node_count, (clicks, support))| CtrBucket {
            node_count,
            ctr: clicks as f64 / support as f64,
            support,
        })
        .collect())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks). `None` when either
/// side is constant or there are fewer than two points.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
