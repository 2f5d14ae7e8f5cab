use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Agreement between model distances and exact distances over a mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueErrorReport {
    pub pairs: usize,
    pub mean_absolute_error: f64,
    /// Mean of `|model - truth| / truth` over masked pairs with `truth > 0`.
    pub mean_relative_error: f64,
    pub spearman: f64,
    /// Set when either side is constant, in which case `spearman` is 0.
    pub degenerate: bool,
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties). `None` when either
/// input has zero rank variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

pub fn value_error_report(model: &[f64], truth: &[f64], mask: &[bool]) -> Result<ValueErrorReport> {
    check_len("value report model", truth.len(), model.len())?;
    check_len("value report mask", truth.len(), mask.len())?;
    let (mut m, mut t) = (Vec::new(), Vec::new());
    for ((&x, &y), &keep) in model.iter().zip(truth).zip(mask) {
        if keep {
            m.push(x);
            t.push(y);
        }
    }
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = m.len() as f64;
    let mae = m.iter().zip(&t).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let rel: Vec<f64> = m
        .iter()
        .zip(&t)
        .filter(|(_, &y)| y > 0.0)
        .map(|(x, y)| (x - y).abs() / y)
        .collect();
    let mre = if rel.is_empty() {
        0.0
    } else {
        rel.iter().sum::<f64>() / rel.len() as f64
    };
    let rho = spearman(&m, &t);
    Ok(ValueErrorReport {
        pairs: m.len(),
        mean_absolute_error: mae,
        mean_relative_error: mre,
        spearman: rho.unwrap_or(0.0),
        degenerate: rho.is_none(),
    })
}
