use crate::autodiff::Tensor;

pub fn accuracy(y: &[usize], proba: &Tensor) -> f64 {
    let hits = y
        .iter()
        .enumerate()
        .filter(|&(i, &t)| crate::encoder::argmax(proba.row(i)) == t)
        .count();
    hits as f64 / y.len().max(1) as f64
}

fn binary_f1(y: &[usize], pred: &[usize], positive: usize) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
    for (&t, &p) in y.iter().zip(pred) {
        match (t == positive, p == positive) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fneg += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// F1 of class 1 for binary targets, macro-averaged otherwise.
pub fn f1(y: &[usize], proba: &Tensor) -> f64 {
    let pred: Vec<usize> = (0..proba.rows).map(|i| crate::encoder::argmax(proba.row(i))).collect();
    let k = proba.cols;
    if k == 2 {
        binary_f1(y, &pred, 1)
    } else {
        (0..k).map(|c| binary_f1(y, &pred, c)).sum::<f64>() / k as f64
    }
}

/// Binary ROC AUC via the Mann-Whitney statistic with midranks for ties.
/// Returns `None` when one class is absent.
pub fn binary_auc(positive: &[bool], score: &[f64]) -> Option<f64> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]));
    let mut ranks = vec![0.0; score.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && score[order[j + 1]] == score[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let r: f64 = positive.iter().zip(&ranks).filter(|p| *p.0).map(|p| p.1).sum();
    Some((r - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Average precision, `sum_n (R_n - R_{n-1}) P_n` over distinct score
/// thresholds in decreasing order.
pub fn binary_average_precision(positive: &[bool], score: &[f64]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    if n_pos == 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = score[order[i]];
        while i < order.len() && score[order[i]] == s {
            seen += 1.0;
            if positive[order[i]] {
                tp += 1.0;
            }
            i += 1;
        }
        let recall = tp / n_pos;
        ap += (recall - prev_recall) * (tp / seen);
        prev_recall = recall;
    }
    Some(ap)
}

/// One-vs-rest macro average of a binary score over classes present in `y`.
fn one_vs_rest(y: &[usize], proba: &Tensor, f: fn(&[bool], &[f64]) -> Option<f64>) -> f64 {
    let classes: Vec<usize> = if proba.cols == 2 { vec![1] } else { (0..proba.cols).collect() };
    let vals: Vec<f64> = classes
        .into_iter()
        .filter_map(|c| {
            let pos: Vec<bool> = y.iter().map(|&t| t == c).collect();
            let s: Vec<f64> = (0..proba.rows).map(|i| proba.row(i)[c]).collect();
            f(&pos, &s)
        })
        .collect();
    if vals.is_empty() {
        0.5
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn auc(y: &[usize], proba: &Tensor) -> f64 {
    one_vs_rest(y, proba, binary_auc)
}

pub fn average_precision(y: &[usize], proba: &Tensor) -> f64 {
    one_vs_rest(y, proba, binary_average_precision)
}
