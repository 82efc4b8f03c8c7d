//! Edit distance and correlation statistics.

/// A statistic is undefined for this input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("degenerate input: {0}")]
pub struct DegenerateInput(pub &'static str);

/// Harmonic mean of two percentages; 0 when either is 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    2.0 * a * b / (a + b)
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / longest as f64
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_pair(xs_len: usize, ys_len: usize) -> Result<(), DegenerateInput> {
    if xs_len != ys_len {
        return Err(DegenerateInput("inputs differ in length"));
    }
    if xs_len < 2 {
        return Err(DegenerateInput("fewer than two samples"));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, DegenerateInput> {
    check_pair(xs.len(), ys.len())?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DegenerateInput("constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64, DegenerateInput> {
    check_pair(xs.len(), ys.len())?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Point-biserial correlation between `xs` and a binary outcome.
pub fn point_biserial_r(xs: &[f64], flags: &[bool]) -> Result<f64, DegenerateInput> {
    check_pair(xs.len(), flags.len())?;
    let n = xs.len() as f64;
    let ones: Vec<f64> = xs
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(&x, _)| x)
        .collect();
    let zeros: Vec<f64> = xs
        .iter()
        .zip(flags)
        .filter(|(_, &f)| !f)
        .map(|(&x, _)| x)
        .collect();
    if ones.is_empty() || zeros.is_empty() {
        return Err(DegenerateInput("only one outcome class"));
    }
    let m = mean(xs);
    let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    if s == 0.0 {
        return Err(DegenerateInput("constant input"));
    }
    let p = ones.len() as f64 / n;
    let r = (mean(&ones) - mean(&zeros)) / s * (p * (1.0 - p)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}
