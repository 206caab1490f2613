//! Small descriptive statistics used by the reward, the experiment harness and
//! the acceptance checks.

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Percentile `q` in [0, 1] with linear interpolation between the two closest
/// ranks (position `q·(n−1)` in the sorted sample).
pub fn percentile_linear(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lower = pos.floor() as usize;
    let upper = pos.ceil() as usize;
    let frac = pos - lower as f64;
    sorted[lower] + frac * (sorted[upper] - sorted[lower])
}

/// Standard deviation of each trailing window of `window` values; entry `k`
/// covers `series[k..k + window]`.
pub fn rolling_std(series: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || series.len() < window {
        return Vec::new();
    }
    series.windows(window).map(std_dev).collect()
}

/// 1-based episode after which the rolling standard deviation stays below
/// `tolerance · |plateau mean|`, where the plateau mean is the mean of the
/// last `window` values. `None` if the series never settles.
pub fn episodes_to_plateau(series: &[f64], window: usize, tolerance: f64) -> Option<usize> {
    let rolling = rolling_std(series, window);
    if rolling.is_empty() {
        return None;
    }
    let plateau = mean(&series[series.len() - window..]).abs();
    let bound = tolerance * plateau;
    let last_violation = rolling.iter().rposition(|&s| !(s < bound));
    match last_violation {
        None => Some(window),
        Some(k) if k + 1 < rolling.len() => Some(k + 1 + window),
        Some(_) => None,
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // average rank over the tie group, 1-based
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// sample is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Least-squares polynomial fit of the given degree; returns coefficients
/// (constant term first) and the coefficient of determination.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Option<(Vec<f64>, f64)> {
    let n = degree + 1;
    if x.len() != y.len() || x.len() < n {
        return None;
    }
    // normal equations, solved by Gaussian elimination with partial pivoting
    let mut a = vec![vec![0.0; n + 1]; n];
    for (&xi, &yi) in x.iter().zip(y) {
        let powers: Vec<f64> = (0..n).map(|p| xi.powi(p as i32)).collect();
        for r in 0..n {
            for c in 0..n {
                a[r][c] += powers[r] * powers[c];
            }
            a[r][n] += powers[r] * yi;
        }
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    let coeffs: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();

    let my = mean(y);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let fit: f64 = coeffs.iter().enumerate().map(|(p, c)| c * xi.powi(p as i32)).sum();
        ss_res += (yi - fit) * (yi - fit);
        ss_tot += (yi - my) * (yi - my);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some((coeffs, r2))
}
