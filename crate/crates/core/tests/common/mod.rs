//! Independent reference implementations used by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ctpanel_core::affect::AuSet;
use ctpanel_core::reliability::RatingMatrix;

/// ICC(2,1) from the textbook two-way ANOVA mean squares.
pub fn icc_anova(data: &[Vec<f64>]) -> f64 {
    let n = data.len();
    let k = data[0].len();
    let (nf, kf) = (n as f64, k as f64);
    let mut total = 0.0;
    for row in data {
        for &x in row {
            total += x;
        }
    }
    let grand = total / (nf * kf);
    let mut ss_rows = 0.0;
    for row in data {
        let m: f64 = row.iter().sum::<f64>() / kf;
        ss_rows += kf * (m - grand) * (m - grand);
    }
    let mut ss_cols = 0.0;
    for j in 0..k {
        let m: f64 = data.iter().map(|r| r[j]).sum::<f64>() / nf;
        ss_cols += nf * (m - grand) * (m - grand);
    }
    let mut ss_total = 0.0;
    for row in data {
        for &x in row {
            ss_total += (x - grand) * (x - grand);
        }
    }
    let ss_err = ss_total - ss_rows - ss_cols;
    let msr = ss_rows / (nf - 1.0);
    let msc = ss_cols / (kf - 1.0);
    let mse = ss_err / ((nf - 1.0) * (kf - 1.0));
    (msr - mse) / (msr + (kf - 1.0) * mse + kf * (msc - mse) / nf)
}

/// Krippendorff's alpha by direct enumeration of value pairs, without a
/// coincidence matrix. `ordinal` selects the rank-based metric.
pub fn alpha_pairs(rows: &[Vec<Option<u8>>], levels: u8, ordinal: bool) -> f64 {
    let units: Vec<Vec<u8>> = rows
        .iter()
        .map(|r| r.iter().flatten().copied().collect::<Vec<u8>>())
        .filter(|u| u.len() >= 2)
        .collect();
    let pooled: Vec<u8> = units.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let count = |c: u8| pooled.iter().filter(|&&v| v == c).count() as f64;
    let delta = |a: u8, b: u8| -> f64 {
        if !ordinal {
            return if a == b { 0.0 } else { 1.0 };
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut s = 0.0;
        for g in lo..=hi {
            s += count(g);
        }
        s -= (count(a) + count(b)) / 2.0;
        s * s
    };
    let _ = levels;
    let mut d_o = 0.0;
    for u in &units {
        let m = u.len() as f64;
        let mut s = 0.0;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    s += delta(u[i], u[j]);
                }
            }
        }
        d_o += s / (m - 1.0);
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                d_e += delta(pooled[i], pooled[j]);
            }
        }
    }
    d_e /= n * (n - 1.0);
    1.0 - d_o / d_e
}

/// Random units × raters matrix over `levels` ordinal scores that is not
/// constant, with each cell missing with probability `p_missing`.
pub fn random_ratings(rng: &mut ChaCha8Rng, p_missing: f64) -> (Vec<String>, Vec<Vec<Option<u8>>>) {
    loop {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(4..=12);
        let rows: Vec<Vec<Option<u8>>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|_| (!rng.random_bool(p_missing)).then(|| rng.random_range(0..3u8)))
                    .collect()
            })
            .collect();
        let complete: Vec<&Vec<Option<u8>>> = rows.iter().filter(|r| r.iter().all(Option::is_some)).collect();
        let values: Vec<u8> = complete.iter().flat_map(|r| r.iter().flatten()).copied().collect();
        let varied = values.windows(2).any(|w| w[0] != w[1]);
        if complete.len() >= 2 && varied {
            let raters = (0..k).map(|i| format!("r{i}")).collect();
            return (raters, rows);
        }
    }
}

pub fn complete_rows(rows: &[Vec<Option<u8>>]) -> Vec<Vec<f64>> {
    rows.iter()
        .filter(|r| r.iter().all(Option::is_some))
        .map(|r| r.iter().map(|v| f64::from(v.unwrap())).collect())
        .collect()
}

/// Highest ICC over every rater subset of size ≥ `min_size`, by plain
/// recursion over include/exclude choices.
pub fn best_subset_icc(matrix: &RatingMatrix, min_size: usize) -> Option<f64> {
    fn go(matrix: &RatingMatrix, i: usize, chosen: &mut Vec<usize>, min_size: usize, best: &mut Option<f64>) {
        if i == matrix.raters().len() {
            if chosen.len() >= min_size {
                let rows: Vec<Vec<Option<u8>>> = matrix
                    .rows()
                    .iter()
                    .map(|r| chosen.iter().map(|&c| r[c]).collect())
                    .collect();
                let data = complete_rows(&rows);
                let flat: Vec<f64> = data.iter().flatten().copied().collect();
                if data.len() >= 2 && flat.iter().any(|&x| x != flat[0]) {
                    let v = icc_anova(&data);
                    if best.is_none_or(|b| v > b) {
                        *best = Some(v);
                    }
                }
            }
            return;
        }
        chosen.push(i);
        go(matrix, i + 1, chosen, min_size, best);
        chosen.pop();
        go(matrix, i + 1, chosen, min_size, best);
    }
    let mut best = None;
    go(matrix, 0, &mut Vec::new(), min_size, &mut best);
    best
}

/// The five facial affect rules written out as boolean expressions.
pub fn affect_oracle(au: AuSet) -> Vec<&'static str> {
    let on = |c: u8| au.contains(c);
    let mut out = Vec::new();
    if on(6) && on(12) {
        out.push("joy");
    }
    if on(7) && on(12) && on(25) && on(26) && !on(45) {
        out.push("delight");
    }
    if on(1) && on(2) && on(5) && on(26) {
        out.push("surprise");
    }
    if on(4) && on(7) && !on(12) {
        out.push("confusion");
    }
    if on(23) && on(5) && on(7) && !on(15) && !on(45) && !on(2) {
        out.push("flow");
    }
    out
}
