//! Reference statistics computed by routes unrelated to the library's.

use nalgebra::{DMatrix, DVector};

/// Step-up rejection set without sorting: the largest `k` for which at least
/// `k` p-values lie at or below `k alpha / m`, then everything under that line.
pub fn bh_reject(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let line = |k: usize| k as f64 * alpha / m as f64;
    let k = (1..=m)
        .filter(|&k| p.iter().filter(|&&x| x <= line(k)).count() >= k)
        .max();
    match k {
        Some(k) => p.iter().map(|&x| x <= line(k)).collect(),
        None => vec![false; m],
    }
}

/// Sum-to-zero coding of a factor with `levels` levels.
fn effect_code(level: usize, levels: usize) -> Vec<f64> {
    (0..levels - 1)
        .map(|c| {
            if level == levels - 1 {
                -1.0
            } else if level == c {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

fn rss(columns: &[Vec<f64>], y: &DVector<f64>) -> f64 {
    let rows = y.len();
    let x = DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
    let xt = x.transpose();
    let beta = (&xt * &x).cholesky().expect("full column rank").solve(&(&xt * y));
    (y - x * beta).norm_squared()
}

/// F statistics for state, time and their interaction from nested linear
/// models with subject terms; the full model leaves subject x state x time
/// as residual.
pub fn rm_anova_f(data: &[f64], n: usize, a: usize, b: usize) -> [f64; 3] {
    // Columns per term: intercept, S, A, B, SA, SB, AB.
    let mut terms: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 7];
    let mut y = Vec::new();
    for i in 0..n {
        for j in 0..a {
            for k in 0..b {
                let (s, st, t) = (effect_code(i, n), effect_code(j, a), effect_code(k, b));
                let row = [vec![1.0], s.clone(), st.clone(), t.clone(), product(&s, &st), product(&s, &t), product(&st, &t)];
                for (term, vals) in terms.iter_mut().zip(row) {
                    if term.is_empty() {
                        term.resize(vals.len(), Vec::new());
                    }
                    for (col, v) in term.iter_mut().zip(vals) {
                        col.push(v);
                    }
                }
                y.push(data[(i * a + j) * b + k]);
            }
        }
    }
    let y = DVector::from_vec(y);
    let without = |skip: Option<usize>| {
        let cols: Vec<Vec<f64>> = terms
            .iter()
            .enumerate()
            .filter(|(t, _)| Some(*t) != skip)
            .flat_map(|(_, c)| c.iter().cloned())
            .collect();
        rss(&cols, &y)
    };
    let full = without(None);
    let ss = |term| without(Some(term)) - full;
    let (nf, af, bf) = ((n - 1) as f64, (a - 1) as f64, (b - 1) as f64);
    let f = |effect: f64, df_e: f64, error: f64, df_r: f64| (effect / df_e) / (error / df_r);
    [
        f(ss(2), af, ss(4), af * nf),
        f(ss(3), bf, ss(5), bf * nf),
        f(ss(6), af * bf, full, af * bf * nf),
    ]
}

/// One-way F from the same construction with a single time level.
pub fn rm_anova_oneway_f(rows: &[Vec<f64>]) -> f64 {
    let (n, a) = (rows.len(), rows[0].len());
    let mut subject = Vec::new();
    let mut state = Vec::new();
    let mut y = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            subject.push(effect_code(i, n));
            state.push(effect_code(j, a));
            y.push(*v);
        }
    }
    let y = DVector::from_vec(y);
    let cols = |with_state: bool| {
        let mut c = vec![vec![1.0; y.len()]];
        for d in 0..n - 1 {
            c.push(subject.iter().map(|s| s[d]).collect());
        }
        if with_state {
            for d in 0..a - 1 {
                c.push(state.iter().map(|s| s[d]).collect());
            }
        }
        c
    };
    let full = rss(&cols(true), &y);
    let ss_state = rss(&cols(false), &y) - full;
    let (nf, af) = ((n - 1) as f64, (a - 1) as f64);
    (ss_state / af) / (full / (af * nf))
}
