//! Brute-force null distributions for the rank tests.

/// Average 1-based ranks within one row.
pub fn ranks(row: &[f64]) -> Vec<f64> {
    row.iter()
        .map(|x| {
            let below = row.iter().filter(|y| *y < x).count() as f64;
            let equal = row.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn rank_sum_squares(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    (0..k)
        .map(|j| rows.iter().map(|r| ranks(r)[j]).sum::<f64>().powi(2))
        .sum()
}

pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in all_permutations(k - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

/// Share of the (k!)ⁿ row shufflings whose rank-sum spread reaches the
/// observed one.
pub fn friedman_permutation_p(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let perms = all_permutations(k);
    let observed = rank_sum_squares(rows);
    let n = rows.len();
    let total = perms.len().pow(n as u32);
    let mut hits = 0usize;
    for code in 0..total {
        let mut c = code;
        let shuffled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let p = &perms[c % perms.len()];
                c /= perms.len();
                p.iter().map(|&i| r[i]).collect()
            })
            .collect();
        if rank_sum_squares(&shuffled) >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Two-sided p by enumerating every sign pattern of the ranked differences.
pub fn wilcoxon_enumeration_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|x| *x != 0.0)
        .collect();
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let r = ranks(&mags);
    let n = d.len();
    let total: f64 = r.iter().sum();
    let w: f64 = r
        .iter()
        .zip(&d)
        .filter(|(_, x)| **x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let dev = (w - total / 2.0).abs();
    let mut hits = 0usize;
    for mask in 0..(1usize << n) {
        let wm: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if (wm - total / 2.0).abs() >= dev - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1usize << n) as f64
}
