//! Rank statistics and goodness-of-fit distances used by tests and checks.

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let pairs = |run: u64| run * (run - 1) / 2;
    let (mut tie_x, mut tie_xy) = (0u64, 0u64);
    let (mut rx, mut rxy) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            rx += 1;
            if y[a] == y[b] {
                rxy += 1;
            } else {
                tie_xy += pairs(rxy);
                rxy = 1;
            }
        } else {
            tie_x += pairs(rx);
            tie_xy += pairs(rxy);
            rx = 1;
            rxy = 1;
        }
    }
    tie_x += pairs(rx);
    tie_xy += pairs(rxy);

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tie_y = 0u64;
    let mut ry = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            ry += 1;
        } else {
            tie_y += pairs(ry);
            ry = 1;
        }
    }
    tie_y += pairs(ry);

    let n0 = pairs(n as u64);
    let num = n0 as f64 - tie_x as f64 - tie_y as f64 + tie_xy as f64 - 2.0 * swaps as f64;
    let den = ((n0 - tie_x) as f64 * (n0 - tie_y) as f64).sqrt();
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges slowly here; the cdf is < 1e-10
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov distance to U(0,1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS test against U(0,1).
pub fn ks_uniform_pvalue(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let d = ks_uniform(values);
    kolmogorov_sf((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS test.
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let en = (na * nb / (na + nb)).sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * ks_two_sample(a, b))
}

/// Two-sample Cramér–von Mises statistic `nm/(n+m) ∫ (F_n - G_m)^2 dH_{n+m}`.
pub fn cvm_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let mut all: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut fa, mut fb, mut s) = (0usize, 0usize, 0.0);
    let mut k = 0;
    while k < all.len() {
        let t = all[k].0;
        let mut mult = 0;
        while k < all.len() && all[k].0 == t {
            if all[k].1 {
                fa += 1;
            } else {
                fb += 1;
            }
            mult += 1;
            k += 1;
        }
        let d = fa as f64 / na as f64 - fb as f64 / nb as f64;
        s += mult as f64 * d * d;
    }
    let n = (na + nb) as f64;
    (na * nb) as f64 / (n * n) * s
}

/// Upper 1% point of the limiting two-sample Cramér–von Mises law.
pub const CVM_CRIT_01: f64 = 0.7435;
