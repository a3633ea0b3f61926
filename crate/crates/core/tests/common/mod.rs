//! Reference computations shared by the oracle and acceptance targets.
#![allow(dead_code)]

use erasure_core::metrics::Scored;

/// `λ·Σ p ln p` evaluated from raw logits with its own softmax.
pub fn neg_entropy_of_logits(z: &[f64], lambda: f64) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    lambda * e.iter().map(|v| v / s).filter(|p| *p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

pub fn central_difference(z: &[f64], lambda: f64, h: f64) -> Vec<f64> {
    (0..z.len())
        .map(|k| {
            let mut up = z.to_vec();
            let mut down = z.to_vec();
            up[k] += h;
            down[k] -= h;
            (neg_entropy_of_logits(&up, lambda) - neg_entropy_of_logits(&down, lambda)) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor so near-zero components compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

pub fn ulps(a: f64, b: f64) -> u64 {
    let (x, y) = (a.to_bits() as i64, b.to_bits() as i64);
    if (x < 0) != (y < 0) {
        return if a == b { 0 } else { u64::MAX };
    }
    x.abs_diff(y)
}

/// Straight-line recount of fa, ra, il, per, far, frr, erb.
pub fn recount(scored: &[Scored], forget: &[usize], original_fa: f64) -> [Option<f64>; 7] {
    let in_f = |c: usize| forget.contains(&c);
    let fs: Vec<&Scored> = scored.iter().filter(|s| in_f(s.class)).collect();
    let rs: Vec<&Scored> = scored.iter().filter(|s| !in_f(s.class)).collect();
    let share = |v: &[&Scored], pred: &dyn Fn(&Scored) -> bool| {
        if v.is_empty() {
            None
        } else {
            Some(100.0 * v.iter().filter(|s| pred(s)).count() as f64 / v.len() as f64)
        }
    };
    let fa = share(&fs, &|s| s.predicted == s.class);
    let ra = share(&rs, &|s| s.predicted == s.class);
    let far = share(&rs, &|s| in_f(s.predicted));
    let frr = share(&fs, &|s| !in_f(s.predicted));
    let il = if fs.is_empty() { 0.0 } else { 100.0 * fs.iter().map(|s| s.forget_mass).sum::<f64>() / fs.len() as f64 };
    let per = fa.filter(|_| original_fa > 0.0).map(|fa| 100.0 * (original_fa - fa) / original_fa);
    let erb = match (fa, ra) {
        (Some(a), Some(r)) if a + r > 0.0 => Some(2.0 * a * r / (a + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    [fa, ra, Some(il), per, far, frr, erb]
}

pub const METRIC_NAMES: [&str; 7] = ["fa", "ra", "il", "per", "far", "frr", "erb"];
