use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Integer chunk counts over a common denominator `q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunking {
    pub q: u64,
    /// One count per input rate, in input order.
    pub counts: Vec<u64>,
}

const RATIONAL_TOL: f64 = 1e-9;

/// Smallest denominator `q <= q_max` with `|x - p/q| <= tol`, from the
/// continued-fraction convergents of `x`.
fn small_denominator(x: f64, q_max: u64) -> Option<u64> {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (h2, k2) = (a as i128 * h1 + h0, a as i128 * k1 + k0);
        if k2 > q_max as i128 {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= RATIONAL_TOL {
            return Some(k2 as u64);
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Quantizes one family of rates, usually the split of a single shard.
pub fn quantize_flows(rates: &[f64], q_max: u64) -> Result<Chunking> {
    let (q, mut counts) = quantize_groups(&[rates], q_max)?;
    Ok(Chunking { q, counts: counts.pop().unwrap_or_default() })
}

/// Common denominator and per-group counts. When every rate is within 1e-9
/// of a fraction whose denominators have an LCM of at most `q_max`, that LCM
/// is used exactly; otherwise `q = q_max` and counts are rounded by largest
/// remainder so each group's total is `round(q * sum)`. A positive rate that
/// would get no chunks is bumped to one, taken from the group's largest count.
pub fn quantize_groups(groups: &[&[f64]], q_max: u64) -> Result<(u64, Vec<Vec<u64>>)> {
    if q_max == 0 {
        return Err(invalid("q_max must be at least 1"));
    }
    for &r in groups.iter().flat_map(|g| g.iter()) {
        if !(r > 0.0 && r <= 1.0 + RATIONAL_TOL) {
            return Err(invalid(format!("rate {r} outside (0, 1]")));
        }
    }
    let mut lcm = Some(1u64);
    for &r in groups.iter().flat_map(|g| g.iter()) {
        lcm = lcm.and_then(|l| small_denominator(r, q_max).map(|q| l.lcm(&q))).filter(|&l| l <= q_max);
    }
    if let Some(q) = lcm {
        let counts: Vec<Vec<u64>> = groups.iter().map(|g| g.iter().map(|&r| (r * q as f64).round() as u64).collect()).collect();
        if counts.iter().flatten().all(|&c| c > 0) {
            return Ok((q, counts));
        }
    }
    let q = q_max;
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let scaled: Vec<f64> = g.iter().map(|&r| r * q as f64).collect();
        let target = scaled.iter().sum::<f64>().round() as u64;
        let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())).then(a.cmp(&b)));
        let short = target.saturating_sub(counts.iter().sum());
        for &i in order.iter().cycle().take(short as usize) {
            counts[i] += 1;
        }
        for i in 0..counts.len() {
            if counts[i] == 0 {
                let donor = (0..counts.len()).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
                if counts[donor] < 2 {
                    return Err(invalid(format!("{} rates cannot share {q} chunks", g.len())));
                }
                log::warn!("rate {} rounds to no chunks at q = {q}; giving it one", g[i]);
                counts[donor] -= 1;
                counts[i] = 1;
            }
        }
        out.push(counts);
    }
    Ok((q, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_thirds() {
        assert_eq!(quantize_flows(&[1.0 / 3.0, 2.0 / 3.0], 1024).unwrap(), Chunking { q: 3, counts: vec![1, 2] });
        assert_eq!(quantize_flows(&[1.0], 1024).unwrap(), Chunking { q: 1, counts: vec![1] });
    }

    #[test]
    fn percent_split() {
        assert_eq!(quantize_flows(&[0.43, 0.57], 100).unwrap(), Chunking { q: 100, counts: vec![43, 57] });
    }

    #[test]
    fn irrational_falls_back_to_q_max() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = quantize_flows(&[r, 1.0 - r], 64).unwrap();
        assert_eq!(c.q, 64);
        assert_eq!(c.counts.iter().sum::<u64>(), 64);
        assert_eq!(c.counts, vec![45, 19]);
    }

    #[test]
    fn tiny_rate_gets_one_chunk() {
        let c = quantize_flows(&[1e-4 * std::f64::consts::PI, 1.0 - 1e-4 * std::f64::consts::PI], 16).unwrap();
        assert_eq!(c.counts, vec![1, 15]);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(quantize_flows(&[0.0, 1.0], 8).is_err());
        assert!(quantize_flows(&[1.5], 8).is_err());
        assert!(quantize_flows(&[0.5], 0).is_err());
    }
}
