use std::cmp::Ordering;

use crate::error::{AnalysisError, InvalidInput};

fn tie_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> i64 {
    let mut total = 0i64;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sort by `total_cmp`, returning the number of inversions (pairs moved).
fn merge_count(v: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            merged.push(v[j]);
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Kendall's τ_b between two key vectors over the same items, in
/// O(n log n).
///
/// Equals τ_a when neither vector has ties. All keys tied in either vector
/// leaves the coefficient undefined.
pub fn kendall_tau(u: &[f64], v: &[f64]) -> Result<f64, AnalysisError> {
    if u.len() != v.len() {
        return Err(InvalidInput::new(format!("key vectors differ in length: {} vs {}", u.len(), v.len())).into());
    }
    let n = u.len();
    if n < 2 {
        return Err(AnalysisError::TooFew {
            what: "ranked attributes",
            needed: 2,
            found: n,
        });
    }
    if let Some(x) = u.iter().chain(v).find(|x| x.is_nan()) {
        return Err(InvalidInput::new(format!("ranking key {x} is not a number")).into());
    }
    // `+ 0.0` folds -0.0 into 0.0 so ordering and tie detection agree.
    let mut pairs: Vec<(f64, f64)> = u.iter().zip(v).map(|(a, b)| (a + 0.0, b + 0.0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n as i64) * (n as i64 - 1) / 2;
    let n1 = tie_pairs(&pairs, |a, b| a.0 == b.0);
    let n3 = tie_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut second: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut second);
    let n2 = tie_pairs(&second, |a, b| a == b);
    if n1 == n0 || n2 == n0 {
        return Err(AnalysisError::UndefinedCorrelation(
            "every key in one of the vectors is tied".into(),
        ));
    }
    let s = n0 - n1 - n2 + n3 - 2 * swaps;
    Ok(s as f64 / (((n0 - n1) * (n0 - n2)) as f64).sqrt())
}
