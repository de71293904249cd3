use faitheval_core::agreement::{fleiss_kappa, ItemCategoryCounts};
use num_rational::Ratio;

type Q = Ratio<i64>;

/// Fleiss' kappa with exact rational arithmetic; `None` is the degenerate
/// single-category case.
fn exact_kappa(rows: &[Vec<usize>], raters: usize) -> Option<Q> {
    let n = rows.len() as i64;
    let big_n = raters as i64;
    let k = rows[0].len();
    let p_i: Vec<Q> = rows
        .iter()
        .map(|r| {
            let sq: i64 = r.iter().map(|&c| (c * c) as i64).sum();
            Q::new(sq - big_n, big_n * (big_n - 1))
        })
        .collect();
    let p_bar = p_i.iter().fold(Q::from(0), |a, b| a + b) / Q::from(n);
    let p_e = (0..k)
        .map(|j| {
            let col: i64 = rows.iter().map(|r| r[j] as i64).sum();
            let p = Q::new(col, n * big_n);
            p * p
        })
        .fold(Q::from(0), |a, b| a + b);
    if p_e == Q::from(1) {
        return None;
    }
    Some((p_bar - p_e) / (Q::from(1) - p_e))
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn matrices(n: usize, rows: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    if n == 0 {
        return vec![vec![]];
    }
    matrices(n - 1, rows)
        .into_iter()
        .flat_map(|m| {
            rows.iter().map(move |r| {
                let mut m = m.clone();
                m.push(r.clone());
                m
            })
        })
        .collect()
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

pub fn matches_exact_oracle_on_all_small_matrices() {
    let mut checked = 0;
    for k in 1..=3 {
        let rows = compositions(3, k);
        for n in 1..=4 {
            for m in matrices(n, &rows) {
                let got = fleiss_kappa(&ItemCategoryCounts { raters: 3, rows: m.clone() }).unwrap();
                match exact_kappa(&m, 3) {
                    None => assert_eq!(got, 1.0, "{m:?}"),
                    Some(q) => assert!((got - to_f64(q)).abs() < 1e-12, "{m:?}: {got} vs {q}"),
                }
                assert!(got <= 1.0 + 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000);
}

pub fn hand_example() {
    let k = fleiss_kappa(&ItemCategoryCounts { raters: 3, rows: vec![vec![2, 1], vec![0, 3]] }).unwrap();
    assert!((k - 0.25).abs() < 1e-12);
    assert_eq!(exact_kappa(&[vec![2, 1], vec![0, 3]], 3), Some(Q::new(1, 4)));
}
