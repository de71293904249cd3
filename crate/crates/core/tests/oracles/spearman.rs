use faitheval_core::correlation::{spearman, CorrelationError};

/// Average rank from explicit counts: ties share the mean of their positions.
fn explicit_ranks(xs: &[i64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle(xs: &[i64], ys: &[i64]) -> Option<f64> {
    let (rx, ry) = (explicit_ranks(xs), explicit_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn series(len: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(len as u32))
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let v = (code % 3) as i64 + 1;
                    code /= 3;
                    v
                })
                .collect()
        })
        .collect()
}

pub fn matches_explicit_rank_oracle() {
    for len in 2..=6 {
        let all = series(len);
        for xs in &all {
            for ys in &all {
                let fx: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
                let fy: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
                match (spearman(&fx, &fy), oracle(xs, ys)) {
                    (Ok(r), Some(o)) => assert!((r - o).abs() < 1e-12, "{xs:?} {ys:?}"),
                    (Err(CorrelationError::DegenerateSeries), None) => {}
                    (got, want) => panic!("{xs:?} {ys:?}: {got:?} vs {want:?}"),
                }
            }
        }
    }
}

pub fn ties_example() {
    let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((r - 0.9486832980505138).abs() < 1e-9);
    assert!((oracle(&[1, 2, 2, 4], &[1, 3, 2, 4]).unwrap() - r).abs() < 1e-12);
}
