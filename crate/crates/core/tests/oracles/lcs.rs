use faitheval_core::corpus::tokenize;
use faitheval_core::rouge::{lcs_len, rouge_l};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Longest common subsequence by enumerating every subsequence of the shorter side.
fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let ones = mask.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let sub: Vec<u8> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| short[i]).collect();
        let mut it = long.iter();
        if sub.iter().all(|c| it.any(|x| x == c)) {
            best = ones;
        }
    }
    best
}

fn all_sequences(max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s: &Vec<u8>| (0..3u8).map(move |c| [s.as_slice(), &[c]].concat()))
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn text(s: &[u8]) -> String {
    s.iter().map(|c| ["a", "b", "c"][*c as usize]).collect::<Vec<_>>().join(" ")
}

pub fn exhaustive_pairs_up_to_combined_length_eight() {
    let seqs = all_sequences(8);
    let mut checked = 0;
    for a in &seqs {
        for b in seqs.iter().filter(|b| a.len() + b.len() <= 8) {
            assert_eq!(lcs_len(a, b), brute_lcs(a, b), "{a:?} {b:?}");
            checked += 1;
        }
    }
    assert!(checked > 80_000);
}

pub fn every_sequence_up_to_eight_against_sampled_references() {
    let seqs = all_sequences(8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let refs: Vec<Vec<u8>> = (0..12)
        .map(|i| (0..(i % 9)).map(|_| rng.random_range(0..3u8)).collect())
        .collect();
    for a in &seqs {
        for b in &refs {
            assert_eq!(lcs_len(a, b), brute_lcs(a, b), "{a:?} {b:?}");
        }
    }
}

pub fn rouge_l_uses_the_lcs() {
    let seqs = all_sequences(4);
    for a in seqs.iter().filter(|s| !s.is_empty()) {
        for b in seqs.iter().filter(|s| !s.is_empty()) {
            let l = brute_lcs(a, b) as f64;
            let s = rouge_l(&tokenize(&text(a)), &tokenize(&text(b)));
            assert!((s.precision - l / a.len() as f64).abs() < 1e-12);
            assert!((s.recall - l / b.len() as f64).abs() < 1e-12);
        }
    }
}
