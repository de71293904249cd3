use faitheval_core::entail_eval::select_summary;
use faitheval_core::qa_eval::normalize_answer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random strictly increasing map on [0, 1].
fn random_transform(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let a: f64 = rng.random_range(0.1..10.0);
    let b: f64 = rng.random_range(-5.0..5.0);
    let p: f64 = rng.random_range(0.2..4.0);
    let kind = rng.random_range(0..4);
    move |x: f64| match kind {
        0 => a * x + b,
        1 => x.powf(p) * a + b,
        2 => (a * x).exp() + b,
        _ => (x + 1.0).ln() * a - b,
    }
}

pub fn argmax_invariant_under_increasing_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let systems = ["berts2s", "ptgen", "tconvs2s", "trans2s"];
    for _ in 0..100 {
        let scores: Vec<(&str, f64)> = systems
            .iter()
            .map(|s| (*s, (rng.random_range(0..20) as f64) / 20.0))
            .collect();
        let base = select_summary("d", &scores).unwrap();
        let f = random_transform(&mut rng);
        let moved: Vec<(&str, f64)> = scores.iter().map(|&(s, v)| (s, f(v))).collect();
        assert_eq!(select_summary("d", &moved).unwrap().chosen_system, base.chosen_system);
    }
}

/// Characters drawn from letters, digits, punctuation, whitespace, combining
/// marks and non-Latin scripts.
fn random_string(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[&str] = &[
        "abcxyzABCXYZ", "0123456789", ".,;:!?'\"-()[]{}", " \t\n\u{a0}", "\u{301}\u{308}",
        "éüßøÅ", "The an a ", "汉字かなカナ", "’“”—…", "αβγΩ", "🙂#$%&*",
    ];
    let len = rng.random_range(0..40);
    (0..len)
        .map(|_| {
            let class: Vec<char> = POOL[rng.random_range(0..POOL.len())].chars().collect();
            class[rng.random_range(0..class.len())]
        })
        .collect()
}

pub fn normalize_is_idempotent_on_random_strings(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..cases {
        let s = random_string(&mut rng);
        let once = normalize_answer(&s);
        assert_eq!(normalize_answer(&once), once, "{s:?}");
    }
}
