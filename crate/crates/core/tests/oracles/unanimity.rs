use std::collections::BTreeMap;

use faitheval_core::corpus::tokenize;
use faitheval_core::hallu_stats::{doc_flags, unanimous_word_labels, UnionRule};
use faitheval_core::{PairKey, SpanAnnotation, SpanLabel};

const TEXT: &str = "w0 w1 w2 w3";
const WORDS: usize = 4;

/// Per-word label of one rater: 0 none, 1 intrinsic, 2 extrinsic.
fn decode(mut code: usize) -> [u8; WORDS] {
    let mut out = [0; WORDS];
    for slot in &mut out {
        *slot = (code % 3) as u8;
        code /= 3;
    }
    out
}

/// Maximal runs of equally labelled words become one span each.
fn spans(annotator: &str, labels: &[u8; WORDS]) -> Vec<SpanAnnotation> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < WORDS {
        if labels[i] == 0 {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < WORDS && labels[j + 1] == labels[i] {
            j += 1;
        }
        out.push(SpanAnnotation {
            doc_id: "d".into(),
            system_id: "s".into(),
            annotator_id: annotator.into(),
            label: if labels[i] == 1 { SpanLabel::Intrinsic } else { SpanLabel::Extrinsic },
            char_start: 3 * i,
            char_end: 3 * j + 2,
        });
        i = j + 1;
    }
    out
}

pub fn flags_match_exhaustive_enumeration() {
    let tokens = tokenize(TEXT);
    let pair = PairKey::new("d", "s");
    let per_rater = 3usize.pow(WORDS as u32);
    let configs: Vec<[u8; WORDS]> = (0..per_rater).map(decode).collect();
    let span_sets: Vec<[Vec<SpanAnnotation>; 3]> = configs
        .iter()
        .map(|c| [spans("a", c), spans("b", c), spans("c", c)])
        .collect();
    for (ia, a) in configs.iter().enumerate() {
        for (ib, b) in configs.iter().enumerate() {
            for (ic, c) in configs.iter().enumerate() {
                let subs = BTreeMap::from([
                    ("a".to_string(), span_sets[ia][0].clone()),
                    ("b".to_string(), span_sets[ib][1].clone()),
                    ("c".to_string(), span_sets[ic][2].clone()),
                ]);
                let words = unanimous_word_labels(&pair, &tokens, &subs, 3).unwrap();
                let mut any_i = false;
                let mut any_e = false;
                let mut any_all = false;
                for w in 0..WORDS {
                    let ui = a[w] == 1 && b[w] == 1 && c[w] == 1;
                    let ue = a[w] == 2 && b[w] == 2 && c[w] == 2;
                    let ua = a[w] != 0 && b[w] != 0 && c[w] != 0;
                    assert_eq!(words[w].unanimous_intrinsic, ui);
                    assert_eq!(words[w].unanimous_extrinsic, ue);
                    assert_eq!(words[w].unanimous_any, ua);
                    any_i |= ui;
                    any_e |= ue;
                    any_all |= ua;
                }
                let f = doc_flags(&pair, &tokens, &subs, None, 3, UnionRule::DocumentFlags).unwrap();
                assert_eq!((f.intrinsic, f.extrinsic), (any_i, any_e));
                assert_eq!(f.hallucinated, f.intrinsic || f.extrinsic);
                assert_eq!(f.faithful, !f.hallucinated);
                assert_eq!(f.factual, None);
                if (ia + ib + ic) % 5 == 0 {
                    let alt = doc_flags(&pair, &tokens, &subs, None, 3, UnionRule::AnyTypeUnanimous).unwrap();
                    assert_eq!(alt.hallucinated, any_all);
                }
            }
        }
    }
}
