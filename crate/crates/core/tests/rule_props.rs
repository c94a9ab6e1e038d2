use std::path::Path;
use std::time::Instant;

use lemma_engine::conllu::parse_bytes;
use lemma_engine::rule::{longest_common_root, min_edit_script, EditOp, LemmaRule, Root};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn reference_rules() -> Vec<(String, String, String)> {
    std::fs::read_to_string(data("reference_rules.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let mut it = l.split('\t');
            let f = it.next().unwrap().to_owned();
            let lem = it.next().unwrap().to_owned();
            let r = it.next().unwrap().to_owned();
            (f, lem, r)
        })
        .collect()
}

/// All `(form, lemma)` pairs of the Latin fixture corpus.
fn fixture_pairs() -> Vec<(String, String)> {
    let dir = data("latin");
    let mut pairs = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conllu"))
        .collect();
    names.sort();
    for path in names {
        let doc = parse_bytes(&std::fs::read(&path).unwrap()).unwrap();
        for s in &doc.sentences {
            for t in s.words() {
                pairs.push((t.form.clone(), t.lemma.clone().unwrap()));
            }
        }
    }
    pairs
}

fn brute_force_root(form: &[char], lemma: &[char]) -> Option<Root> {
    let mut best: Option<Root> = None;
    for ls in 0..lemma.len() {
        for fs in 0..form.len() {
            for len in 1..=(lemma.len() - ls).min(form.len() - fs) {
                if form[fs..fs + len] != lemma[ls..ls + len] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        len > b.len
                            || (len == b.len
                                && (ls < b.lemma_start
                                    || (ls == b.lemma_start && fs < b.form_start)))
                    }
                };
                if better {
                    best = Some(Root {
                        form_start: fs,
                        lemma_start: ls,
                        len,
                    });
                }
            }
        }
    }
    best
}

/// Insert/delete edit distance with free matches.
fn dp_cost(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        for j in 0..=b.len() {
            d[i][j] = if i == 0 {
                j
            } else if j == 0 {
                i
            } else {
                let mut v = (d[i - 1][j] + 1).min(d[i][j - 1] + 1);
                if a[i - 1] == b[j - 1] {
                    v = v.min(d[i - 1][j - 1]);
                }
                v
            };
        }
    }
    d[a.len()][b.len()]
}

fn run_script(ops: &[EditOp], source: &[char]) -> Option<String> {
    let mut out = String::new();
    let mut pos = 0;
    for op in ops {
        match *op {
            EditOp::Delete => pos += 1,
            EditOp::Copy => {
                out.push(*source.get(pos)?);
                pos += 1;
            }
            EditOp::Insert(c) => out.push(c),
        }
    }
    (pos == source.len()).then_some(out)
}

const ALPHABET: &[char] = &[
    'a', 'b', 'e', 'i', 'u', 's', 'A', 'B', 'E', 'ß', 'İ', 'K', 'ǅ', 'é', 'É', 'ω', 'Ω', '¦', ';',
    '→', '+', '-', '↑', '↓', '0', '1', '.', ' ', '字',
];

fn random_string(rng: &mut ChaCha8Rng, max: usize) -> String {
    let len = rng.gen_range(1..=max);
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.2) {
                // any scalar value outside the surrogate gap
                loop {
                    if let Some(c) = char::from_u32(rng.gen_range(0x20..0x3_0000)) {
                        break c;
                    }
                }
            } else {
                ALPHABET[rng.gen_range(0..ALPHABET.len())]
            }
        })
        .collect()
}

#[test]
fn reference_rules_are_exact() {
    for (form, lemma, expected) in reference_rules() {
        let rule = LemmaRule::encode(&form, &lemma, false).unwrap();
        assert_eq!(rule.to_string(), expected, "{form} -> {lemma}");
        assert_eq!(rule.apply(&form).unwrap(), lemma);
        let parsed: LemmaRule = expected.parse().unwrap();
        assert_eq!(parsed, rule);
    }
}

#[test]
fn round_trip_on_fixture_corpus() {
    let pairs = fixture_pairs();
    assert!(pairs.len() >= 5000, "fixture has {} tokens", pairs.len());
    for copy in [false, true] {
        for (form, lemma) in &pairs {
            let rule = LemmaRule::encode(form, lemma, copy).unwrap();
            let text = rule.to_string();
            let rule: LemmaRule = text.parse().unwrap();
            assert_eq!(&rule.apply(form).unwrap(), lemma, "{form} {lemma} {text}");
        }
    }
}

#[test]
fn round_trip_on_fuzzed_unicode() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let form = random_string(&mut rng, 12);
        let lemma = random_string(&mut rng, 12);
        for copy in [false, true] {
            let rule = LemmaRule::encode(&form, &lemma, copy).unwrap();
            let text = rule.to_string();
            let parsed: LemmaRule = text
                .parse()
                .unwrap_or_else(|e| panic!("{text:?} from {form:?} {lemma:?}: {e}"));
            assert_eq!(parsed, rule);
            assert_eq!(
                parsed.apply(&form).unwrap(),
                lemma,
                "{form:?} {lemma:?} {text:?}"
            );
        }
    }
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn root_matches_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let small = ['a', 'b', 'c', 'ä'];
    for _ in 0..1000 {
        let gen = |rng: &mut ChaCha8Rng| -> String {
            let len = rng.gen_range(0..=12);
            (0..len)
                .map(|_| small[rng.gen_range(0..small.len())])
                .collect()
        };
        let form = gen(&mut rng);
        let lemma = gen(&mut rng);
        let f: Vec<char> = form.chars().collect();
        let l: Vec<char> = lemma.chars().collect();
        assert_eq!(
            longest_common_root(&form, &lemma),
            brute_force_root(&f, &l),
            "{form} {lemma}"
        );
    }
}

proptest! {
    #[test]
    fn root_oracle(form in "[abcä]{0,12}", lemma in "[abcä]{0,12}") {
        let f: Vec<char> = form.chars().collect();
        let l: Vec<char> = lemma.chars().collect();
        prop_assert_eq!(longest_common_root(&form, &lemma), brute_force_root(&f, &l));
    }

    #[test]
    fn edit_cost_oracle(a in "[abc→+]{0,12}", b in "[abc→+]{0,12}") {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        let ops = min_edit_script(&a, &b, true);
        let cost: usize = ops.iter().map(|op| op.cost()).sum();
        prop_assert_eq!(cost, dp_cost(&ac, &bc));
        prop_assert_eq!(run_script(&ops, &ac), Some(b.clone()));

        let plain = min_edit_script(&a, &b, false);
        prop_assert!(plain.iter().all(|op| *op != EditOp::Copy));
        prop_assert_eq!(run_script(&plain, &ac), Some(b));
    }

    #[test]
    fn round_trip_any_text(form in "\\PC{1,10}", lemma in "\\PC{1,10}", copy: bool) {
        let rule = LemmaRule::encode(&form, &lemma, copy).unwrap();
        let parsed: LemmaRule = rule.to_string().parse().unwrap();
        prop_assert_eq!(parsed.apply(&form).unwrap(), lemma);
    }

    #[test]
    fn applicability_matches_apply(
        form in "[a-zA-Z]{1,8}",
        lemma in "[a-zA-Z]{1,8}",
        target in "[a-zA-Z]{0,8}",
        copy: bool,
    ) {
        let rule = LemmaRule::encode(&form, &lemma, copy).unwrap();
        prop_assert_eq!(rule.is_applicable(&target), rule.apply(&target).is_ok());
        prop_assert_eq!(rule.is_applicable(&target), rule.consumed() <= target.chars().count());
    }
}
