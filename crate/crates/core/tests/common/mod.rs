//! Oracles, generators and criterion checks shared by the integration
//! tests and the acceptance target.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surgact::corruption::{apply_delay, build_frequency_table, corrupt, DelaySpec, NoiseKind, NoiseSpec};
use surgact::evaluation::{spearman_rho, vis_baseline, wilcoxon_signed_rank};
use surgact::seqmodel::{gradient_check_with, GradCheckOptions, ModelConfig};
use surgact::synthgen::{generate_dataset, preset};
use surgact::workflow::{
    apply_mask, merge_hands, parse_annotations, write_annotations, ActivityTuple, Hand, HandAnnotation,
    Intervention, MaskConfig, Token, Vocabulary, POSITIONS,
};

/// Outcome of one acceptance criterion.
pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check { pass, detail: detail.into() }
    }

    pub fn assert(self) {
        assert!(self.pass, "{}", self.detail);
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// statistics oracles

/// Average ranks (1-based) computed by counting, O(n^2).
pub fn naive_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation of the naive ranks.
pub fn oracle_rho(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (naive_ranks(x), naive_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Two-sided p of the t-approximation through the regularized incomplete
/// beta function: P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2).
pub fn oracle_rho_p(rho: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    if 1.0 - rho * rho <= 0.0 {
        return 0.0;
    }
    let t2 = rho * rho * df / (1.0 - rho * rho);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t2))
}

pub struct WilcoxonOracle {
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub w: f64,
    pub p: f64,
}

/// Enumerates all 2^n sign assignments of the nonzero differences.
pub fn oracle_wilcoxon(x: &[f64], y: &[f64]) -> WilcoxonOracle {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r = naive_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&r).filter(|(v, _)| **v < 0.0).map(|(_, r)| r).sum();
    let w = w_plus.min(w_minus);
    let mut at_most = 0u64;
    for signs in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|k| signs >> k & 1 == 1).map(|k| r[k]).sum();
        if s <= w + 1e-9 {
            at_most += 1;
        }
    }
    let p = (2.0 * at_most as f64 / (1u64 << n) as f64).min(1.0);
    WilcoxonOracle { n, w_plus, w_minus, w, p }
}

/// Short vectors with many ties and zeros.
pub fn random_pair(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = r.random_range(1..=10);
    let levels = r.random_range(2..=6);
    let halves = r.random_bool(0.3);
    let draw = |r: &mut ChaCha8Rng| {
        let v = r.random_range(0..levels) as f64;
        if halves {
            v / 2.0
        } else {
            v
        }
    };
    let x: Vec<f64> = (0..n).map(|_| draw(r)).collect();
    let y: Vec<f64> = (0..n).map(|_| draw(r)).collect();
    (x, y)
}

/// Both rank statistics against the oracles on `cases` random inputs.
pub fn check_statistics(cases: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let (mut rho_cases, mut w_cases, mut worst_p) = (0, 0, 0.0f64);
    for case in 0..cases {
        let (x, y) = random_pair(&mut r);
        let n = x.len();
        let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
        match spearman_rho(&x, &y) {
            Ok(s) => {
                if n < 3 || constant(&x) || constant(&y) {
                    return Check::new(false, format!("case {case}: spearman accepted degenerate {x:?} {y:?}"));
                }
                let rho = oracle_rho(&x, &y);
                let p = oracle_rho_p(rho, n);
                if (s.rho - rho).abs() > 1e-12 || (s.p_value - p).abs() > 1e-9 {
                    return Check::new(
                        false,
                        format!("case {case}: rho {} vs {rho}, p {} vs {p} on {x:?} {y:?}", s.rho, s.p_value),
                    );
                }
                worst_p = worst_p.max((s.p_value - p).abs());
                rho_cases += 1;
            }
            Err(_) if n < 3 || constant(&x) || constant(&y) => {}
            Err(e) => return Check::new(false, format!("case {case}: spearman failed: {e}")),
        }
        let o = oracle_wilcoxon(&x, &y);
        match wilcoxon_signed_rank(&x, &y) {
            Ok(w) => {
                if o.n < 6 {
                    return Check::new(false, format!("case {case}: wilcoxon accepted {} nonzero", o.n));
                }
                let ok = w.exact
                    && w.n == o.n
                    && w.w == o.w
                    && w.w_plus == o.w_plus
                    && w.w_minus == o.w_minus
                    && (w.p_value - o.p).abs() <= 1e-9;
                if !ok {
                    return Check::new(
                        false,
                        format!("case {case}: W {} vs {}, p {} vs {} on {x:?} {y:?}", w.w, o.w, w.p_value, o.p),
                    );
                }
                worst_p = worst_p.max((w.p_value - o.p).abs());
                w_cases += 1;
            }
            Err(_) if o.n < 6 => {}
            Err(e) => return Check::new(false, format!("case {case}: wilcoxon failed: {e}")),
        }
    }
    Check::new(
        rho_cases > 0 && w_cases > 0,
        format!("{cases} cases ({rho_cases} rho, {w_cases} exact W); max |dp| {worst_p:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// annotation generators and oracles

const VERBS: [&str; 3] = ["hold", "cut", "coagulate"];
const INSTRUMENTS: [&str; 3] = ["forceps", "scalpel", "bipolar"];
const STRUCTURES: [&str; 2] = ["disc", "nerve"];

/// One hand's non-overlapping annotations on a half-second grid. Small
/// label sets make equal neighbours common.
pub fn hand_strategy(hand: Hand) -> impl Strategy<Value = Vec<HandAnnotation>> {
    prop::collection::vec((0u8..3, 1u8..6, 0usize..3, 0usize..3, 0usize..2), 0..10).prop_map(move |items| {
        let mut t = 0.0;
        items
            .into_iter()
            .map(|(gap, dur, v, i, s)| {
                let t_start = t + f64::from(gap) * 0.5;
                let t_end = t_start + f64::from(dur) * 0.5;
                t = t_end;
                HandAnnotation {
                    actor: "surgeon".into(),
                    hand,
                    verb: VERBS[v].into(),
                    instrument: INSTRUMENTS[i].into(),
                    structure: STRUCTURES[s].into(),
                    t_start,
                    t_end,
                }
            })
            .collect()
    })
}

pub fn hands_strategy() -> impl Strategy<Value = (Vec<HandAnnotation>, Vec<HandAnnotation>)> {
    (hand_strategy(Hand::Left), hand_strategy(Hand::Right))
}

/// Measure of a union of intervals.
pub fn union_length(mut iv: Vec<(f64, f64)>) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        cur = match cur {
            Some((s, e)) if a <= e => Some((s, e.max(b))),
            Some((s, e)) => {
                total += e - s;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    total + cur.map_or(0.0, |(s, e)| e - s)
}

pub fn mask_strategy() -> impl Strategy<Value = MaskConfig> {
    prop::array::uniform6(any::<bool>()).prop_map(MaskConfig::from_bits)
}

pub fn tuple_strategy() -> impl Strategy<Value = ActivityTuple> {
    (prop::array::uniform6(0u32..8), 0.0f64..100.0, 0.001f64..50.0)
        .prop_map(|(items, t, d)| ActivityTuple::new(items.map(Token), t, t + d))
}

fn rendered(v: &Vocabulary, seq: &[ActivityTuple]) -> Vec<(String, f64, f64)> {
    seq.iter().map(|a| (v.render(&a.items), a.t_start, a.t_end)).collect()
}

fn hand_durations(seq: &[ActivityTuple], hand: Hand) -> f64 {
    seq.iter().filter(|a| a.hand(hand) != [Token::NONE; 3]).map(ActivityTuple::duration).sum()
}

/// The four property families, `cases` random cases each.
pub fn check_properties(cases: u32) -> Check {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut results = Vec::new();

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "apply_mask idempotence",
        runner.run(&(tuple_strategy(), mask_strategy()), |(t, m)| {
            let once = apply_mask(&t, &m);
            prop_assert_eq!(apply_mask(&once, &m), once);
            for p in 0..POSITIONS {
                let expected = if m.is_visible(p) { t.items[p] } else { Token::UNKNOWN };
                prop_assert_eq!(once.items[p], expected);
            }
            Ok(())
        })
        .map_err(|e| e.to_string()),
    ));

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "merge_hands duration conservation",
        runner.run(&hands_strategy(), |(left, right)| {
            let mut v = Vocabulary::default();
            let seq = merge_hands(&left, &right, &mut v).unwrap();
            let total: f64 = seq.iter().map(ActivityTuple::duration).sum();
            let busy = union_length(left.iter().chain(&right).map(|a| (a.t_start, a.t_end)).collect());
            prop_assert!((total - busy).abs() < 1e-9, "{} vs {}", total, busy);
            for (hand, anns) in [(Hand::Left, &left), (Hand::Right, &right)] {
                let expected: f64 = anns.iter().map(|a| a.t_end - a.t_start).sum();
                prop_assert!((hand_durations(&seq, hand) - expected).abs() < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string()),
    ));

    let mut runner = TestRunner::new(config.clone());
    results.push((
        "merge_hands no equal neighbours",
        runner.run(&hands_strategy(), |(left, right)| {
            let mut v = Vocabulary::default();
            let seq = merge_hands(&left, &right, &mut v).unwrap();
            for w in seq.windows(2) {
                prop_assert!(w[0].t_end <= w[1].t_start);
                prop_assert!(!(w[0].t_end == w[1].t_start && w[0].items == w[1].items));
            }
            prop_assert!(seq.iter().all(|a| a.duration() > 0.0));
            Ok(())
        })
        .map_err(|e| e.to_string()),
    ));

    let mut runner = TestRunner::new(config);
    results.push((
        "file-format round trip",
        runner.run(&hands_strategy(), |(left, right)| {
            let mut v = Vocabulary::default();
            let activities = merge_hands(&left, &right, &mut v).unwrap();
            let iv = Intervention {
                id: "case".into(),
                site: "site".into(),
                surgeon_id: "s1".into(),
                phases: Vec::new(),
                activities,
            };
            let text = write_annotations(&iv, &v, "surgeon").unwrap();
            let file = parse_annotations(&text).unwrap();
            let mut v2 = Vocabulary::default();
            let again = merge_hands(&file.hand(Hand::Left), &file.hand(Hand::Right), &mut v2).unwrap();
            prop_assert_eq!(rendered(&v2, &again), rendered(&v, &iv.activities));
            Ok(())
        })
        .map_err(|e| e.to_string()),
    ));

    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    if failed.is_empty() {
        Check::new(true, format!("{} families x {cases} cases", results.len()))
    } else {
        Check::new(false, failed.join("; "))
    }
}

// ---------------------------------------------------------------------------
// noise and delay

/// Vocabulary with `n` labels per kind.
pub fn vocabulary(n: usize) -> Vocabulary {
    let mut v = Vocabulary::default();
    for k in 0..n {
        v.verbs.intern(&format!("v{k}")).unwrap();
        v.instruments.intern(&format!("i{k}")).unwrap();
        v.structures.intern(&format!("s{k}")).unwrap();
    }
    v
}

/// `len` back-to-back tuples with uniform random data labels.
pub fn random_sequence(r: &mut ChaCha8Rng, v: &Vocabulary, len: usize) -> Vec<ActivityTuple> {
    (0..len)
        .map(|k| {
            let items = std::array::from_fn(|p| {
                Token(Token::RESERVED + r.random_range(0..v.position(p).n_labels() as u32))
            });
            ActivityTuple::new(items, k as f64, k as f64 + 1.0)
        })
        .collect()
}

fn changed(a: &[ActivityTuple], b: &[ActivityTuple], p: usize) -> usize {
    a.iter().zip(b).filter(|(x, y)| x.items[p] != y.items[p]).count()
}

pub fn check_noise_calibration() -> Check {
    let mut notes = Vec::new();

    // corrupted count per position
    let v = vocabulary(5);
    let seq = random_sequence(&mut rng(1), &v, 10_000);
    let noisy = corrupt(&seq, &NoiseSpec::new(NoiseKind::Uniform, 0.25, 9), None, &v).unwrap();
    let worst = (0..POSITIONS).map(|p| changed(&seq, &noisy, p).abs_diff(2_500)).max().unwrap();
    notes.push(format!("count off by {worst}"));
    let count_ok = worst <= 100;

    // frequency replacement distribution against the duration table
    let d = generate_dataset(&preset("LDH.R").unwrap()).unwrap();
    let table = build_frequency_table(&d);
    let none: Vec<ActivityTuple> =
        (0..100_000).map(|k| ActivityTuple::new([Token::NONE; POSITIONS], k as f64, k as f64 + 1.0)).collect();
    let noisy = corrupt(&none, &NoiseSpec::new(NoiseKind::Frequency, 1.0, 3), Some(&table), &d.vocab).unwrap();
    let mut worst_tv = 0.0f64;
    for p in 0..POSITIONS {
        let mass = &table.mass[p];
        let data: f64 = mass[Token::RESERVED as usize..].iter().sum();
        let mut counts = vec![0.0; mass.len()];
        for a in &noisy {
            counts[a.items[p].index()] += 1.0;
        }
        let tv: f64 = (0..mass.len())
            .map(|k| {
                let expected = if k < Token::RESERVED as usize { 0.0 } else { mass[k] / data };
                (counts[k] / noisy.len() as f64 - expected).abs()
            })
            .sum::<f64>()
            / 2.0;
        worst_tv = worst_tv.max(tv);
    }
    notes.push(format!("TV {worst_tv:.4}"));
    let tv_ok = worst_tv <= 0.02;

    // pairwise noise only swaps the two most frequent labels
    let mut pair_ok = true;
    let mut swaps = 0;
    for (k, iv) in d.interventions.iter().enumerate() {
        let noisy =
            corrupt(&iv.activities, &NoiseSpec::new(NoiseKind::Pairwise, 0.5, k as u64), Some(&table), &d.vocab)
                .unwrap();
        for (a, b) in iv.activities.iter().zip(&noisy) {
            for p in 0..POSITIONS {
                if a.items[p] != b.items[p] {
                    swaps += 1;
                    let (x, y) = table.top_pair(p).unwrap();
                    pair_ok &= (a.items[p] == x && b.items[p] == y) || (a.items[p] == y && b.items[p] == x);
                }
            }
        }
    }
    notes.push(format!("{swaps} pairwise swaps, top-2 only: {pair_ok}"));
    Check::new(count_ok && tv_ok && pair_ok && swaps > 0, notes.join(", "))
}

pub fn check_vis_closed_form() -> Check {
    let v = vocabulary(6);
    let truth = random_sequence(&mut rng(2), &v, 100_000);
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, r) in [0.05, 0.25].into_iter().enumerate() {
        let noisy = corrupt(&truth, &NoiseSpec::new(NoiseKind::Uniform, r, 40 + k as u64), None, &v).unwrap();
        let acc = vis_baseline(&noisy, &truth).unwrap();
        let expected = (1.0f64 - r).powi(6);
        ok &= (acc - expected).abs() <= 0.005;
        notes.push(format!("r={r}: {acc:.4} vs {expected:.4}"));
    }
    Check::new(ok, notes.join(", "))
}

/// Label runs of one position (equal abutting segments joined, `none`
/// dropped), i.e. the position's visible timeline.
pub fn timeline(seq: &[ActivityTuple], p: usize) -> Vec<(f64, f64, Token)> {
    let mut out: Vec<(f64, f64, Token)> = Vec::new();
    for a in seq {
        let tok = a.items[p];
        if tok == Token::NONE {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.2 == tok && (last.1 - a.t_start).abs() < 1e-9 => last.1 = a.t_end,
            _ => out.push((a.t_start, a.t_end, tok)),
        }
    }
    out
}

pub fn label_durations(seq: &[ActivityTuple], p: usize) -> BTreeMap<Token, f64> {
    let mut out = BTreeMap::new();
    for a in seq {
        if !a.items[p].is_reserved() {
            *out.entry(a.items[p]).or_insert(0.0) += a.duration();
        }
    }
    out
}

/// `count` generated interventions drawn from several presets and seeds.
pub fn sample_interventions(count: usize) -> Vec<Intervention> {
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        for name in ["LDH.R", "CS", "PA.R"] {
            let mut spec = preset(name).unwrap();
            spec.seed = 1000 + seed;
            spec.n_interventions = 5;
            seed += 1;
            out.extend(generate_dataset(&spec).unwrap().interventions);
        }
    }
    out.truncate(count);
    out
}

pub fn check_delay() -> Check {
    let ivs = sample_interventions(100);
    let masks: Vec<MaskConfig> =
        ["VIS", "IS", "VS", "VI", "V", "I", "S", "010010"].iter().map(|s| s.parse().unwrap()).collect();
    let mut identity = true;
    let mut worst = 0.0f64;
    let mut r = rng(5);
    for (k, iv) in ivs.iter().enumerate() {
        let m = masks[k % masks.len()];
        let same = apply_delay(iv, &DelaySpec::new(0.0), &m);
        if m == MaskConfig::VIS {
            identity &= same == iv.activities;
        }
        for p in (0..POSITIONS).filter(|&p| m.is_visible(p)) {
            identity &= timeline(&same, p) == timeline(&iv.activities, p);
        }
        let d = [1.0, 10.0, 30.0, r.random_range(0.0..60.0)][k % 4];
        let late = apply_delay(iv, &DelaySpec::new(d), &m);
        for p in (0..POSITIONS).filter(|&p| m.is_visible(p)) {
            let (a, b) = (label_durations(&iv.activities, p), label_durations(&late, p));
            if a.keys().ne(b.keys()) {
                return Check::new(false, format!("{}: label set changed at position {p}", iv.id));
            }
            for (t, x) in &a {
                worst = worst.max((x - b[t]).abs());
            }
            let shifted = timeline(&iv.activities, p).into_iter().map(|(s, e, t)| (s + d, e + d, t));
            for ((s, e, t), (s2, e2, t2)) in shifted.zip(timeline(&late, p)) {
                identity &= t == t2 && (s - s2).abs() < 1e-6 && (e - e2).abs() < 1e-6;
            }
        }
    }
    Check::new(
        identity && worst < 1e-6,
        format!("{} interventions, delay-0 identity {identity}, max duration drift {worst:.1e} s", ivs.len()),
    )
}

// ---------------------------------------------------------------------------
// gradients

pub fn small_model() -> ModelConfig {
    ModelConfig {
        layers: 2,
        hidden: 8,
        window_n: 5,
        n_classes: 10,
        input_dim: 12,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    }
}

pub fn check_gradient() -> Check {
    let start = Instant::now();
    let opts = GradCheckOptions { samples: usize::MAX, ..GradCheckOptions::default() };
    match gradient_check_with(&small_model(), 11, opts) {
        Ok(err) => {
            let secs = start.elapsed().as_secs_f64();
            Check::new(err < 1e-4 && secs < 60.0, format!("max relative error {err:.2e} in {secs:.1} s"))
        }
        Err(e) => Check::new(false, e.to_string()),
    }
}
