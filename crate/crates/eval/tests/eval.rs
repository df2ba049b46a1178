use std::collections::BTreeSet;

use pcdisco_bench::{generate_dataset, GenerateConfig, Sample};
use pcdisco_core::graph::{var, Variable};
use pcdisco_core::pc::{solve_sample, StageOutputs, VStructure};
use pcdisco_eval::{
    bootstrap_f1, classification_metrics, payloads_of, stage_f1, trace_stats, trace_stats_with,
    StagePayloads, TraceConfig,
};
use pcdisco_pipeline::{
    oracle_payloads, run_pipeline, ChatConfig, GraphPayload, OracleClient, Payload,
    SkeletonPayload, VStructurePayload,
};
use proptest::prelude::*;

fn small_samples() -> Vec<Sample> {
    [3, 4]
        .into_iter()
        .flat_map(|n| generate_dataset(&GenerateConfig::new(n)).unwrap())
        .collect()
}

fn outputs(s: &Sample) -> StageOutputs {
    solve_sample(&s.facts, &s.hypothesis).unwrap()
}

#[test]
fn oracle_runs_score_one_on_every_stage() {
    let cfg = ChatConfig {
        max_retries: 0,
        ..ChatConfig::default()
    };
    let samples = generate_dataset(&GenerateConfig::new(3)).unwrap();
    let records: Vec<_> = samples
        .iter()
        .map(|s| run_pipeline(&OracleClient, s, &cfg))
        .collect();
    let gold: Vec<_> = samples.iter().map(outputs).collect();
    let items: Vec<_> = records.iter().map(payloads_of).zip(&gold).collect();
    assert_eq!(stage_f1(&items).unwrap(), [1.0; 4]);

    let preds: Vec<bool> = records.iter().map(|r| r.verdict.unwrap()).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    let r = classification_metrics(&preds, &labels).unwrap();
    assert_eq!((r.f1, r.accuracy), (1.0, 1.0));
}

#[test]
fn worked_stage_examples() {
    // Two directed edges and one undirected; the prediction reverses one arrow.
    let samples = generate_dataset(&GenerateConfig::new(4)).unwrap();
    let (s, gold) = samples
        .iter()
        .map(|s| (s, outputs(s)))
        .find(|(_, o)| o.cpdag.named_directed().len() == 2 && o.cpdag.named_undirected().len() == 1)
        .expect("a class with two directed edges and one undirected edge");
    let p = oracle_payloads(&gold);
    let Payload::Graph(g) = &p[2] else {
        unreachable!()
    };
    let (a, b) = g.directed[1].clone();
    let flipped = Payload::Graph(GraphPayload {
        directed: vec![g.directed[0].clone(), (b, a)],
        undirected: g.undirected.clone(),
    });
    let pred: StagePayloads = [Some(&p[0]), Some(&p[1]), Some(&flipped), Some(&p[3])];
    let f = stage_f1(&[(pred, &gold)]).unwrap();
    assert!((f[2] - 0.6667).abs() < 1e-4, "{} gives {f:?}", s.id);
    assert_eq!([f[0], f[1], f[3]], [1.0; 3]);
}

fn set_of<T: Ord + Clone>(xs: &[T]) -> BTreeSet<T> {
    xs.iter().cloned().collect()
}

/// Whether two payload lists agree on everything the scorer looks at.
fn same_items(a: &[Payload; 4], b: &[Payload; 4]) -> bool {
    let norm = |e: &[(Variable, Variable)]| -> BTreeSet<(Variable, Variable)> {
        e.iter()
            .map(|(x, y)| {
                if x < y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                }
            })
            .collect()
    };
    match (a, b) {
        (
            [Payload::Skeleton(s1), Payload::VStructures(v1), Payload::Graph(g1), Payload::Verdict(x1)],
            [Payload::Skeleton(s2), Payload::VStructures(v2), Payload::Graph(g2), Payload::Verdict(x2)],
        ) => {
            norm(&s1.edges) == norm(&s2.edges)
                && set_of(&v1.v_structures) == set_of(&v2.v_structures)
                && set_of(&g1.directed) == set_of(&g2.directed)
                && norm(&g1.undirected) == norm(&g2.undirected)
                && x1 == x2
        }
        _ => false,
    }
}

fn mutate(p: &[Payload; 4], nodes: &[Variable], which: usize, pick: usize) -> [Payload; 4] {
    let mut out = p.clone();
    let pair = |k: usize| {
        let n = nodes.len();
        let i = k % n;
        let j = (i + 1 + (k / n) % (n - 1)) % n;
        (nodes[i].clone(), nodes[j].clone())
    };
    match (which, &mut out) {
        (0, _) => {}
        (1, [Payload::Skeleton(SkeletonPayload { edges, .. }), ..]) => {
            let e = pair(pick);
            let e = if e.0 < e.1 { e } else { (e.1, e.0) };
            if let Some(i) = edges.iter().position(|x| *x == e) {
                edges.remove(i);
            } else {
                edges.push(e);
            }
        }
        (2, [_, Payload::VStructures(VStructurePayload { v_structures, .. }), ..]) => {
            if v_structures.is_empty() || pick.is_multiple_of(2) {
                let (x, y) = pair(pick);
                let z = nodes.iter().find(|v| **v != x && **v != y).unwrap().clone();
                let vs = VStructure::new(x, z, y).unwrap();
                if !v_structures.contains(&vs) {
                    v_structures.push(vs);
                }
            } else {
                v_structures.remove(pick % v_structures.len());
            }
        }
        (
            3,
            [_, _, Payload::Graph(GraphPayload {
                directed,
                undirected,
            }), _],
        ) => {
            if !directed.is_empty() && pick.is_multiple_of(2) {
                let i = pick % directed.len();
                let (a, b) = directed.remove(i);
                directed.push((b, a));
            } else if !undirected.is_empty() {
                let i = pick % undirected.len();
                let e = undirected.remove(i);
                directed.push(e);
            }
        }
        (_, [.., Payload::Verdict(v)]) => *v = !*v,
        _ => unreachable!(),
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn metrics_match_naive_recount(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let (p, l): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        let r = classification_metrics(&p, &l).unwrap();
        let count = |pv: bool, lv: bool| pairs.iter().filter(|&&(a, b)| a == pv && b == lv).count();
        let (tp, fp, fnn, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
        prop_assert_eq!((r.counts.tp, r.counts.fp, r.counts.fn_, r.counts.tn), (tp, fp, fnn, tn));
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64 };
        prop_assert!((r.precision - prec).abs() < 1e-12);
        prop_assert!((r.recall - rec).abs() < 1e-12);
        prop_assert!((r.f1 - f1).abs() < 1e-12);
        prop_assert!((r.accuracy - (tp + tn) as f64 / pairs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn stage_scores_are_one_exactly_when_items_agree(
        idx in any::<prop::sample::Index>(),
        which in 0usize..5,
        pick in 0usize..64,
    ) {
        let samples = small_samples();
        let s = idx.get(&samples);
        let gold = outputs(s);
        let want = oracle_payloads(&gold);
        let nodes: Vec<Variable> = s.facts.variables().iter().cloned().collect();
        let got = mutate(&want, &nodes, which, pick);
        let pred: StagePayloads = [Some(&got[0]), Some(&got[1]), Some(&got[2]), Some(&got[3])];
        let f = stage_f1(&[(pred, &gold)]).unwrap();
        prop_assert_eq!(f == [1.0; 4], same_items(&got, &want), "{} {:?}", which, f);
    }

    #[test]
    fn bootstrap_is_seeded_and_covers_the_point(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 20..60),
        seed in any::<u64>(),
    ) {
        let (p, l): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let a = bootstrap_f1(&p, &l, 2, 500, seed).unwrap();
        let b = bootstrap_f1(&p, &l, 2, 500, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.ci_low <= a.point && a.point <= a.ci_high, "{:?}", a);
        prop_assert!(a.std >= 0.0);
    }

    #[test]
    fn marker_count_ignores_case_when_configured(
        words in prop::collection::vec(prop::sample::select(vec!["wait", "hold on", "edge", "A", "B", "so", "\n\n"]), 0..40),
        upper in prop::collection::vec(any::<bool>(), 40),
    ) {
        let text = words.join(" ");
        let shouted: String = words
            .iter()
            .zip(&upper)
            .map(|(w, &u)| if u { w.to_ascii_uppercase() } else { w.to_string() })
            .collect::<Vec<_>>()
            .join(" ");
        let loose = TraceConfig::default();
        let a = trace_stats_with(&text, &[], &loose);
        let b = trace_stats_with(&shouted, &[], &loose);
        prop_assert_eq!(a.self_check_markers, b.self_check_markers);
        prop_assert_eq!(a.micro_steps, b.micro_steps);
        let strict = TraceConfig { case_insensitive: false, markers: vec!["wait".into(), "hold on".into()] };
        let expected = words.iter().filter(|w| w.starts_with("wait") || w.starts_with("hold")).count();
        prop_assert_eq!(trace_stats_with(&text, &[], &strict).self_check_markers, expected);
    }
}

#[test]
fn bootstrap_perfect_predictions() {
    let l: Vec<bool> = (0..40).map(|i| i % 7 == 0).collect();
    let b = bootstrap_f1(&l, &l, 5, 1000, 2024).unwrap();
    assert_eq!((b.mean, b.std, b.ci_low, b.ci_high), (1.0, 0.0, 1.0, 1.0));
}

#[test]
fn traces_from_hand() {
    let edges = [
        (var("A"), var("B")),
        (var("B"), var("C")),
        (var("A"), var("C")),
    ];
    let t = "Start: A correlates with B and with C.\nB and C too.\n\nHold on. Is A independent of C given B? \
             Yes.\nWait, then A and C are not adjacent.\n\n\nFinal: A - B, B - C.";
    let s = trace_stats(t, &edges);
    assert_eq!(s.micro_steps, 4);
    assert_eq!(s.self_check_markers, 2);
    let count = |a: &str, b: &str| s.revisit_counts[&(var(a), var(b))];
    assert_eq!(
        (count("A", "B"), count("B", "C"), count("A", "C")),
        (3, 3, 4)
    );
}
