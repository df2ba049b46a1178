//! Stage-wise scoring of pipeline artifacts against the exact engine.
//!
//! Stages 1-3 use micro-averaged set F1 pooled over samples: undirected
//! skeleton edges, canonical v-structure triples, and CPDAG edge items
//! where directed edges are ordered and undirected ones are not. Stage 4
//! treats each sample whose verdict is `true` as an item, which equals
//! classification F1 on the verdicts. An empty prediction against an empty
//! reference scores 1.

use std::collections::BTreeSet;

use pcdisco_core::graph::Variable;
use pcdisco_core::pc::{StageOutputs, VStructure};
use pcdisco_pipeline::{Payload, RunRecord, Stage};

use crate::error::EvalError;

/// Predicted payloads in pipeline order; `None` for a stage that failed or
/// never ran.
pub type StagePayloads<'a> = [Option<&'a Payload>; 4];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SetCounts {
    pub common: usize,
    pub predicted: usize,
    pub reference: usize,
}

impl SetCounts {
    pub fn of<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> Self {
        SetCounts {
            common: pred.intersection(gold).count(),
            predicted: pred.len(),
            reference: gold.len(),
        }
    }

    pub fn f1(&self) -> f64 {
        let den = self.predicted + self.reference;
        if den == 0 {
            1.0
        } else {
            2.0 * self.common as f64 / den as f64
        }
    }
}

impl std::ops::AddAssign for SetCounts {
    fn add_assign(&mut self, o: SetCounts) {
        self.common += o.common;
        self.predicted += o.predicted;
        self.reference += o.reference;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeItem {
    Directed(Variable, Variable),
    /// Endpoints ordered `a < b`.
    Undirected(Variable, Variable),
}

/// Pick each stage's payload out of a run record.
pub fn payloads_of(rec: &RunRecord) -> StagePayloads<'_> {
    Stage::PIPELINE.map(|s| rec.artifact(s).and_then(|a| a.payload.as_ref()))
}

fn undirected(edges: &[(Variable, Variable)]) -> BTreeSet<(Variable, Variable)> {
    edges
        .iter()
        .map(|(a, b)| {
            if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        })
        .collect()
}

fn edge_items(
    directed: &[(Variable, Variable)],
    undir: &[(Variable, Variable)],
) -> BTreeSet<EdgeItem> {
    let mut out: BTreeSet<EdgeItem> = directed
        .iter()
        .map(|(a, b)| EdgeItem::Directed(a.clone(), b.clone()))
        .collect();
    out.extend(
        undirected(undir)
            .into_iter()
            .map(|(a, b)| EdgeItem::Undirected(a, b)),
    );
    out
}

fn check_variables(
    pred: &StagePayloads<'_>,
    gold: &StageOutputs,
    index: usize,
) -> Result<(), EvalError> {
    let known: BTreeSet<Variable> = gold.skeleton.nodes().iter().cloned().collect();
    for p in pred.iter().flatten() {
        p.check_variables(&known)
            .map_err(|e| EvalError::VariableMismatch(format!("sample {index}: {e}")))?;
        if let Payload::Skeleton(s) = p {
            let nodes: BTreeSet<Variable> = s.nodes.iter().cloned().collect();
            if nodes != known {
                return Err(EvalError::VariableMismatch(format!(
                    "sample {index}: predicted nodes {:?} differ from {:?}",
                    nodes.iter().map(Variable::name).collect::<Vec<_>>(),
                    known.iter().map(Variable::name).collect::<Vec<_>>(),
                )));
            }
        }
    }
    Ok(())
}

/// Pooled item counts per stage.
pub fn stage_counts(
    items: &[(StagePayloads<'_>, &StageOutputs)],
) -> Result<[SetCounts; 4], EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out = [SetCounts::default(); 4];
    for (i, (pred, gold)) in items.iter().enumerate() {
        check_variables(pred, gold, i)?;

        let gold_skel = undirected(&gold.skeleton.named_undirected());
        let pred_skel = match pred[0] {
            Some(Payload::Skeleton(s)) => undirected(&s.edges),
            _ => BTreeSet::new(),
        };
        out[0] += SetCounts::of(&pred_skel, &gold_skel);

        let gold_vs: BTreeSet<VStructure> = gold.v_structures.iter().cloned().collect();
        let pred_vs: BTreeSet<VStructure> = match pred[1] {
            Some(Payload::VStructures(v)) => v.v_structures.iter().cloned().collect(),
            _ => BTreeSet::new(),
        };
        out[1] += SetCounts::of(&pred_vs, &gold_vs);

        let gold_edges = edge_items(&gold.cpdag.named_directed(), &gold.cpdag.named_undirected());
        let pred_edges = match pred[2] {
            Some(Payload::Graph(g)) => edge_items(&g.directed, &g.undirected),
            _ => BTreeSet::new(),
        };
        out[2] += SetCounts::of(&pred_edges, &gold_edges);

        let verdict = pred[3].and_then(Payload::verdict).unwrap_or(false);
        out[3] += SetCounts {
            common: usize::from(verdict && gold.verdict),
            predicted: usize::from(verdict),
            reference: usize::from(gold.verdict),
        };
    }
    Ok(out)
}

/// Micro-averaged F1 for each of the four stages.
pub fn stage_f1(items: &[(StagePayloads<'_>, &StageOutputs)]) -> Result<[f64; 4], EvalError> {
    Ok(stage_counts(items)?.map(|c| c.f1()))
}

#[cfg(test)]
mod tests {
    use pcdisco_core::graph::RelationKind;
    use pcdisco_core::graph::{var, CiStatement};
    use pcdisco_core::pc::{solve_sample, PremiseFacts};
    use pcdisco_core::Hypothesis;
    use pcdisco_pipeline::{oracle_payloads, GraphPayload, SkeletonPayload};

    use super::*;

    fn pair(a: &str, b: &str) -> (Variable, Variable) {
        (var(a), var(b))
    }

    /// A -> C <- B, fully oriented.
    fn collider_outputs() -> StageOutputs {
        let vars = ["A", "B", "C"].map(var);
        let ci = [CiStatement::new(var("A"), var("B"), []).unwrap()].into();
        let facts = PremiseFacts::from_ci_set(vars, &ci).unwrap();
        let h = Hypothesis::new(RelationKind::IsParent, var("A"), var("C")).unwrap();
        solve_sample(&facts, &h).unwrap()
    }

    fn chain_outputs() -> StageOutputs {
        let vars = ["A", "B", "C"].map(var);
        let ci = [CiStatement::new(var("A"), var("C"), [var("B")]).unwrap()].into();
        let facts = PremiseFacts::from_ci_set(vars, &ci).unwrap();
        let h = Hypothesis::new(RelationKind::IsParent, var("A"), var("B")).unwrap();
        solve_sample(&facts, &h).unwrap()
    }

    #[test]
    fn identical_artifacts_score_one() {
        for out in [collider_outputs(), chain_outputs()] {
            let p = oracle_payloads(&out);
            let pred: StagePayloads = [Some(&p[0]), Some(&p[1]), Some(&p[2]), Some(&p[3])];
            assert_eq!(stage_f1(&[(pred, &out)]).unwrap(), [1.0; 4]);
        }
    }

    #[test]
    fn skeleton_subset() {
        let out = chain_outputs();
        let mut p = oracle_payloads(&out);
        p[0] = Payload::Skeleton(SkeletonPayload {
            nodes: ["A", "B", "C"].map(var).to_vec(),
            edges: vec![pair("A", "B")],
        });
        let pred: StagePayloads = [Some(&p[0]), Some(&p[1]), Some(&p[2]), Some(&p[3])];
        let f = stage_f1(&[(pred, &out)]).unwrap();
        assert!((f[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(&f[1..], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn reversed_edge() {
        let out = collider_outputs();
        let p = oracle_payloads(&out);
        let bad = Payload::Graph(GraphPayload {
            directed: vec![pair("A", "C"), pair("C", "B")],
            undirected: vec![],
        });
        let pred: StagePayloads = [Some(&p[0]), Some(&p[1]), Some(&bad), Some(&p[3])];
        let c = stage_counts(&[(pred, &out)]).unwrap();
        assert_eq!(
            c[2],
            SetCounts {
                common: 1,
                predicted: 2,
                reference: 2
            }
        );
        assert!((c[2].f1() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_stages_and_verdicts() {
        let out = collider_outputs();
        assert!(out.verdict);
        let f = stage_f1(&[([None; 4], &out)]).unwrap();
        assert_eq!(f, [0.0; 4]);
        let chain = chain_outputs();
        assert!(!chain.verdict);
        // Nothing to find and nothing predicted in the verdict stage.
        let f = stage_f1(&[([None; 4], &chain)]).unwrap();
        assert_eq!(f[3], 1.0);
    }

    #[test]
    fn variable_mismatch() {
        let out = chain_outputs();
        let stray = Payload::Skeleton(SkeletonPayload {
            nodes: ["A", "B", "C", "D"].map(var).to_vec(),
            edges: vec![pair("A", "D")],
        });
        let r = stage_f1(&[([Some(&stray), None, None, None], &out)]);
        assert!(matches!(r, Err(EvalError::VariableMismatch(_))));
        let fewer = Payload::Skeleton(SkeletonPayload {
            nodes: ["A", "B"].map(var).to_vec(),
            edges: vec![],
        });
        let r = stage_f1(&[([Some(&fewer), None, None, None], &out)]);
        assert!(matches!(r, Err(EvalError::VariableMismatch(_))));
        assert_eq!(stage_f1(&[]), Err(EvalError::Empty));
    }
}
