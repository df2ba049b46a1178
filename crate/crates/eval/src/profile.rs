use std::fmt::Write as _;

use serde::Serialize;

use pcdisco_bench::Sample;

use crate::error::EvalError;

/// Premise statistics for one group of samples. Pairs are those with at
/// least one independence statement; all means are pooled over the group.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassProfile {
    pub samples: usize,
    pub pairs: usize,
    pub statements: usize,
    /// Independence statements per pair.
    pub mean_tests_per_pair: Option<f64>,
    /// Mean conditioning-set size over all statements.
    pub mean_conditioning: Option<f64>,
    /// Mean over pairs of the largest conditioning set for that pair.
    pub mean_max_conditioning: Option<f64>,
    pub max_conditioning: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FailureProfile {
    pub correct: ClassProfile,
    pub misclassified: ClassProfile,
}

#[derive(Default)]
struct Acc {
    samples: usize,
    pairs: usize,
    statements: usize,
    given_total: usize,
    pair_max_total: usize,
    max: Option<usize>,
}

impl Acc {
    fn add(&mut self, s: &Sample) {
        self.samples += 1;
        for stmts in s.facts.statements_per_pair().values() {
            self.pairs += 1;
            self.statements += stmts.len();
            let sizes = stmts.iter().map(|c| c.given().len());
            let pair_max = sizes.clone().max().unwrap_or(0);
            self.given_total += sizes.sum::<usize>();
            self.pair_max_total += pair_max;
            self.max = Some(self.max.map_or(pair_max, |m| m.max(pair_max)));
        }
    }

    fn finish(self) -> ClassProfile {
        let per = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        ClassProfile {
            samples: self.samples,
            pairs: self.pairs,
            statements: self.statements,
            mean_tests_per_pair: per(self.statements, self.pairs),
            mean_conditioning: per(self.given_total, self.statements),
            mean_max_conditioning: per(self.pair_max_total, self.pairs),
            max_conditioning: self.max,
        }
    }
}

/// Split samples by whether a model recovered their skeleton and profile
/// the independence statements in each group.
pub fn failure_profile(
    samples: &[Sample],
    skeleton_correct: &[bool],
) -> Result<FailureProfile, EvalError> {
    if samples.len() != skeleton_correct.len() {
        return Err(EvalError::LengthMismatch {
            left: samples.len(),
            right: skeleton_correct.len(),
        });
    }
    let (mut ok, mut bad) = (Acc::default(), Acc::default());
    for (s, &good) in samples.iter().zip(skeleton_correct) {
        if good {
            ok.add(s)
        } else {
            bad.add(s)
        }
    }
    Ok(FailureProfile {
        correct: ok.finish(),
        misclassified: bad.finish(),
    })
}

impl FailureProfile {
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14}{:>8}{:>8}{:>12}{:>12}{:>12}{:>10}",
            "class", "samples", "pairs", "tests/pair", "mean |Z|", "mean max|Z|", "max |Z|"
        );
        for (name, c) in [
            ("correct", &self.correct),
            ("misclassified", &self.misclassified),
        ] {
            let _ = writeln!(
                out,
                "{:<14}{:>8}{:>8}{:>12}{:>12}{:>12}{:>10}",
                name,
                c.samples,
                c.pairs,
                cell(c.mean_tests_per_pair),
                cell(c.mean_conditioning),
                cell(c.mean_max_conditioning),
                c.max_conditioning
                    .map_or("-".to_string(), |m| m.to_string()),
            );
        }
        out
    }
}
