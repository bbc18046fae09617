//! Pairs of inequivalent parameter systems with identical off-diagonal
//! expected matrices.
//!
//! Three fixed pairs are provided, one per failure mode: two systems with
//! different community structure, two with the same structure but
//! different degree parameters, and two standard SBMs that differ only in
//! a singleton community's diagonal. [`construct_size2_counterexample`]
//! manufactures further degree-ambiguity pairs.

use serde::Serialize;
use thiserror::Error;

use crate::equivalence::{equivalent, same_model_offdiag, Equivalence};
use crate::model::{
    check_min_size, community_sizes, validate_system, CommunityAssignment, ConnectivityMatrix,
    DegreeParams, ParameterSystem, DEFAULT_RANK_TOL,
};

/// Tolerance at which constructed pairs must agree off the diagonal.
pub const CONSTRUCT_OFFDIAG_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterexampleError {
    #[error("unknown example {0}; expected 1, 2 or 3")]
    UnknownExample(u8),
    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),
    #[error("scale must be positive, finite and different from 1, got {0}")]
    InvalidScale(f64),
    #[error("constructed pair failed its postconditions: {0}")]
    Postcondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleKind {
    /// Different community partitions.
    StructureAmbiguity,
    /// Same partition, degree parameters not determined.
    DegreeAmbiguity,
    /// Standard SBMs equal up to the diagonal.
    SbmSingleton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexamplePair {
    pub sys1: ParameterSystem,
    pub sys2: ParameterSystem,
    pub kind: CounterexampleKind,
}

struct Fixture {
    labels: &'static [usize],
    theta: &'static [&'static str],
    b: &'static [&'static [&'static str]],
}

const EXAMPLE_1: [Fixture; 2] = [
    Fixture {
        labels: &[1, 2, 2],
        theta: &["2", "2", "2"],
        b: &[&["0.05", "0.025"], &["0.025", "0.05"]],
    },
    Fixture {
        labels: &[1, 1, 2],
        theta: &["1", "2", "4"],
        b: &[&["0.05", "0.025"], &["0.025", "0.05"]],
    },
];

const EXAMPLE_2: [Fixture; 2] = [
    Fixture {
        labels: &[1, 1, 2, 2],
        theta: &["1", "1", "1", "1"],
        b: &[&["0.1", "0"], &["0", "0.4"]],
    },
    Fixture {
        labels: &[1, 1, 2, 2],
        theta: &["1", "1", "1", "2"],
        b: &[&["0.1", "0"], &["0", "0.2"]],
    },
];

const EXAMPLE_3: [Fixture; 2] = [
    Fixture {
        labels: &[1, 2, 2],
        theta: &["1", "1", "1"],
        b: &[&["0.1", "0"], &["0", "0.1"]],
    },
    Fixture {
        labels: &[1, 2, 2],
        theta: &["1", "1", "1"],
        b: &[&["0.2", "0"], &["0", "0.1"]],
    },
];

fn parse(s: &str) -> f64 {
    s.parse().expect("fixture literal")
}

fn build(f: &Fixture) -> ParameterSystem {
    let rows: Vec<Vec<f64>> =
        f.b.iter()
            .map(|r| r.iter().map(|s| parse(s)).collect())
            .collect();
    ParameterSystem::new(
        CommunityAssignment::from_one_based(f.labels, rows.len()).expect("fixture labels"),
        DegreeParams(f.theta.iter().map(|s| parse(s)).collect()),
        ConnectivityMatrix::from_rows(&rows).expect("fixture B"),
    )
    .expect("fixture dimensions")
}

/// The fixed counterexample pairs, numbered 1 to 3.
pub fn example_fixture(id: u8) -> Result<CounterexamplePair, CounterexampleError> {
    let (fixtures, kind) = match id {
        1 => (&EXAMPLE_1, CounterexampleKind::StructureAmbiguity),
        2 => (&EXAMPLE_2, CounterexampleKind::DegreeAmbiguity),
        3 => (&EXAMPLE_3, CounterexampleKind::SbmSingleton),
        other => return Err(CounterexampleError::UnknownExample(other)),
    };
    Ok(CounterexamplePair {
        sys1: build(&fixtures[0]),
        sys2: build(&fixtures[1]),
        kind,
    })
}

/// Rescales the second member of a two-node community whose `B` row is
/// zero off the diagonal: `θ_j → c·θ_j` and `B[k][k] → B[k][k]/c`.
///
/// Every off-diagonal entry touching `j` is either zero or the within-pair
/// entry `θ_i θ_j B[k][k]`, which is unchanged, so the off-diagonal
/// matrix is preserved while the canonical θ is not.
pub fn construct_size2_counterexample(
    sys: &ParameterSystem,
    community: usize,
    c: f64,
) -> Result<CounterexamplePair, CounterexampleError> {
    if !(c > 0.0) || !c.is_finite() || c == 1.0 {
        return Err(CounterexampleError::InvalidScale(c));
    }
    let k = sys.k();
    if community >= k {
        return Err(CounterexampleError::PatternMismatch(format!(
            "community {} does not exist",
            community + 1
        )));
    }
    let members = &sys.z().members()[community];
    if members.len() != 2 {
        return Err(CounterexampleError::PatternMismatch(format!(
            "community {} has {} members, expected 2",
            community + 1,
            members.len()
        )));
    }
    if let Some(l) = (0..k).find(|&l| l != community && sys.b().get(community, l) != 0.0) {
        return Err(CounterexampleError::PatternMismatch(format!(
            "B[{}][{}] is nonzero, so the pair's degree ratio is determined",
            community + 1,
            l + 1
        )));
    }
    let j = members[1];

    let mut theta = sys.theta().to_vec();
    theta[j] *= c;
    let mut b = sys.b().matrix().clone();
    b[(community, community)] /= c;
    let sys2 = ParameterSystem::new(sys.z().clone(), DegreeParams(theta), ConnectivityMatrix(b))
        .expect("dimensions unchanged");

    let pair = CounterexamplePair {
        sys1: sys.clone(),
        sys2,
        kind: CounterexampleKind::DegreeAmbiguity,
    };
    if !validate_system(&pair.sys2, DEFAULT_RANK_TOL).is_valid() {
        return Err(CounterexampleError::Postcondition(
            "constructed system is invalid".into(),
        ));
    }
    if !same_model_offdiag(&pair.sys1, &pair.sys2, CONSTRUCT_OFFDIAG_TOL) {
        return Err(CounterexampleError::Postcondition(
            "off-diagonals differ".into(),
        ));
    }
    match equivalent(
        &pair.sys1,
        &pair.sys2,
        crate::equivalence::DEFAULT_EQUIV_TOL,
    ) {
        Equivalence::NotEquivalent(m) if m.reason() == "theta" => Ok(pair),
        Equivalence::NotEquivalent(m) => Err(CounterexampleError::Postcondition(format!(
            "pair differs in {} rather than theta",
            m.reason()
        ))),
        Equivalence::Equivalent(_) => Err(CounterexampleError::Postcondition(
            "pair is gauge-equivalent at the default tolerance".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub kind: CounterexampleKind,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks that a pair really is a counterexample: both systems valid,
/// identical off the diagonal at `tol`, not gauge-equivalent, and at least
/// one of them below the three-member size threshold. Singleton-SBM pairs
/// must also have different `B`.
pub fn verify_counterexample(pair: &CounterexamplePair, tol: f64) -> VerificationReport {
    let mut checks = Vec::new();

    let r1 = validate_system(&pair.sys1, DEFAULT_RANK_TOL);
    let r2 = validate_system(&pair.sys2, DEFAULT_RANK_TOL);
    let mut reasons = r1.reasons();
    reasons.extend(r2.reasons());
    checks.push(Check {
        name: "both_valid",
        passed: r1.is_valid() && r2.is_valid(),
        detail: reasons.join("; "),
    });

    let same = same_model_offdiag(&pair.sys1, &pair.sys2, tol);
    checks.push(Check {
        name: "same_offdiag",
        passed: same,
        detail: if same {
            "off-diagonal expected matrices agree".into()
        } else {
            "off-diagonal expected matrices differ".into()
        },
    });

    let verdict = equivalent(
        &pair.sys1,
        &pair.sys2,
        tol.max(crate::equivalence::DEFAULT_EQUIV_TOL),
    );
    checks.push(Check {
        name: "not_equivalent",
        passed: !verdict.is_equivalent(),
        detail: match &verdict {
            Equivalence::NotEquivalent(m) => m.to_string(),
            Equivalence::Equivalent(_) => "systems are gauge-equivalent".into(),
        },
    });

    let small = !check_min_size(pair.sys1.z(), 3) || !check_min_size(pair.sys2.z(), 3);
    checks.push(Check {
        name: "below_size_threshold",
        passed: small,
        detail: format!(
            "community sizes {:?} and {:?}",
            community_sizes(pair.sys1.z()),
            community_sizes(pair.sys2.z())
        ),
    });

    if pair.kind == CounterexampleKind::SbmSingleton {
        let differs = pair.sys1.b() != pair.sys2.b();
        checks.push(Check {
            name: "b_differs",
            passed: differs,
            detail: if differs {
                "same up to a diagonal, but B differs".into()
            } else {
                "B matrices are identical".into()
            },
        });
    }

    VerificationReport {
        kind: pair.kind,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::{apply_transform, Mismatch};
    use crate::model::expected_adjacency;
    use crate::partitions::GaugeTransform;

    #[test]
    fn fixtures_verify() {
        for id in 1..=3 {
            let pair = example_fixture(id).unwrap();
            let report = verify_counterexample(&pair, 1e-15);
            assert!(report.passed(), "example {id}: {report:?}");
        }
        assert_eq!(
            example_fixture(4),
            Err(CounterexampleError::UnknownExample(4))
        );
    }

    #[test]
    fn example3_differs_only_on_the_diagonal() {
        let pair = example_fixture(3).unwrap();
        let d1 = expected_adjacency(&pair.sys1).unwrap();
        let d2 = expected_adjacency(&pair.sys2).unwrap();
        assert_eq!(d1.get(0, 0), 0.1);
        assert_eq!(d2.get(0, 0), 0.2);
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) != (0, 0) {
                    assert_eq!(d1.get(i, j), d2.get(i, j));
                }
            }
        }
        assert!(
            verify_counterexample(&pair, 0.0)
                .check("b_differs")
                .unwrap()
                .passed
        );
    }

    #[test]
    fn constructor_reproduces_example2() {
        let ex2 = example_fixture(2).unwrap();
        let built = construct_size2_counterexample(&ex2.sys1, 1, 2.0).unwrap();
        assert_eq!(built.sys2, ex2.sys2);
    }

    #[test]
    fn constructor_preconditions() {
        let ex2 = example_fixture(2).unwrap();
        assert_eq!(
            construct_size2_counterexample(&ex2.sys1, 1, 1.0),
            Err(CounterexampleError::InvalidScale(1.0))
        );
        assert!(matches!(
            construct_size2_counterexample(&ex2.sys1, 1, -2.0),
            Err(CounterexampleError::InvalidScale(_))
        ));
        // Example 1 community 1 is a singleton.
        let ex1 = example_fixture(1).unwrap();
        assert!(matches!(
            construct_size2_counterexample(&ex1.sys1, 0, 2.0),
            Err(CounterexampleError::PatternMismatch(_))
        ));
        // Community 2 of Example 1 has two members but a nonzero cross entry.
        assert!(matches!(
            construct_size2_counterexample(&ex1.sys1, 1, 2.0),
            Err(CounterexampleError::PatternMismatch(_))
        ));
    }

    #[test]
    fn equivalent_pairs_fail_verification() {
        let ex2 = example_fixture(2).unwrap();
        let same = CounterexamplePair {
            sys1: ex2.sys1.clone(),
            sys2: ex2.sys1.clone(),
            kind: CounterexampleKind::DegreeAmbiguity,
        };
        let report = verify_counterexample(&same, 1e-12);
        assert!(!report.check("not_equivalent").unwrap().passed);

        let g = GaugeTransform::new(vec![1, 0], vec![0.5, 3.0]).unwrap();
        let moved = CounterexamplePair {
            sys1: ex2.sys1.clone(),
            sys2: apply_transform(&ex2.sys1, &g).unwrap(),
            kind: CounterexampleKind::DegreeAmbiguity,
        };
        let report = verify_counterexample(&moved, 1e-12);
        assert!(report.check("same_offdiag").unwrap().passed);
        assert!(!report.check("not_equivalent").unwrap().passed);
        assert!(!report.passed());
    }

    #[test]
    fn fixture_reasons() {
        let ex1 = example_fixture(1).unwrap();
        assert_eq!(
            equivalent(&ex1.sys1, &ex1.sys2, 1e-8),
            Equivalence::NotEquivalent(Mismatch::Partition)
        );
    }
}
