//! Hand-computed metric fixtures. Expected values are written out as the
//! arithmetic written out by hand.

#![allow(dead_code)]

use std::collections::HashMap;

pub struct Case {
    pub name: &'static str,
    pub ranking: Vec<&'static str>,
    pub grades: Vec<(&'static str, u32)>,
    pub ndcg10: f64,
    /// (cutoff, rel_threshold, expected recall; None if undefined)
    pub recall: (usize, u32, Option<f64>),
}

impl Case {
    pub fn grade_map(&self) -> HashMap<&'static str, u32> {
        self.grades.iter().copied().collect()
    }
}

fn l(r: f64) -> f64 {
    (r + 1.0).log2()
}

pub fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "worked example [2,3,0]",
            ranking: vec!["a", "b", "c"],
            grades: vec![("a", 2), ("b", 3)],
            ndcg10: (2.0 + 3.0 / l(2.0)) / (3.0 + 2.0 / l(2.0)),
            recall: (50, 1, Some(1.0)),
        },
        Case {
            name: "single relevant at top",
            ranking: vec!["a", "x", "y"],
            grades: vec![("a", 1)],
            ndcg10: 1.0,
            recall: (1, 1, Some(1.0)),
        },
        Case {
            name: "nothing relevant retrieved",
            ranking: vec!["x", "y", "z"],
            grades: vec![("a", 1)],
            ndcg10: 0.0,
            recall: (3, 1, Some(0.0)),
        },
        Case {
            name: "three of five in top 50",
            ranking: vec!["a", "n1", "b", "n2", "c"],
            grades: vec![("a", 1), ("b", 1), ("c", 1), ("d", 1), ("e", 1)],
            ndcg10: (1.0 + 1.0 / l(3.0) + 1.0 / l(5.0))
                / (1.0 + 1.0 / l(2.0) + 1.0 / l(3.0) + 1.0 / l(4.0) + 1.0 / l(5.0)),
            recall: (50, 1, Some(0.6)),
        },
        Case {
            name: "relevant doc at rank 11 is past the cutoff",
            ranking: vec!["n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8", "n9", "n10", "a"],
            grades: vec![("a", 3)],
            ndcg10: 0.0,
            recall: (11, 1, Some(1.0)),
        },
        Case {
            name: "reversed ideal",
            ranking: vec!["c", "b", "a"],
            grades: vec![("a", 3), ("b", 2), ("c", 1)],
            ndcg10: (1.0 + 2.0 / l(2.0) + 3.0 / l(3.0)) / (3.0 + 2.0 / l(2.0) + 1.0 / l(3.0)),
            recall: (2, 1, Some(2.0 / 3.0)),
        },
        Case {
            name: "threshold two ignores grade one",
            ranking: vec!["a", "b", "c", "d"],
            grades: vec![("a", 1), ("b", 2), ("e", 2)],
            ndcg10: (1.0 + 2.0 / l(2.0)) / (2.0 + 2.0 / l(2.0) + 1.0 / l(3.0)),
            recall: (4, 2, Some(0.5)),
        },
        Case {
            name: "no doc reaches threshold",
            ranking: vec!["a", "b"],
            grades: vec![("a", 1)],
            ndcg10: 1.0,
            recall: (2, 2, None),
        },
        Case {
            name: "all zero grades",
            ranking: vec!["a", "b"],
            grades: vec![("a", 0), ("b", 0)],
            ndcg10: 0.0,
            recall: (2, 1, None),
        },
        Case {
            name: "more relevant docs than cutoff",
            ranking: (0..12)
                .map(|i| {
                    [
                        "r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "r9", "r10", "r11",
                    ][i]
                })
                .collect(),
            grades: (0..12)
                .map(|i| {
                    (
                        [
                            "r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "r9", "r10", "r11",
                        ][i],
                        1,
                    )
                })
                .collect(),
            ndcg10: 1.0,
            recall: (10, 1, Some(10.0 / 12.0)),
        },
        Case {
            name: "mixed grades with gap",
            ranking: vec!["x", "a", "y", "b"],
            grades: vec![("a", 2), ("b", 1)],
            ndcg10: (2.0 / l(2.0) + 1.0 / l(4.0)) / (2.0 + 1.0 / l(2.0)),
            recall: (3, 1, Some(0.5)),
        },
        Case {
            name: "unjudged docs count as zero",
            ranking: vec!["u1", "u2", "a"],
            grades: vec![("a", 1)],
            ndcg10: 1.0 / l(3.0),
            recall: (2, 1, Some(0.0)),
        },
    ]
}
