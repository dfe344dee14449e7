//! The partial order between the conditions, as a check on verdict tables.

use super::{CqKind, CqStatus};

/// `(stronger, weaker)`: if the stronger condition holds, so does the
/// weaker one. The checker closes this list transitively.
pub const IMPLICATIONS: &[(CqKind, CqKind)] = &[
    (CqKind::Nondegeneracy, CqKind::SeqCrcq),
    (CqKind::Nondegeneracy, CqKind::Robinson),
    (CqKind::Nondegeneracy, CqKind::WeakNondegeneracy),
    (CqKind::SeqCrcq, CqKind::SeqCpld),
    (CqKind::SeqCrcq, CqKind::WeakCrcq),
    (CqKind::SeqCpld, CqKind::WeakCpld),
    (CqKind::SeqCpld, CqKind::Msr),
    (CqKind::Robinson, CqKind::SeqCpld),
    (CqKind::Robinson, CqKind::WeakRobinson),
    (CqKind::WeakNondegeneracy, CqKind::WeakCrcq),
    (CqKind::WeakNondegeneracy, CqKind::WeakRobinson),
    (CqKind::WeakCrcq, CqKind::WeakCpld),
    (CqKind::WeakRobinson, CqKind::WeakCpld),
];

/// Transitive closure of [`IMPLICATIONS`].
pub fn implication_closure() -> Vec<(CqKind, CqKind)> {
    let mut out: Vec<(CqKind, CqKind)> = IMPLICATIONS.to_vec();
    loop {
        let mut added = false;
        for i in 0..out.len() {
            for j in 0..out.len() {
                let (a, b) = out[i];
                let (c, d) = out[j];
                if b == c && a != d && !out.contains(&(a, d)) {
                    out.push((a, d));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    out.sort();
    out
}

/// Pairs where the stronger condition was not found violated while the
/// weaker one was.
pub fn implication_violations(table: &[(CqKind, CqStatus)]) -> Vec<(CqKind, CqKind)> {
    let status = |k: CqKind| table.iter().find(|(c, _)| *c == k).map(|(_, s)| *s);
    implication_closure()
        .into_iter()
        .filter(|&(a, b)| {
            matches!(status(a), Some(CqStatus::CertifiedHolds | CqStatus::NoViolationFound))
                && status(b) == Some(CqStatus::Violated)
        })
        .collect()
}
