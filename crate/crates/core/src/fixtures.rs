//! Problem files and the built-in fixture registry.
//!
//! A problem file is TOML; the grammar is described in
//! `docs/problem-format.md`.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::cq::{CqKind, CqStatus, NlpCq, WitnessCurve};
use crate::linalg::SymMat;
use crate::model::{embed_diagonal_nlp, DiagonalEmbedding, MatrixPolyProblem, QuadForm, QuadTerm, ScalarConstraint};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    /// One-based; zero when no location is known.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn location(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn error_at(src: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ParseError {
    let (line, column) = span.map_or((0, 0), |s| location(src, s.start));
    ParseError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMatrix {
    Upper(Vec<f64>),
    Rows { rows: Vec<Vec<f64>> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    #[serde(default)]
    c0: f64,
    c_lin: Spanned<Vec<f64>>,
    #[serde(default)]
    c_quad: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadTerm {
    i: usize,
    j: usize,
    matrix: Spanned<RawMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    a0: Spanned<RawMatrix>,
    a_lin: Vec<Spanned<RawMatrix>>,
    #[serde(default)]
    b_quad: Vec<Spanned<RawQuadTerm>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScalar {
    #[serde(default)]
    c0: f64,
    lin: Vec<f64>,
    #[serde(default)]
    quad: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    x: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    description: String,
    n: Spanned<usize>,
    #[serde(default)]
    m: Option<Spanned<usize>>,
    objective: RawObjective,
    #[serde(default)]
    constraint: Option<Spanned<RawConstraint>>,
    #[serde(default)]
    nlp_constraint: Vec<Spanned<RawScalar>>,
    #[serde(default)]
    reference: Option<Spanned<RawPoint>>,
    #[serde(default)]
    start: Option<Spanned<RawPoint>>,
    #[serde(default)]
    expected: BTreeMap<String, Spanned<String>>,
    #[serde(default)]
    nlp_expected: BTreeMap<String, Spanned<String>>,
    #[serde(default)]
    witness: Vec<Spanned<WitnessCurve>>,
}

/// A parsed problem file.
#[derive(Clone)]
pub struct ProblemFile {
    pub name: String,
    pub aliases: Vec<String>,
    pub description: String,
    pub problem: MatrixPolyProblem,
    /// Present when the constraint was given as scalar inequalities.
    pub nlp: Option<DiagonalEmbedding>,
    pub reference: Option<Vec<f64>>,
    /// Solver start point.
    pub start: Option<Vec<f64>>,
    pub expected: BTreeMap<CqKind, CqStatus>,
    pub nlp_expected: BTreeMap<NlpCq, CqStatus>,
    pub curves: Vec<WitnessCurve>,
}

impl std::fmt::Debug for ProblemFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemFile")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

impl ProblemFile {
    pub fn matches(&self, name: &str) -> bool {
        self.name == name || self.aliases.iter().any(|a| a == name)
    }

    /// Expected table as `(kind, status)` pairs in check order.
    pub fn expected_table(&self) -> Vec<(CqKind, CqStatus)> {
        self.expected.iter().map(|(k, s)| (*k, *s)).collect()
    }
}

fn matrix(src: &str, raw: &Spanned<RawMatrix>, m: Option<usize>, what: &str) -> Result<SymMat, ParseError> {
    let span = Some(raw.span());
    let err = |msg: String| error_at(src, span.clone(), msg);
    let mat = match raw.get_ref() {
        RawMatrix::Upper(v) => {
            // len = k(k+1)/2
            let k = (((8 * v.len() + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
            if k * (k + 1) / 2 != v.len() || v.is_empty() {
                return Err(err(format!("{what}: {} entries is not an upper triangle", v.len())));
            }
            SymMat::from_upper(k, v.clone()).map_err(|e| err(format!("{what}: {e}")))?
        }
        RawMatrix::Rows { rows } => SymMat::from_rows(rows).map_err(|e| err(format!("{what}: {e}")))?,
    };
    if !mat.is_finite() {
        return Err(err(format!("{what}: non-finite entry")));
    }
    if let Some(m) = m {
        if mat.dim() != m {
            return Err(err(format!("{what}: order {} but the constraint has order {m}", mat.dim())));
        }
    }
    Ok(mat)
}

fn square(src: &str, rows: &[Vec<f64>], n: usize, span: Range<usize>, what: &str) -> Result<Vec<Vec<f64>>, ParseError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(error_at(src, Some(span), format!("{what}: expected a {n} x {n} matrix")));
    }
    for i in 0..n {
        for j in 0..i {
            if rows[i][j] != rows[j][i] {
                return Err(error_at(src, Some(span), format!("{what}: not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(rows.to_vec())
}

/// Parses a problem file. Errors carry one-based line and column.
pub fn parse_problem(src: &str) -> Result<ProblemFile, ParseError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| error_at(src, e.span(), e.message().to_string()))?;
    let n = *raw.n.get_ref();
    if n == 0 {
        return Err(error_at(src, Some(raw.n.span()), "n must be positive"));
    }
    let c_lin = raw.objective.c_lin.get_ref().clone();
    if c_lin.len() != n {
        return Err(error_at(
            src,
            Some(raw.objective.c_lin.span()),
            format!("c_lin has {} entries, expected {n}", c_lin.len()),
        ));
    }
    let c_quad = match &raw.objective.c_quad {
        Some(q) => square(src, q.get_ref(), n, q.span(), "c_quad")?,
        None => vec![vec![0.0; n]; n],
    };
    let objective = QuadForm {
        c0: raw.objective.c0,
        lin: c_lin,
        quad: c_quad,
    };
    let m_decl = raw.m.as_ref().map(|m| *m.get_ref());

    let (problem, nlp) = match (&raw.constraint, raw.nlp_constraint.is_empty()) {
        (Some(c), true) => {
            let c_span = c.span();
            let c = c.get_ref();
            let a0 = matrix(src, &c.a0, m_decl, "a0")?;
            let m = a0.dim();
            if c.a_lin.len() != n {
                return Err(error_at(src, Some(c_span), format!("a_lin has {} matrices, expected {n}", c.a_lin.len())));
            }
            let a_lin = c
                .a_lin
                .iter()
                .enumerate()
                .map(|(i, a)| matrix(src, a, Some(m), &format!("a_lin[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let mut b_quad = Vec::new();
            for t in &c.b_quad {
                let span = t.span();
                let t = t.get_ref();
                if t.i > t.j || t.j >= n {
                    return Err(error_at(src, Some(span), format!("b_quad index ({}, {}) needs i <= j < {n}", t.i, t.j)));
                }
                b_quad.push(QuadTerm {
                    i: t.i,
                    j: t.j,
                    matrix: matrix(src, &t.matrix, Some(m), "b_quad matrix")?,
                });
            }
            let p = MatrixPolyProblem::new(objective.clone(), a0, a_lin, b_quad)
                .map_err(|e| error_at(src, Some(c_span), e.to_string()))?;
            (p, None)
        }
        (None, false) => {
            let mut cons = Vec::new();
            for s in &raw.nlp_constraint {
                let span = s.span();
                let s = s.get_ref();
                if s.lin.len() != n {
                    return Err(error_at(src, Some(span), format!("lin has {} entries, expected {n}", s.lin.len())));
                }
                let quad = match &s.quad {
                    Some(q) => square(src, q, n, span.clone(), "quad")?,
                    None => vec![vec![0.0; n]; n],
                };
                cons.push(ScalarConstraint::Poly(QuadForm {
                    c0: s.c0,
                    lin: s.lin.clone(),
                    quad,
                }));
            }
            if let Some(m) = m_decl {
                if m != cons.len() {
                    return Err(error_at(
                        src,
                        raw.m.as_ref().map(|m| m.span()),
                        format!("m = {m} but {} scalar constraints are given", cons.len()),
                    ));
                }
            }
            let emb = embed_diagonal_nlp(objective.clone(), cons).map_err(|e| error_at(src, None, e.to_string()))?;
            let p = emb
                .to_matrix_poly()
                .ok_or_else(|| error_at(src, None, "scalar constraints must be polynomial"))?;
            (p, Some(emb))
        }
        (Some(c), false) => {
            return Err(error_at(src, Some(c.span()), "give either [constraint] or [[nlp_constraint]], not both"));
        }
        (None, true) => return Err(error_at(src, None, "missing [constraint] or [[nlp_constraint]]")),
    };
    let m = crate::model::NsdpProblem::m(&problem);

    let point = |p: &Option<Spanned<RawPoint>>, what: &str| -> Result<Option<Vec<f64>>, ParseError> {
        match p {
            Some(p) if p.get_ref().x.len() != n => Err(error_at(
                src,
                Some(p.span()),
                format!("{what} point has {} entries, expected {n}", p.get_ref().x.len()),
            )),
            Some(p) => Ok(Some(p.get_ref().x.clone())),
            None => Ok(None),
        }
    };
    let reference = point(&raw.reference, "reference")?;
    let start = point(&raw.start, "start")?;

    let mut expected = BTreeMap::new();
    for (k, v) in &raw.expected {
        let kind: CqKind = k.parse().map_err(|_| error_at(src, Some(v.span()), format!("unknown check {k:?}")))?;
        let status: CqStatus = v
            .get_ref()
            .parse()
            .map_err(|_| error_at(src, Some(v.span()), format!("unknown status {:?}", v.get_ref())))?;
        expected.insert(kind, status);
    }
    let mut nlp_expected = BTreeMap::new();
    for (k, v) in &raw.nlp_expected {
        let kind = match k.as_str() {
            "crcq" => NlpCq::Crcq,
            "cpld" => NlpCq::Cpld,
            _ => return Err(error_at(src, Some(v.span()), format!("unknown NLP check {k:?}"))),
        };
        let status: CqStatus = v
            .get_ref()
            .parse()
            .map_err(|_| error_at(src, Some(v.span()), format!("unknown status {:?}", v.get_ref())))?;
        nlp_expected.insert(kind, status);
    }
    let mut curves = Vec::new();
    for w in &raw.witness {
        w.get_ref()
            .validate(n, m)
            .map_err(|e| error_at(src, Some(w.span()), e.to_string()))?;
        curves.push(w.get_ref().clone());
    }
    Ok(ProblemFile {
        name: raw.name,
        aliases: raw.aliases,
        description: raw.description,
        problem,
        nlp,
        reference,
        start,
        expected,
        nlp_expected,
        curves,
    })
}

const SOURCES: &[(&str, &str)] = &[
    ("no-multiplier", include_str!("../fixtures/no-multiplier.toml")),
    ("rank-jump", include_str!("../fixtures/rank-jump.toml")),
    ("rotating-eigvec", include_str!("../fixtures/rotating-eigvec.toml")),
    ("diag-opposite", include_str!("../fixtures/diag-opposite.toml")),
    ("diag-double", include_str!("../fixtures/diag-double.toml")),
    ("linear-indefinite", include_str!("../fixtures/linear-indefinite.toml")),
    ("interior", include_str!("../fixtures/interior.toml")),
    ("nlp-opposite-pair", include_str!("../fixtures/nlp-opposite-pair.toml")),
    ("nlp-rank-jump", include_str!("../fixtures/nlp-rank-jump.toml")),
    ("nlp-cusp", include_str!("../fixtures/nlp-cusp.toml")),
    ("nlp-licq", include_str!("../fixtures/nlp-licq.toml")),
    ("nlp-vanishing-gradient", include_str!("../fixtures/nlp-vanishing-gradient.toml")),
];

/// Every built-in fixture, in registry order.
pub fn fixtures() -> Vec<ProblemFile> {
    SOURCES
        .iter()
        .map(|(name, src)| parse_problem(src).unwrap_or_else(|e| panic!("built-in fixture {name}: {e}")))
        .collect()
}

/// Looks a fixture up by name or alias.
pub fn fixture(name: &str) -> Option<ProblemFile> {
    fixtures().into_iter().find(|f| f.matches(name))
}

/// Source text of a built-in fixture.
pub fn fixture_source(name: &str) -> Option<&'static str> {
    let canonical = fixture(name)?.name;
    SOURCES.iter().find(|(n, _)| *n == canonical).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::implication_violations;
    use crate::model::NsdpProblem;

    #[test]
    fn every_fixture_parses_with_a_reference_point() {
        let all = fixtures();
        assert_eq!(all.len(), SOURCES.len());
        for (f, (name, _)) in all.iter().zip(SOURCES) {
            assert_eq!(&f.name, name);
            let x = f.reference.as_ref().expect("reference point");
            assert_eq!(x.len(), f.problem.n());
            assert!(f.start.is_some());
            assert_eq!(f.expected.len(), CqKind::ALL.len(), "{name}");
        }
    }

    #[test]
    fn expected_tables_respect_the_implications() {
        for f in fixtures() {
            assert!(implication_violations(&f.expected_table()).is_empty(), "{}", f.name);
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(fixture("ex-4.2").unwrap().name, "diag-double");
        assert!(fixture("nope").is_none());
    }

    #[test]
    fn syntax_error_has_location() {
        let e = parse_problem("name = \"x\"\nn = [\n").unwrap_err();
        assert_eq!(e.line, 2, "{e}");
    }

    #[test]
    fn non_symmetric_rows_rejected() {
        let src = r#"
name = "bad"
n = 1
[objective]
c_lin = [1.0]
[constraint]
a0 = { rows = [[1.0, 2.0], [3.0, 1.0]] }
a_lin = [[1.0, 0.0, 1.0]]
"#;
        let e = parse_problem(src).unwrap_err();
        assert_eq!(e.line, 7, "{e}");
        assert!(e.message.contains("symmetric"), "{e}");
    }

    #[test]
    fn wrong_triangle_length_rejected() {
        let src = r#"
name = "bad"
n = 1
[objective]
c_lin = [1.0]
[constraint]
a0 = [1.0, 2.0]
a_lin = [[1.0, 0.0, 1.0]]
"#;
        let e = parse_problem(src).unwrap_err();
        assert_eq!(e.line, 7);
    }

    #[test]
    fn nlp_file_embeds_diagonally() {
        let f = fixture("nlp-licq").unwrap();
        let g = f.problem.g(&[0.3, -0.2]);
        assert!(g.is_diagonal());
        assert_eq!(g.diag(), vec![0.3, -0.2]);
        assert!(f.nlp.is_some());
    }

    #[test]
    fn matrix_fixture_values() {
        let f = fixture("no-multiplier").unwrap();
        let g = f.problem.g(&[0.5]);
        assert_eq!(g.to_rows(), vec![vec![0.5, 0.75], vec![0.75, 0.5]]);
        let f = fixture("rank-jump").unwrap();
        let g = f.problem.g(&[0.25, 2.0]);
        assert_eq!(g.to_rows(), vec![vec![4.5, -4.0], vec![-4.0, 4.5]]);
    }
}
