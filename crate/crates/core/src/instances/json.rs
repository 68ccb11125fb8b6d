//! Problem files as JSON:
//!
//! ```json
//! {"n": 2, "p": 2,
//!  "objective": {"P": [-1, 0, 0, -1], "q": [0, 0], "r": 0},
//!  "constraints": [{"P": [1, 0, 0, 1], "q": [0, 0], "r": -1.2, "sense": "leq"}]}
//! ```
//!
//! `P` is row-major `n × n`, `p` is the number of leading integer variables
//! and `sense` is `"leq"` or `"eq"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QcqpProblem, QuadraticForm, Sense};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormFile {
    #[serde(rename = "P")]
    p: Vec<f64>,
    q: Vec<f64>,
    r: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    #[serde(rename = "P")]
    p: Vec<f64>,
    q: Vec<f64>,
    r: f64,
    sense: Sense,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    p: usize,
    objective: FormFile,
    #[serde(default)]
    constraints: Vec<ConstraintFile>,
}

fn form_to_file(f: &QuadraticForm) -> FormFile {
    let n = f.dim();
    let mut p = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            p.push(f.p().get(i, j));
        }
    }
    FormFile { p, q: f.q().to_vec(), r: f.r() }
}

pub fn render_problem(problem: &QcqpProblem) -> String {
    let file = ProblemFile {
        n: problem.n(),
        p: problem.num_integer(),
        objective: form_to_file(problem.objective()),
        constraints: problem
            .constraints()
            .iter()
            .map(|c| {
                let f = form_to_file(&c.form);
                ConstraintFile { p: f.p, q: f.q, r: f.r, sense: c.sense }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn parse_problem(text: &str, origin: &str) -> Result<QcqpProblem> {
    let file: ProblemFile = serde_json::from_str(text)
        .map_err(|e| Error::Parse { path: origin.to_string(), line: e.line(), msg: e.to_string() })?;
    let field = |name: String, e: Error| Error::Parse { path: origin.to_string(), line: 0, msg: format!("{name}: {e}") };
    let n = file.n;
    let form = |name: String, p: &[f64], q: Vec<f64>, r: f64| -> Result<QuadraticForm> {
        if q.len() != n {
            return Err(field(name, Error::DimensionMismatch { expected: n, got: q.len() }));
        }
        QuadraticForm::from_row_major(n, p, q, r).map_err(|e| field(name, e))
    };
    let objective = form("objective".into(), &file.objective.p, file.objective.q, file.objective.r)?;
    let mut problem = QcqpProblem::new(file.p, objective).map_err(|e| field("p".into(), e))?;
    for (i, c) in file.constraints.into_iter().enumerate() {
        let f = form(format!("constraints[{i}]"), &c.p, c.q, c.r)?;
        problem.push(f, c.sense)?;
    }
    Ok(problem)
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<QcqpProblem> {
    let path = path.as_ref();
    parse_problem(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_problem(path: impl AsRef<Path>, problem: &QcqpProblem) -> Result<()> {
    let mut text = render_problem(problem);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_ils, maxcut_to_qcqp, triangle};
    use crate::linalg::SymMatrix;

    fn concave() -> QcqpProblem {
        let obj = QuadraticForm::new(SymMatrix::identity(2).scaled(-1.0), vec![0.0; 2], 0.0).unwrap();
        let ball = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], -1.2).unwrap();
        QcqpProblem::new(2, obj).unwrap().with(ball, Sense::Leq).unwrap()
    }

    #[test]
    fn round_trips() {
        for p in [gen_ils(4, 1).unwrap(), maxcut_to_qcqp(&triangle()).unwrap(), concave()] {
            assert_eq!(parse_problem(&render_problem(&p), "x").unwrap(), p);
        }
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"{"n": 2, "p": 2,
            "objective": {"P": [-1, 0, 0, -1], "q": [0, 0], "r": 0},
            "constraints": [{"P": [1, 0, 0, 1], "q": [0, 0], "r": -1.2, "sense": "leq"}]}"#;
        assert_eq!(parse_problem(text, "doc").unwrap(), concave());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let bad_q = r#"{"n": 1, "p": 1, "objective": {"P": [1], "q": [0, 0], "r": 0}}"#;
        match parse_problem(bad_q, "f") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("objective"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let bad_sense = r#"{"n": 1, "p": 1, "objective": {"P": [1], "q": [0], "r": 0},
            "constraints": [{"P": [1], "q": [0], "r": 0, "sense": "geq"}]}"#;
        match parse_problem(bad_sense, "f") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad_p = r#"{"n": 1, "p": 2, "objective": {"P": [1], "q": [0], "r": 0}}"#;
        assert!(parse_problem(bad_p, "f").is_err());
        assert!(parse_problem("{\"n\": 1, \"extra\": 0}", "f").is_err());
    }

    proptest::proptest! {
        #[test]
        fn floats_round_trip_exactly(n in 1usize..12, seed in 0u64..1000) {
            let p = gen_ils(n, seed).unwrap();
            let back = parse_problem(&render_problem(&p), "f").unwrap();
            proptest::prop_assert_eq!(back, p);
        }
    }
}
