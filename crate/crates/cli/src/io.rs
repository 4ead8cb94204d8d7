//! Comparison and matrix CSV files.
//!
//! Comparisons: header `agent_a,agent_b,outcome`, one match per row, outcome
//! 1 when `agent_a` won. Matrices: first row and column hold agent names and
//! cell (i, j) is the probability that agent i beats agent j.

use std::path::Path;

use ste_core::estimation::{Comparison, ComparisonDataset};
use ste_core::numerics::Matrix;
use ste_core::tournament::{AgentRegistry, ProbTournament};

use crate::error::{CliError, Result};

pub const COMPARISON_HEADER: [&str; 3] = ["agent_a", "agent_b", "outcome"];
/// Tolerance for diagonal and complementarity checks on loaded matrices.
pub const MATRIX_TOL: f64 = 1e-9;
const MATRIX_CORNER: &str = "agent";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTournament {
    pub agents: AgentRegistry,
    pub p: ProbTournament,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn csv_err(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Data(format!("line {line}: {e}"))
}

pub fn load_comparisons(path: &Path) -> Result<ComparisonDataset> {
    parse_comparisons(&read(path)?, AgentRegistry::new())
        .map_err(|e| prefix(path, e))
}

/// Like [`load_comparisons`], but agents already in `agents` keep their
/// indices; new names are appended in order of first appearance.
pub fn load_comparisons_with(path: &Path, agents: AgentRegistry) -> Result<ComparisonDataset> {
    parse_comparisons(&read(path)?, agents).map_err(|e| prefix(path, e))
}

fn prefix(path: &Path, e: CliError) -> CliError {
    match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn parse_comparisons(text: &str, mut agents: AgentRegistry) -> Result<ComparisonDataset> {
    let mut rows = reader(text).into_records();
    let header = rows
        .next()
        .ok_or_else(|| CliError::Data("missing header agent_a,agent_b,outcome".into()))?
        .map_err(csv_err)?;
    if header.iter().ne(COMPARISON_HEADER) {
        return Err(CliError::Data(format!(
            "line 1: expected header agent_a,agent_b,outcome, found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(csv_err)?;
        let line = line_of(&row);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 3 {
            return Err(CliError::Data(format!(
                "line {line}: expected 3 fields, found {}",
                row.len()
            )));
        }
        let (a, b) = (&row[0], &row[1]);
        if a.is_empty() || b.is_empty() {
            return Err(CliError::Data(format!("line {line}: empty agent name")));
        }
        if a == b {
            return Err(CliError::Data(format!(
                "line {line}: agent {a:?} compared with itself"
            )));
        }
        let y = match &row[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CliError::Data(format!(
                    "line {line}: outcome must be 0 or 1, found {other:?}"
                )))
            }
        };
        let a = agents.get_or_insert(a);
        let b = agents.get_or_insert(b);
        records.push(Comparison { a, b, y });
    }
    Ok(ComparisonDataset::from_records(agents, records)?)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

pub fn comparisons_csv(data: &ComparisonDataset) -> String {
    let mut w = writer();
    w.write_record(COMPARISON_HEADER).expect("in-memory write");
    let names = data.agents();
    for r in data.records() {
        w.write_record([names.name(r.a), names.name(r.b), if r.y == 1 { "1" } else { "0" }])
            .expect("in-memory write");
    }
    finish(w)
}

pub fn matrix_csv(agents: &AgentRegistry, p: &ProbTournament) -> String {
    let mut w = writer();
    let n = p.n();
    let mut header = vec![MATRIX_CORNER.to_string()];
    header.extend(agents.names().iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for a in 0..n {
        let mut row = vec![agents.name(a).to_string()];
        // `{}` on f64 prints the shortest string that parses back exactly
        row.extend((0..n).map(|b| format!("{}", p.get(a, b))));
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

pub fn load_matrix(path: &Path) -> Result<NamedTournament> {
    parse_matrix(&read(path)?).map_err(|e| prefix(path, e))
}

pub fn parse_matrix(text: &str) -> Result<NamedTournament> {
    let rows: Vec<csv::StringRecord> = reader(text)
        .into_records()
        .collect::<Result<_, _>>()
        .map_err(csv_err)?;
    let rows: Vec<_> = rows
        .into_iter()
        .filter(|r| !(r.len() == 1 && r[0].is_empty()))
        .collect();
    let header = rows
        .first()
        .ok_or_else(|| CliError::Data("matrix file is empty".into()))?;
    let names: Vec<&str> = header.iter().skip(1).collect();
    let n = names.len();
    if rows.len() - 1 != n {
        return Err(CliError::Data(format!(
            "matrix is not square: {n} column names but {} rows",
            rows.len() - 1
        )));
    }
    let agents = AgentRegistry::from_names(&names).map_err(|e| CliError::Data(e.to_string()))?;
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows[1..].iter().enumerate() {
        let line = line_of(row);
        if row.len() != n + 1 {
            return Err(CliError::Data(format!(
                "line {line}: expected {} fields, found {}",
                n + 1,
                row.len()
            )));
        }
        if &row[0] != names[i] {
            return Err(CliError::Data(format!(
                "line {line}: row name {:?} does not match column name {:?}",
                &row[0], names[i]
            )));
        }
        for j in 0..n {
            let v: f64 = row[j + 1].parse().map_err(|_| {
                CliError::Data(format!("line {line}: {:?} is not a number", &row[j + 1]))
            })?;
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(CliError::Data(format!(
                    "line {line}: P[{}][{}] = {v} is outside [0, 1]",
                    names[i], names[j]
                )));
            }
            m[(i, j)] = v;
        }
    }
    for a in 0..n {
        if (m[(a, a)] - 0.5).abs() > MATRIX_TOL {
            return Err(CliError::Data(format!(
                "diagonal entry for {} is {}, must be 0.5",
                names[a],
                m[(a, a)]
            )));
        }
        m[(a, a)] = 0.5;
        for b in a + 1..n {
            let sum = m[(a, b)] + m[(b, a)];
            if (sum - 1.0).abs() > MATRIX_TOL {
                return Err(CliError::Data(format!(
                    "P[{0}][{1}] + P[{1}][{0}] = {sum}, must be 1",
                    names[a], names[b]
                )));
            }
        }
    }
    let p = ProbTournament::with_tolerance(m, MATRIX_TOL)?;
    Ok(NamedTournament { agents, p })
}

/// True when the file starts with the comparison header.
pub fn looks_like_comparisons(path: &Path) -> Result<bool> {
    let text = read(path)?;
    let first = reader(&text).into_records().next();
    Ok(matches!(first, Some(Ok(h)) if h.iter().eq(COMPARISON_HEADER)))
}
