//! Dissimilarity matrices: parsing, validation, serialization and duplicate removal.
//!
//! A [`DissimilarityMatrix`] is a labelled, symmetric, nonnegative matrix with a
//! zero diagonal. It is *not* required to satisfy the triangle inequality.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

/// Errors produced while reading or validating a matrix.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum DissimError {
    /// The text is not well-formed in the declared format.
    #[error("parse error: {0}")]
    Parse(String),
    /// The numbers were read but do not describe a valid dissimilarity.
    #[error("validation error: {0}")]
    Validation(String),
}

/// Comparison slack used by every stage of a pipeline run.
///
/// The resolved scale is `max(abs_floor, rel_eps * max_entry)`. Two reals are
/// treated as equal when they differ by at most that scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_eps: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_eps: 1e-9,
            abs_floor: 1e-12,
        }
    }
}

impl Tolerance {
    /// Exact comparisons (τ = 0), for integer-valued inputs.
    pub const EXACT: Tolerance = Tolerance {
        rel_eps: 0.0,
        abs_floor: 0.0,
    };

    pub fn new(rel_eps: f64, abs_floor: f64) -> Result<Self, DissimError> {
        if !(rel_eps >= 0.0 && rel_eps.is_finite() && abs_floor >= 0.0 && abs_floor.is_finite()) {
            return Err(DissimError::Validation(format!(
                "tolerance parameters must be finite and nonnegative (rel={rel_eps}, abs={abs_floor})"
            )));
        }
        Ok(Tolerance { rel_eps, abs_floor })
    }

    /// The comparison scale τ for entries whose magnitude is at most `max_entry`.
    pub fn resolve(&self, max_entry: f64) -> f64 {
        self.abs_floor.max(self.rel_eps * max_entry.abs())
    }

    /// The comparison scale τ for a given matrix.
    pub fn scale(&self, d: &DissimilarityMatrix) -> f64 {
        self.resolve(d.max_entry())
    }
}

impl FromStr for Tolerance {
    type Err = DissimError;

    /// Parses `"rel"` or `"rel,abs"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(',').map(str::trim);
        let parse = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| DissimError::Parse(format!("bad tolerance value `{p}`")))
        };
        let rel = parse(parts.next().unwrap_or(""))?;
        let abs = match parts.next() {
            Some(p) => parse(p)?,
            None => Tolerance::default().abs_floor,
        };
        if parts.next().is_some() {
            return Err(DissimError::Parse(format!("bad tolerance `{s}`")));
        }
        Tolerance::new(rel, abs)
    }
}

/// Text formats understood by [`parse_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Tsv,
    PhylipSquare,
}

impl FromStr for MatrixFormat {
    type Err = DissimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "tsv" => Ok(MatrixFormat::Tsv),
            "phylip" | "phylip-square" | "phy" => Ok(MatrixFormat::PhylipSquare),
            other => Err(DissimError::Parse(format!(
                "unknown matrix format `{other}`"
            ))),
        }
    }
}

impl MatrixFormat {
    /// Guess a format from a file extension, defaulting to CSV.
    pub fn from_extension(path: &str) -> Self {
        let lower = path.to_ascii_lowercase();
        if lower.ends_with(".tsv") || lower.ends_with(".tab") {
            MatrixFormat::Tsv
        } else if lower.ends_with(".phy") || lower.ends_with(".phylip") || lower.ends_with(".dist")
        {
            MatrixFormat::PhylipSquare
        } else {
            MatrixFormat::Csv
        }
    }
}

/// A labelled n×n dissimilarity matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Build from labels and rows, validating with the default tolerance.
    pub fn from_rows(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, DissimError> {
        Self::from_rows_with(labels, rows, &Tolerance::default())
    }

    /// Build from labels and rows.
    ///
    /// Off-diagonal asymmetry and diagonal entries within τ are repaired
    /// (averaged, resp. zeroed); anything beyond τ is an error.
    pub fn from_rows_with(
        labels: Vec<String>,
        rows: Vec<Vec<f64>>,
        tol: &Tolerance,
    ) -> Result<Self, DissimError> {
        let n = labels.len();
        if n == 0 {
            return Err(DissimError::Validation("empty matrix".into()));
        }
        if rows.len() != n {
            return Err(DissimError::Validation(format!(
                "{} labels but {} rows",
                n,
                rows.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for l in &labels {
            if l.is_empty() {
                return Err(DissimError::Validation("empty label".into()));
            }
            if !seen.insert(l.as_str()) {
                return Err(DissimError::Validation(format!("duplicate label `{l}`")));
            }
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(DissimError::Validation(format!(
                    "row `{}` has {} entries, expected {}",
                    labels[i],
                    row.len(),
                    n
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(DissimError::Validation(format!(
                        "non-finite entry at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
                if v < 0.0 {
                    return Err(DissimError::Validation(format!(
                        "negative entry {v} at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
                values.push(v);
            }
        }
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        let tau = tol.resolve(max);
        for i in 0..n {
            let diag = values[i * n + i];
            if diag > tau {
                return Err(DissimError::Validation(format!(
                    "nonzero diagonal entry {diag} for `{}`",
                    labels[i]
                )));
            }
            values[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if (a - b).abs() > tau {
                    return Err(DissimError::Validation(format!(
                        "asymmetric entries d({},{})={a} vs d({},{})={b}",
                        labels[i], labels[j], labels[j], labels[i]
                    )));
                }
                if a != b {
                    let m = 0.5 * (a + b);
                    values[i * n + j] = m;
                    values[j * n + i] = m;
                }
            }
        }
        Ok(DissimilarityMatrix { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.labels.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn max_entry(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Rows as nested vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    /// The principal submatrix on `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> DissimilarityMatrix {
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        let mut values = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            for &j in indices {
                values.push(self.get(i, j));
            }
        }
        DissimilarityMatrix { labels, values }
    }

    /// Rename every object; `labels` must be the same length and distinct.
    pub fn relabel(&self, labels: Vec<String>) -> Result<DissimilarityMatrix, DissimError> {
        if labels.len() != self.len() {
            return Err(DissimError::Validation("label count mismatch".into()));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(DissimError::Validation("duplicate label".into()));
        }
        Ok(DissimilarityMatrix {
            labels,
            values: self.values.clone(),
        })
    }

    /// Overwrite a symmetric pair of entries. Used to build perturbed instances.
    pub fn with_entry(&self, i: usize, j: usize, value: f64) -> Result<Self, DissimError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(DissimError::Validation(format!("bad entry {value}")));
        }
        if i == j && value != 0.0 {
            return Err(DissimError::Validation("diagonal must stay zero".into()));
        }
        let n = self.len();
        let mut out = self.clone();
        out.values[i * n + j] = value;
        out.values[j * n + i] = value;
        Ok(out)
    }

    /// Serialize in one of the supported formats. Floats use the shortest
    /// representation that round-trips.
    pub fn to_text(&self, format: MatrixFormat) -> String {
        let mut out = String::new();
        match format {
            MatrixFormat::Csv | MatrixFormat::Tsv => {
                let sep = if format == MatrixFormat::Csv {
                    ','
                } else {
                    '\t'
                };
                let mut w = csv::WriterBuilder::new()
                    .delimiter(sep as u8)
                    .from_writer(Vec::new());
                let mut header = vec![String::new()];
                header.extend(self.labels.iter().cloned());
                w.write_record(&header).expect("in-memory write");
                for i in 0..self.len() {
                    let mut rec = vec![self.labels[i].clone()];
                    rec.extend(self.row(i).iter().map(|v| v.to_string()));
                    w.write_record(&rec).expect("in-memory write");
                }
                out = String::from_utf8(w.into_inner().expect("in-memory flush"))
                    .expect("labels are UTF-8");
            }
            MatrixFormat::PhylipSquare => {
                let _ = writeln!(out, "{}", self.len());
                for i in 0..self.len() {
                    out.push_str(&self.labels[i]);
                    for v in self.row(i) {
                        let _ = write!(out, " {v}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Parse a matrix with the default tolerance.
pub fn parse_matrix(text: &str, format: MatrixFormat) -> Result<DissimilarityMatrix, DissimError> {
    parse_matrix_with(text, format, &Tolerance::default())
}

/// Parse a matrix, repairing asymmetry within the tolerance of `tol`.
pub fn parse_matrix_with(
    text: &str,
    format: MatrixFormat,
    tol: &Tolerance,
) -> Result<DissimilarityMatrix, DissimError> {
    let (labels, rows) = match format {
        MatrixFormat::Csv => parse_delimited(text, b',')?,
        MatrixFormat::Tsv => parse_delimited(text, b'\t')?,
        MatrixFormat::PhylipSquare => parse_phylip(text)?,
    };
    DissimilarityMatrix::from_rows_with(labels, rows, tol)
}

fn parse_number(cell: &str) -> Result<f64, DissimError> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| DissimError::Parse(format!("not a number: `{cell}`")))
}

// Header row: either n labels or a corner cell followed by n labels.
// Data rows: either a label followed by n values, or just n values.
fn parse_delimited(text: &str, delimiter: u8) -> Result<(Vec<String>, Vec<Vec<f64>>), DissimError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| DissimError::Parse(e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }
    if records.len() < 2 {
        return Err(DissimError::Parse(
            "need a header row and at least one data row".into(),
        ));
    }
    let header = &records[0];
    let data = &records[1..];
    let n = data.len();
    let header_labels: Vec<String> = match header.len() {
        len if len == n => header.clone(),
        len if len == n + 1 => header[1..].to_vec(),
        len => {
            return Err(DissimError::Parse(format!(
                "header has {len} cells for {n} data rows"
            )))
        }
    };
    let mut rows = Vec::with_capacity(n);
    for (i, rec) in data.iter().enumerate() {
        let cells = match rec.len() {
            len if len == n + 1 => {
                if rec[0] != header_labels[i] {
                    return Err(DissimError::Parse(format!(
                        "row label `{}` does not match header label `{}`",
                        rec[0], header_labels[i]
                    )));
                }
                &rec[1..]
            }
            len if len == n => &rec[..],
            len => {
                return Err(DissimError::Parse(format!(
                    "row {} has {len} cells, expected {n} or {}",
                    i + 1,
                    n + 1
                )))
            }
        };
        rows.push(
            cells
                .iter()
                .map(|c| parse_number(c))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((header_labels, rows))
}

fn parse_phylip(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), DissimError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| DissimError::Parse("empty input".into()))?;
    let n: usize = first
        .trim()
        .parse()
        .map_err(|_| DissimError::Parse(format!("bad count line `{}`", first.trim())))?;
    if n == 0 {
        return Err(DissimError::Parse("count must be positive".into()));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut labels = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let label = tokens
            .next()
            .ok_or_else(|| DissimError::Parse(format!("missing row {}", i + 1)))?;
        labels.push(label.to_owned());
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let tok = tokens
                .next()
                .ok_or_else(|| DissimError::Parse(format!("row `{label}` is short")))?;
            row.push(parse_number(tok)?);
        }
        rows.push(row);
    }
    if let Some(extra) = tokens.next() {
        return Err(DissimError::Parse(format!("trailing token `{extra}`")));
    }
    Ok((labels, rows))
}

/// Output of [`deduplicate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DedupResult {
    /// One object per class of identical rows, labels in lexicographic order.
    pub reduced: DissimilarityMatrix,
    /// Removed label → surviving representative.
    pub aliases: BTreeMap<String, String>,
}

fn rows_equal(d: &DissimilarityMatrix, i: usize, j: usize, tau: f64) -> bool {
    d.row(i)
        .iter()
        .zip(d.row(j))
        .all(|(a, b)| (a - b).abs() <= tau)
}

/// Merge objects whose rows coincide.
///
/// Two objects are duplicates when `d(x,z) = d(y,z)` for every `z` *and*
/// `d(x,y) = 0`; comparing full rows checks both at once, since the rows
/// agree in columns x and y only if `d(x,y) = d(y,x) = 0`. Rows are sorted
/// lexicographically and adjacent rows compared, so the work is a sort plus
/// O(n²) comparisons.
pub fn deduplicate(d: &DissimilarityMatrix, tol: &Tolerance) -> DedupResult {
    let n = d.len();
    let tau = tol.scale(d);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        d.row(i)
            .iter()
            .zip(d.row(j))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| d.labels[i].cmp(&d.labels[j]))
    });

    // Runs of equal rows; each run is compared against its first member.
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match classes.last_mut() {
            Some(class) if rows_equal(d, class[0], i, tau) => class.push(i),
            _ => classes.push(vec![i]),
        }
    }

    let mut aliases = BTreeMap::new();
    let mut keep = Vec::with_capacity(classes.len());
    for class in &classes {
        let rep = *class
            .iter()
            .min_by(|&&a, &&b| d.labels[a].cmp(&d.labels[b]))
            .expect("classes are nonempty");
        keep.push(rep);
        for &m in class {
            if m != rep {
                aliases.insert(d.labels[m].clone(), d.labels[rep].clone());
            }
        }
    }
    keep.sort_by(|&a, &b| d.labels[a].cmp(&d.labels[b]));
    DedupResult {
        reduced: d.submatrix(&keep),
        aliases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(labels: &[&str], rows: &[&[f64]]) -> DissimilarityMatrix {
        DissimilarityMatrix::from_rows(
            labels.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_one_by_one_block() {
        let d = parse_matrix("a\n0", MatrixFormat::Csv).unwrap();
        assert_eq!(d.labels(), ["a"]);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn parses_path_metric_csv() {
        let text = ",a,b,c\na,0,1,2\nb,1,0,1\nc,2,1,0\n";
        let d = parse_matrix(text, MatrixFormat::Csv).unwrap();
        assert_eq!(d.labels(), ["a", "b", "c"]);
        assert_eq!(
            d.to_rows(),
            vec![vec![0., 1., 2.], vec![1., 0., 1.], vec![2., 1., 0.]]
        );
    }

    #[test]
    fn header_without_corner_and_rows_without_labels() {
        let text = "a,b\n0,1.5\n1.5,0\n";
        let d = parse_matrix(text, MatrixFormat::Csv).unwrap();
        assert_eq!(d.get(0, 1), 1.5);
    }

    #[test]
    fn asymmetric_block_is_rejected() {
        let err = parse_matrix("a,b\n0,1\n2,0", MatrixFormat::Csv).unwrap_err();
        assert!(matches!(err, DissimError::Validation(_)), "{err:?}");
    }

    #[test]
    fn tiny_asymmetry_is_averaged() {
        let d = parse_matrix("a,b\n0,1\n1.0000000000001,0", MatrixFormat::Csv).unwrap();
        assert_eq!(d.get(0, 1), d.get(1, 0));
    }

    #[test]
    fn validation_errors() {
        let bad = [
            ",a,b\na,0,-1\nb,-1,0",
            ",a,b\na,1,1\nb,1,0",
            ",a,a\na,0,1\na,1,0",
            ",a,b\na,0,inf\nb,inf,0",
        ];
        for text in bad {
            assert!(
                matches!(
                    parse_matrix(text, MatrixFormat::Csv),
                    Err(DissimError::Validation(_))
                ),
                "{text}"
            );
        }
        assert!(matches!(
            parse_matrix(",a,b\na,0,x\nb,1,0", MatrixFormat::Csv),
            Err(DissimError::Parse(_))
        ));
    }

    #[test]
    fn phylip_and_tsv() {
        let d = parse_matrix("3\na 0 1 2\nb 1 0 1\nc 2 1 0\n", MatrixFormat::PhylipSquare).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        let t = parse_matrix("\ta\tb\na\t0\t4\nb\t4\t0\n", MatrixFormat::Tsv).unwrap();
        assert_eq!(t.get(1, 0), 4.0);
        assert!(parse_matrix("2\na 0 1\n", MatrixFormat::PhylipSquare).is_err());
    }

    #[test]
    fn tolerance_from_str() {
        let t: Tolerance = "1e-6".parse().unwrap();
        assert_eq!(t.rel_eps, 1e-6);
        assert_eq!(t.abs_floor, 1e-12);
        let t: Tolerance = "0,0".parse().unwrap();
        assert_eq!(t, Tolerance::EXACT);
        assert!("-1".parse::<Tolerance>().is_err());
    }

    #[test]
    fn exact_duplicate_is_dropped() {
        let d = m(
            &["a", "b", "c"],
            &[&[0., 0., 3.], &[0., 0., 3.], &[3., 3., 0.]],
        );
        let r = deduplicate(&d, &Tolerance::default());
        assert_eq!(r.reduced.labels(), ["a", "c"]);
        assert_eq!(r.aliases.get("b").map(String::as_str), Some("a"));
    }

    #[test]
    fn distinct_rows_are_untouched() {
        let d = m(
            &["a", "b", "c"],
            &[&[0., 1., 2.], &[1., 0., 1.], &[2., 1., 0.]],
        );
        let r = deduplicate(&d, &Tolerance::default());
        assert_eq!(r.reduced, d);
        assert!(r.aliases.is_empty());
    }

    #[test]
    fn identical_rows_with_positive_mutual_distance_are_kept() {
        // d(x,z) = d(y,z) for all other z, but d(x,y) > 0.
        let d = m(
            &["x", "y", "z"],
            &[&[0., 1., 2.], &[1., 0., 2.], &[2., 2., 0.]],
        );
        let r = deduplicate(&d, &Tolerance::default());
        assert_eq!(r.reduced.len(), 3);
    }

    // Brute-force all-pairs row comparison.
    fn brute_force_classes(d: &DissimilarityMatrix) -> Vec<Vec<String>> {
        let n = d.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let mut class = vec![d.label(i).to_string()];
            for j in (i + 1)..n {
                if (0..n).all(|k| d.get(i, k) == d.get(j, k)) {
                    seen[j] = true;
                    class.push(d.label(j).to_string());
                }
            }
            class.sort();
            out.push(class);
        }
        out.sort();
        out
    }

    #[test]
    fn three_mutual_duplicates_share_one_representative() {
        let d = m(
            &["p", "q", "s", "t"],
            &[
                &[0., 0., 0., 5.],
                &[0., 0., 0., 5.],
                &[0., 0., 0., 5.],
                &[5., 5., 5., 0.],
            ],
        );
        let r = deduplicate(&d, &Tolerance::EXACT);
        assert_eq!(
            brute_force_classes(&d),
            vec![vec!["p", "q", "s"], vec!["t"]]
        );
        assert_eq!(r.aliases.len(), 2);
        assert!(r.aliases.values().all(|v| v == "p"));
        assert_eq!(r.reduced.labels(), ["p", "t"]);
    }

    fn arb_matrix() -> impl Strategy<Value = DissimilarityMatrix> {
        (1usize..7).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..4, n * n),
                proptest::collection::vec(0usize..n, n),
            )
                .prop_map(move |(raw, copy_of)| {
                    // Build from a smaller set of prototype rows so duplicates occur.
                    let mut rows = vec![vec![0.0; n]; n];
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let v = raw[i * n + j] as f64 * 0.5;
                            rows[i][j] = v;
                            rows[j][i] = v;
                        }
                    }
                    for i in 0..n {
                        let src = copy_of[i].min(i);
                        if src != i {
                            for k in 0..n {
                                let v = rows[src][k];
                                rows[i][k] = v;
                                rows[k][i] = v;
                            }
                            rows[i][src] = 0.0;
                            rows[src][i] = 0.0;
                            rows[i][i] = 0.0;
                        }
                    }
                    let labels = (0..n).map(|i| format!("o{i}")).collect();
                    DissimilarityMatrix::from_rows(labels, rows).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(d in arb_matrix(), fmt in prop_oneof![
            Just(MatrixFormat::Csv), Just(MatrixFormat::Tsv), Just(MatrixFormat::PhylipSquare)
        ]) {
            let back = parse_matrix(&d.to_text(fmt), fmt).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn dedup_matches_brute_force_and_is_idempotent(d in arb_matrix()) {
            let tol = Tolerance::EXACT;
            let r = deduplicate(&d, &tol);
            prop_assert_eq!(r.reduced.len(), brute_force_classes(&d).len());
            prop_assert!(deduplicate(&r.reduced, &tol).aliases.is_empty());
            // Reattaching aliases reproduces the original rows.
            for (alias, rep) in &r.aliases {
                let (a, p) = (d.index_of(alias).unwrap(), d.index_of(rep).unwrap());
                for k in 0..d.len() {
                    prop_assert_eq!(d.get(a, k), d.get(p, k));
                }
            }
            let mut sorted = r.reduced.labels().to_vec();
            sorted.sort();
            prop_assert_eq!(sorted, r.reduced.labels().to_vec());
        }
    }
}
