//! Sparse binary contingency tables.
//!
//! An observation matrix has one row per observation (e.g. a sequencing
//! read) and one 0/1 column per variable (e.g. a reference genome). Rows
//! sharing a match pattern are aggregated into a single cell, so a table
//! over B variables is stored as a map from bit pattern to count rather
//! than as 2^B cells. Marginal tables over arbitrary variable subsets are
//! computed by collapsing the stored cells, never by materializing the
//! full cube.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Packed words of a bit pattern; two inline words cover B <= 128 without
/// heap allocation.
pub(crate) type Words = SmallVec<[u64; 2]>;

#[inline]
fn word_count(width: usize) -> usize {
    width.div_ceil(64)
}

/// One cell of a B-dimensional binary table: a fixed-width bit pattern,
/// bit `b` holding the value of variable `b` (0-based).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellPattern {
    width: u32,
    words: Words,
}

impl CellPattern {
    /// All-zero pattern of the given width.
    pub fn zeros(width: usize) -> Self {
        assert!(width >= 1, "pattern width must be at least 1");
        CellPattern {
            width: width as u32,
            words: SmallVec::from_elem(0u64, word_count(width)),
        }
    }

    /// Build from a slice of 0/1 values, one per variable.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InputShape("empty row".into()));
        }
        let mut pat = CellPattern::zeros(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            match v {
                0 => {}
                1 => pat.set_bit(i, true),
                other => {
                    return Err(Error::InputValue(format!(
                        "entry {other} at column {} is not binary",
                        i + 1
                    )))
                }
            }
        }
        Ok(pat)
    }

    /// Parse a bitstring such as `0110`.
    pub fn parse_bitstring(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parse("empty bitstring".into()));
        }
        let mut pat = CellPattern::zeros(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => pat.set_bit(i, true),
                other => return Err(Error::Parse(format!("invalid bitstring character {other:?}"))),
            }
        }
        Ok(pat)
    }

    /// Number of variables covered by this pattern.
    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Value of variable `i` (0-based).
    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.width());
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Set variable `i` (0-based).
    #[inline]
    pub fn set_bit(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.width());
        let (w, p) = (i / 64, i % 64);
        if value {
            self.words[w] |= 1u64 << p;
        } else {
            self.words[w] &= !(1u64 << p);
        }
    }

    /// Number of 1 bits.
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Compact sub-pattern over `subset` (ascending variable indices):
    /// bit `j` of the result is the value of `subset[j]`.
    pub fn extract(&self, subset: &[usize]) -> CellPattern {
        let mut out = CellPattern::zeros(subset.len());
        for (j, &v) in subset.iter().enumerate() {
            if self.bit(v) {
                out.set_bit(j, true);
            }
        }
        out
    }

    /// Compact index of this pattern restricted to `subset`; requires
    /// `subset.len() < 64`.
    #[inline]
    pub(crate) fn extract_index(&self, subset: &[usize]) -> u64 {
        let mut idx = 0u64;
        for (j, &v) in subset.iter().enumerate() {
            idx |= (self.bit(v) as u64) << j;
        }
        idx
    }

    /// Render as a bitstring, variable 1 first.
    pub fn bitstring(&self) -> String {
        (0..self.width()).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for CellPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellPattern({})", self.bitstring())
    }
}

impl Ord for CellPattern {
    /// Lexicographic on the rendered bitstring (variable 1 first). Within a
    /// word the first variable sits in the lowest bit, so words compare via
    /// `reverse_bits`.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            let ord = a.reverse_bits().cmp(&b.reverse_bits());
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        self.width.cmp(&other.width)
    }
}

impl PartialOrd for CellPattern {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Aggregated counts of a B-dimensional binary table. Immutable once
/// built; cells are stored sorted by pattern so every iteration over them
/// is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTable {
    b: usize,
    r: u64,
    cells: Vec<(CellPattern, u64)>,
    labels: Vec<String>,
    constant_columns: Vec<usize>,
}

impl SparseTable {
    /// Aggregate an observation matrix: identical rows collapse into one
    /// cell. `names`, when given, must list one label per column; absent
    /// names are synthesized as `V1..VB`.
    pub fn from_rows<I, Row>(rows: I, names: Option<Vec<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = Row>,
        Row: AsRef<[u8]>,
    {
        let mut iter = rows.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InputShape("matrix has no rows".into()))?;
        let b = first.as_ref().len();
        if b == 0 {
            return Err(Error::InputShape("rows have zero columns".into()));
        }
        let mut map: HashMap<CellPattern, u64> = HashMap::new();
        let mut ones_per_col = vec![0u64; b];
        let mut r = 0u64;
        let mut add = |row: &[u8]| -> Result<()> {
            if row.len() != b {
                return Err(Error::InputShape(format!(
                    "row {} has {} columns, expected {b}",
                    r + 1,
                    row.len()
                )));
            }
            let pat = CellPattern::from_bits(row)?;
            for (c, &v) in row.iter().enumerate() {
                ones_per_col[c] += u64::from(v == 1);
            }
            *map.entry(pat).or_insert(0) += 1;
            r += 1;
            Ok(())
        };
        add(first.as_ref())?;
        for row in iter {
            add(row.as_ref())?;
        }
        Self::finish(b, r, map, names, &ones_per_col)
    }

    /// Build directly from aggregated `(pattern, count)` pairs.
    pub fn from_cells<I>(pairs: I, names: Option<Vec<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = (CellPattern, u64)>,
    {
        let mut map: HashMap<CellPattern, u64> = HashMap::new();
        let mut b = 0usize;
        let mut r = 0u64;
        for (pat, count) in pairs {
            if count == 0 {
                return Err(Error::InputValue(format!(
                    "cell {} has zero count; cells must be positive",
                    pat.bitstring()
                )));
            }
            if b == 0 {
                b = pat.width();
            } else if pat.width() != b {
                return Err(Error::InputShape(format!(
                    "cell {} has width {}, expected {b}",
                    pat.bitstring(),
                    pat.width()
                )));
            }
            r = r.checked_add(count).ok_or_else(|| {
                Error::InputValue("total count overflows 64 bits".into())
            })?;
            *map.entry(pat).or_insert(0) += count;
        }
        if b == 0 {
            return Err(Error::InputShape("no cells given".into()));
        }
        let mut ones_per_col = vec![0u64; b];
        for (pat, count) in &map {
            for (c, ones) in ones_per_col.iter_mut().enumerate() {
                if pat.bit(c) {
                    *ones += count;
                }
            }
        }
        Self::finish(b, r, map, names, &ones_per_col)
    }

    fn finish(
        b: usize,
        r: u64,
        map: HashMap<CellPattern, u64>,
        names: Option<Vec<String>>,
        ones_per_col: &[u64],
    ) -> Result<Self> {
        let labels = match names {
            Some(names) => {
                if names.len() != b {
                    return Err(Error::InputShape(format!(
                        "{} names for {b} columns",
                        names.len()
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for n in &names {
                    if n.is_empty() || n.contains([',', ';', '\n', '\r', '\t']) {
                        return Err(Error::InputValue(format!(
                            "label {n:?} is empty or contains a reserved character"
                        )));
                    }
                    if !seen.insert(n.as_str()) {
                        return Err(Error::InputValue(format!("duplicate label {n:?}")));
                    }
                }
                names
            }
            None => (1..=b).map(|i| format!("V{i}")).collect(),
        };
        let constant_columns = ones_per_col
            .iter()
            .enumerate()
            .filter(|&(_, &ones)| ones == 0 || ones == r)
            .map(|(c, _)| c)
            .collect();
        let mut cells: Vec<(CellPattern, u64)> = map.into_iter().collect();
        cells.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(SparseTable { b, r, cells, labels, constant_columns })
    }

    /// Variable count B.
    pub fn b(&self) -> usize {
        self.b
    }

    /// Grand total R (number of observations).
    pub fn r(&self) -> u64 {
        self.r
    }

    /// Positive cells, sorted by pattern.
    pub fn cells(&self) -> &[(CellPattern, u64)] {
        &self.cells
    }

    /// Column labels (given or synthesized), one per variable.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Columns whose value never varies (all 0 or all 1). No clique model
    /// containing such a variable has MLEs, so model search rejects tables
    /// where this is nonempty.
    pub fn constant_columns(&self) -> &[usize] {
        &self.constant_columns
    }

    /// Count of one cell; absent patterns are zero.
    pub fn count(&self, pattern: &CellPattern) -> u64 {
        self.cells
            .binary_search_by(|(p, _)| p.cmp(pattern))
            .map(|i| self.cells[i].1)
            .unwrap_or(0)
    }

    /// Collapse onto `subset` (0-based variable indices). Only positive
    /// marginal cells are stored; the result's patterns are compact, bit
    /// `j` holding the value of `subset[j]` after ascending sort.
    pub fn marginalize(&self, subset: &[usize]) -> Result<MarginalTable> {
        let subset = self.checked_subset(subset)?;
        let mut counts: BTreeMap<CellPattern, u64> = BTreeMap::new();
        for (pat, count) in &self.cells {
            *counts.entry(pat.extract(&subset)).or_insert(0) += count;
        }
        Ok(MarginalTable { subset, counts, r: self.r })
    }

    /// True iff all four cells of the 2x2 marginal over `{b1, b2}` are
    /// positive.
    pub fn two_way_positive(&self, b1: usize, b2: usize) -> Result<bool> {
        if b1 == b2 {
            return Err(Error::Subset(format!("indices equal: {b1}")));
        }
        if b1 >= self.b || b2 >= self.b {
            return Err(Error::Subset(format!(
                "index out of range: {} (B = {})",
                b1.max(b2),
                self.b
            )));
        }
        let mut seen = 0u8;
        for (pat, _) in &self.cells {
            let idx = (pat.bit(b1) as u8) | ((pat.bit(b2) as u8) << 1);
            seen |= 1 << idx;
            if seen == 0b1111 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn checked_subset(&self, subset: &[usize]) -> Result<Vec<usize>> {
        if subset.is_empty() {
            return Err(Error::Subset("empty subset".into()));
        }
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Subset("duplicate index in subset".into()));
        }
        if *sorted.last().unwrap() >= self.b {
            return Err(Error::Subset(format!(
                "index {} out of range (B = {})",
                sorted.last().unwrap(),
                self.b
            )));
        }
        Ok(sorted)
    }

    /// Serialize to the aggregated cell format: a `#names=` header line,
    /// then one `<bitstring>,<count>` line per cell in pattern order.
    pub fn to_cells_text(&self) -> String {
        let mut out = String::new();
        out.push_str("#names=");
        out.push_str(&self.labels.join(","));
        out.push('\n');
        for (pat, count) in &self.cells {
            out.push_str(&pat.bitstring());
            out.push(',');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        out
    }

    /// Parse the aggregated cell format produced by [`to_cells_text`].
    ///
    /// [`to_cells_text`]: SparseTable::to_cells_text
    pub fn parse_cells_text(text: &str) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#names=") {
                names = Some(rest.split(',').map(|s| s.trim().to_string()).collect());
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (bits, count) = line.split_once(',').ok_or_else(|| {
                Error::Parse(format!("line {}: expected <bitstring>,<count>", lineno + 1))
            })?;
            let pattern = CellPattern::parse_bitstring(bits.trim())?;
            let count: u64 = count.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad count {count:?}", lineno + 1))
            })?;
            pairs.push((pattern, count));
        }
        SparseTable::from_cells(pairs, names)
    }

    /// Parse a binary observation matrix in CSV or TSV form. The delimiter
    /// is detected from the first line; `header` controls whether that
    /// line is a label row (`None` = auto-detect: any token other than `0`
    /// or `1` makes it a header).
    pub fn parse_matrix_text(text: &str, header: Option<bool>) -> Result<Self> {
        let (names, rows) = split_matrix_lines(text, header)?;
        let mut parsed: Vec<Vec<u8>> = Vec::with_capacity(rows.len());
        for (lineno, fields) in rows {
            let mut row = Vec::with_capacity(fields.len());
            for f in fields {
                match f {
                    "0" => row.push(0),
                    "1" => row.push(1),
                    other => {
                        return Err(Error::InputValue(format!(
                            "line {lineno}: cell {other:?} is not 0/1"
                        )))
                    }
                }
            }
            parsed.push(row);
        }
        SparseTable::from_rows(parsed, names)
    }
}

/// Marginal table over an ascending variable subset. Counts cover the
/// positive cells only; absent patterns are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    subset: Vec<usize>,
    counts: BTreeMap<CellPattern, u64>,
    r: u64,
}

impl MarginalTable {
    /// The collapsed-onto variable indices, ascending.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Positive marginal cells in pattern order.
    pub fn counts(&self) -> impl Iterator<Item = (&CellPattern, u64)> {
        self.counts.iter().map(|(p, &c)| (p, c))
    }

    /// Count of one compact pattern (width `subset.len()`), zero if absent.
    pub fn count(&self, pattern: &CellPattern) -> u64 {
        self.counts.get(pattern).copied().unwrap_or(0)
    }

    /// Number of stored (positive) cells.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    /// True when no cell is stored.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Grand total carried over from the source table.
    pub fn r(&self) -> u64 {
        self.r
    }
}

/// Threshold a count matrix into binary: entry -> 1 iff count >= threshold.
pub fn binarize(counts: &[Vec<i64>], threshold: u64) -> Result<Vec<Vec<u8>>> {
    if threshold == 0 {
        return Err(Error::InputValue("binarize threshold must be positive".into()));
    }
    let width = counts.first().map(|r| r.len());
    let mut out = Vec::with_capacity(counts.len());
    for (i, row) in counts.iter().enumerate() {
        if Some(row.len()) != width {
            return Err(Error::InputShape(format!(
                "row {} has {} columns, expected {}",
                i + 1,
                row.len(),
                width.unwrap_or(0)
            )));
        }
        let mut brow = Vec::with_capacity(row.len());
        for &v in row {
            if v < 0 {
                return Err(Error::InputValue(format!("negative count {v} in row {}", i + 1)));
            }
            brow.push(u8::from(v as u64 >= threshold));
        }
        out.push(brow);
    }
    Ok(out)
}

/// Count-matrix rows plus the optional header names.
pub type CountMatrix = (Vec<Vec<i64>>, Option<Vec<String>>);

/// Parse a count matrix (CSV/TSV, optional header) into rows plus names.
pub fn parse_count_matrix_text(text: &str, header: Option<bool>) -> Result<CountMatrix> {
    let (names, rows) = split_matrix_lines(text, header)?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (lineno, fields) in rows {
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            let v: i64 = f.parse().map_err(|_| {
                Error::Parse(format!("line {lineno}: cell {f:?} is not an integer"))
            })?;
            row.push(v);
        }
        parsed.push(row);
    }
    Ok((parsed, names))
}

type MatrixLines<'a> = (Option<Vec<String>>, Vec<(usize, Vec<&'a str>)>);

fn split_matrix_lines(text: &str, header: Option<bool>) -> Result<MatrixLines<'_>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| Error::InputShape("empty input".into()))?;
    let delim = if first.contains('\t') { '\t' } else { ',' };
    fn split(l: &str, delim: char) -> Vec<&str> {
        l.split(delim).map(str::trim).collect()
    }
    let first_fields = split(first, delim);
    let is_header = match header {
        Some(h) => h,
        None => first_fields
            .iter()
            .any(|f| f.parse::<i64>().is_err()),
    };
    let mut names = None;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    if is_header {
        names = Some(first_fields.iter().map(|s| s.to_string()).collect());
    } else {
        rows.push((first_no, first_fields));
    }
    for (no, line) in lines {
        rows.push((no, split(line, delim)));
    }
    if rows.is_empty() {
        return Err(Error::InputShape("matrix has no data rows".into()));
    }
    Ok((names, rows))
}
