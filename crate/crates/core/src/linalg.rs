//! Sparse exact linear algebra over ℚ(i): row echelon forms, kernels, ranks
//! and canonical bases of subspaces.
//!
//! Rows are kept sorted by column with no explicit zeros. Pivots are always
//! the leading (smallest) column of a row, so the set of pivot columns only
//! depends on the row space and the column order, never on the order rows
//! were inserted in. Kernel bases come out in reduced form: the vector for
//! free column `f` is 1 at `f` and 0 at every other free column.

use std::collections::BTreeMap;

use crate::scalar::Scalar;

/// Sparse vector with entries sorted by column.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparseVec {
    entries: Vec<(usize, Scalar)>,
}

impl SparseVec {
    pub fn new() -> Self {
        SparseVec::default()
    }

    /// Builds from unsorted entries, summing duplicates and dropping zeros.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, Scalar)>) -> Self {
        let mut map: BTreeMap<usize, Scalar> = BTreeMap::new();
        for (col, val) in entries {
            *map.entry(col).or_default() += &val;
        }
        SparseVec::from_map(map)
    }

    pub fn from_map(map: BTreeMap<usize, Scalar>) -> Self {
        SparseVec {
            entries: map.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn unit(col: usize) -> Self {
        SparseVec {
            entries: vec![(col, Scalar::one())],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Scalar)> {
        self.entries.iter().map(|(c, v)| (*c, v))
    }

    pub fn leading(&self) -> Option<(usize, &Scalar)> {
        self.entries.first().map(|(c, v)| (*c, v))
    }

    pub fn get(&self, col: usize) -> Scalar {
        self.entries
            .binary_search_by_key(&col, |(c, _)| *c)
            .map(|idx| self.entries[idx].1.clone())
            .unwrap_or_default()
    }

    pub fn scale(&self, c: &Scalar) -> SparseVec {
        if c.is_zero() {
            return SparseVec::new();
        }
        SparseVec {
            entries: self.entries.iter().map(|(col, v)| (*col, v * c)).collect(),
        }
    }

    /// `self + c · other`, merging the sorted entry lists.
    pub fn axpy(&self, c: &Scalar, other: &SparseVec) -> SparseVec {
        if c.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let ci = self.entries.get(i).map(|e| e.0).unwrap_or(usize::MAX);
            let cj = other.entries.get(j).map(|e| e.0).unwrap_or(usize::MAX);
            if ci < cj {
                out.push(self.entries[i].clone());
                i += 1;
            } else if cj < ci {
                out.push((cj, c * &other.entries[j].1));
                j += 1;
            } else {
                let v = &self.entries[i].1 + &(c * &other.entries[j].1);
                if !v.is_zero() {
                    out.push((ci, v));
                }
                i += 1;
                j += 1;
            }
        }
        SparseVec { entries: out }
    }

    /// Keeps only the columns accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> SparseVec {
        SparseVec {
            entries: self.entries.iter().filter(|(c, _)| keep(*c)).cloned().collect(),
        }
    }

    /// Renumbers columns; `f` must be injective.
    pub fn map_columns(&self, f: impl Fn(usize) -> usize) -> SparseVec {
        SparseVec::from_entries(self.entries.iter().map(|(c, v)| (f(*c), v.clone())))
    }
}

/// A row echelon form built incrementally.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    /// pivot column → row whose leading entry is 1 at that column
    pivots: BTreeMap<usize, SparseVec>,
}

impl Echelon {
    pub fn new() -> Self {
        Echelon::default()
    }

    /// Inserts rows sparsest first, which keeps fill-in low on the sparse
    /// constraint systems built by the solvers.
    pub fn from_rows(rows: impl IntoIterator<Item = SparseVec>) -> Self {
        let mut rows: Vec<SparseVec> = rows.into_iter().filter(|r| !r.is_zero()).collect();
        rows.sort_by_key(|r| (r.nnz(), r.leading().map(|(c, _)| c)));
        let mut ech = Echelon::new();
        for row in rows {
            ech.insert(row);
        }
        ech
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivots.keys().copied()
    }

    /// Eliminates pivot columns from the front of `row` until its leading
    /// column is not a pivot. The result is zero iff `row` is in the span.
    pub fn reduce(&self, mut row: SparseVec) -> SparseVec {
        while let Some((col, val)) = row.leading() {
            let Some(pivot) = self.pivots.get(&col) else {
                break;
            };
            let c = val.neg();
            row = row.axpy(&c, pivot);
        }
        row
    }

    pub fn contains(&self, row: &SparseVec) -> bool {
        self.reduce(row.clone()).is_zero()
    }

    /// Adds a row; returns whether the rank grew.
    pub fn insert(&mut self, row: SparseVec) -> bool {
        let row = self.reduce(row);
        let Some((col, lead)) = row.leading() else {
            return false;
        };
        let inv = lead.inv().expect("nonzero leading entry");
        let row = row.scale(&inv);
        self.pivots.insert(col, row);
        true
    }

    /// Reduced basis of `{x : row · x = 0 for every row}` over `ncols` columns,
    /// one vector per free column in increasing column order.
    pub fn nullspace(&self, ncols: usize) -> Vec<SparseVec> {
        let pivots: Vec<(usize, &SparseVec)> = self.pivots.iter().map(|(c, r)| (*c, r)).collect();
        let mut basis = Vec::new();
        for free in (0..ncols).filter(|c| !self.pivots.contains_key(c)) {
            let mut x: BTreeMap<usize, Scalar> = BTreeMap::new();
            x.insert(free, Scalar::one());
            // pivots above `free` have only zero unknowns to their right
            let upto = pivots.partition_point(|(c, _)| *c < free);
            for &(col, row) in pivots[..upto].iter().rev() {
                let mut acc = Scalar::zero();
                for (j, r) in row.iter().skip(1) {
                    if let Some(xj) = x.get(&j) {
                        acc += &(r * xj);
                    }
                }
                if !acc.is_zero() {
                    x.insert(col, acc.neg());
                }
            }
            basis.push(SparseVec::from_map(x));
        }
        basis
    }

    /// Fully reduced rows: each pivot column is zero in every other row.
    pub fn rref_rows(&self) -> Vec<SparseVec> {
        let mut done: BTreeMap<usize, SparseVec> = BTreeMap::new();
        for (&col, row) in self.pivots.iter().rev() {
            let mut row = row.clone();
            for (&pc, prow) in done.iter() {
                let c = row.get(pc);
                if !c.is_zero() {
                    row = row.axpy(&c.neg(), prow);
                }
            }
            done.insert(col, row);
        }
        done.into_values().collect()
    }
}

/// Rank of a set of vectors.
pub fn rank(vectors: impl IntoIterator<Item = SparseVec>) -> usize {
    Echelon::from_rows(vectors).rank()
}

/// Deterministic basis of the span of `vectors` inside a space with `ncols`
/// columns: the reduced form whose pivots sit on the *last* nonzero column of
/// each vector. When `vectors` spans the kernel of some matrix, this equals
/// the basis [`Echelon::nullspace`] returns for that matrix.
pub fn canonical_basis(vectors: impl IntoIterator<Item = SparseVec>, ncols: usize) -> Vec<SparseVec> {
    let flip = |c: usize| ncols - 1 - c;
    let ech = Echelon::from_rows(vectors.into_iter().map(|v| v.map_columns(flip)));
    let mut rows: Vec<SparseVec> = ech
        .rref_rows()
        .into_iter()
        .map(|r| r.map_columns(flip))
        .collect();
    rows.sort_by_key(|r| r.iter().last().map(|(c, _)| c));
    rows
}

/// Whether two families of vectors span the same space, together with the
/// mismatch `2·rank(A ∪ B) - rank(A) - rank(B)` (zero iff the spans agree).
pub fn span_mismatch(a: &[SparseVec], b: &[SparseVec]) -> usize {
    let ra = rank(a.iter().cloned());
    let rb = rank(b.iter().cloned());
    let rab = rank(a.iter().chain(b.iter()).cloned());
    2 * rab - ra - rb
}
