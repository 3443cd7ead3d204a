//! Presorted column lists shared by the tree builders.
//!
//! Rows are sorted once per feature (ties by row index); node partitions
//! preserve order, so split scans never re-sort. Duplicate rows from
//! bootstrap resampling are carried as repeated entries.

use crate::ingest::EncodedMatrix;

/// Per-feature row lists sorted by feature value, plus a column-major
/// value cache for the split scans.
pub struct SortedColumns {
    pub lists: Vec<Vec<u32>>,
    pub values: Vec<Vec<f64>>,
}

impl SortedColumns {
    pub fn build(x: &EncodedMatrix) -> Self {
        let n = x.n_rows();
        let values: Vec<Vec<f64>> = (0..x.n_cols()).map(|f| x.column_values(f)).collect();
        let lists = (0..x.n_cols())
            .map(|f| {
                let col = &values[f];
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .partial_cmp(&col[b as usize])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedColumns { lists, values }
    }

    /// Node lists for a row multiset: each global list filtered to the
    /// rows present, with multiplicity.
    pub fn node_lists(&self, counts: &[u32]) -> Vec<Vec<u32>> {
        self.lists
            .iter()
            .map(|list| {
                let mut out = Vec::with_capacity(list.len());
                for &r in list {
                    for _ in 0..counts[r as usize] {
                        out.push(r);
                    }
                }
                out
            })
            .collect()
    }
}

/// Splits every feature list into (left, right) by a predicate on rows,
/// preserving sort order.
pub fn partition_lists<F>(lists: &[Vec<u32>], goes_left: F) -> (Vec<Vec<u32>>, Vec<Vec<u32>>)
where
    F: Fn(u32) -> bool,
{
    let mut left = Vec::with_capacity(lists.len());
    let mut right = Vec::with_capacity(lists.len());
    for list in lists {
        let mut l = Vec::with_capacity(list.len());
        let mut r = Vec::with_capacity(list.len());
        for &row in list {
            if goes_left(row) {
                l.push(row);
            } else {
                r.push(row);
            }
        }
        left.push(l);
        right.push(r);
    }
    (left, right)
}
