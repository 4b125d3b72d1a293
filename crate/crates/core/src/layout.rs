//! Column-aware reading order for the segments of one page.

use crate::model::BoundingBox;

/// Minimum horizontal overlap, as a share of the narrower box, for two boxes
/// to sit in the same column.
pub const COLUMN_OVERLAP: f64 = 0.5;

fn same_column(a: &BoundingBox, b: &BoundingBox) -> bool {
    let narrower = a.width.min(b.width);
    narrower > 0.0 && a.x_overlap(b) >= COLUMN_OVERLAP * narrower
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Order boxes for reading: columns (connected by horizontal overlap) left to
/// right, each column top to bottom. Returns indices into `boxes`.
///
/// The result is a permutation of `0..boxes.len()` and depends only on the
/// geometry; ties between identical boxes fall back to input index.
pub fn reading_order(boxes: &[BoundingBox]) -> Vec<usize> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if same_column(&boxes[i], &boxes[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut columns: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = columns.len();
            columns.push(Vec::new());
        }
        columns[slot[root]].push(i);
    }

    let by_position = |a: &usize, b: &usize| {
        let (p, q) = (&boxes[*a], &boxes[*b]);
        p.y.total_cmp(&q.y)
            .then(p.x.total_cmp(&q.x))
            .then(p.height.total_cmp(&q.height))
            .then(p.width.total_cmp(&q.width))
            .then(a.cmp(b))
    };
    for col in &mut columns {
        col.sort_by(by_position);
    }
    let left = |col: &Vec<usize>| {
        col.iter()
            .map(|&i| boxes[i].x)
            .fold(f64::INFINITY, f64::min)
    };
    let top = |col: &Vec<usize>| {
        col.iter()
            .map(|&i| boxes[i].y)
            .fold(f64::INFINITY, f64::min)
    };
    columns.sort_by(|a, b| {
        left(a)
            .total_cmp(&left(b))
            .then(top(a).total_cmp(&top(b)))
            .then_with(|| by_position(&a[0], &b[0]))
    });
    columns.into_iter().flatten().collect()
}
