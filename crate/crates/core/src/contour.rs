//! Marching squares on a boolean grid.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between padded points (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between padded points (i, j) and (i, j + 1).
    V(usize, usize),
}

impl Edge {
    /// Midpoint in unpadded point coordinates.
    fn point(self) -> (f64, f64) {
        match self {
            Edge::H(i, j) => (i as f64 - 0.5, j as f64 - 1.0),
            Edge::V(i, j) => (i as f64 - 1.0, j as f64 - 0.5),
        }
    }
}

/// Closed boundary polylines of the `true` set of a row-major `nx × ny`
/// grid, in point-index coordinates (`x ∈ [-0.5, nx - 0.5]`). The grid is
/// padded with `false`, so every polyline is closed (first point
/// repeated at the end).
pub fn marching_squares(grid: &[bool], nx: usize, ny: usize) -> Vec<Vec<(f64, f64)>> {
    assert_eq!(grid.len(), nx * ny);
    let at = |i: usize, j: usize| -> bool {
        if i == 0 || j == 0 || i > nx || j > ny {
            false
        } else {
            grid[(j - 1) * nx + (i - 1)]
        }
    };
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let b0 = at(i, j);
            let b1 = at(i + 1, j);
            let b2 = at(i + 1, j + 1);
            let b3 = at(i, j + 1);
            let bottom = Edge::H(i, j);
            let right = Edge::V(i + 1, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            match (b0, b1, b2, b3) {
                (true, false, true, false) => {
                    segments.push((left, bottom));
                    segments.push((top, right));
                }
                (false, true, false, true) => {
                    segments.push((bottom, right));
                    segments.push((left, top));
                }
                _ => {
                    let mut crossing = Vec::with_capacity(2);
                    if b0 != b1 {
                        crossing.push(bottom);
                    }
                    if b1 != b2 {
                        crossing.push(right);
                    }
                    if b2 != b3 {
                        crossing.push(top);
                    }
                    if b3 != b0 {
                        crossing.push(left);
                    }
                    if crossing.len() == 2 {
                        segments.push((crossing[0], crossing[1]));
                    }
                }
            }
        }
    }

    let mut incident: HashMap<Edge, Vec<usize>> = HashMap::with_capacity(segments.len() * 2);
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segments[start];
        let mut line = vec![first.point(), cur.point()];
        while cur != first {
            let next = incident[&cur].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (a, b) = segments[k];
            cur = if a == cur { b } else { a };
            line.push(cur.point());
        }
        lines.push(line);
    }
    lines
}

/// Shoelace area of a closed polyline.
pub fn polygon_area(line: &[(f64, f64)]) -> f64 {
    let twice: f64 = line.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum();
    0.5 * twice.abs()
}
