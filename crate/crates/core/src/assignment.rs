//! Gated bipartite assignment and bird's-eye IoU.

use nalgebra::{DMatrix, Vector2};

use crate::geometry::Box3D;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    /// `(row, col, cost)`, sorted by row.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.2).sum()
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.0 == row).map(|m| m.1)
    }
}

/// Maximum-cardinality, minimum-cost matching over entries with
/// `cost <= gate`. Entries above the gate or non-finite are forbidden.
/// Among equal-cost optima the lowest sorted `(row, col)` list wins.
pub fn solve_assignment(cost: &DMatrix<f64>, gate: f64) -> AssignmentResult {
    solve(cost, gate, true)
}

/// An optimum of the same size and cost as [`solve_assignment`], without
/// the tie-break.
pub fn min_cost_assignment(cost: &DMatrix<f64>, gate: f64) -> AssignmentResult {
    solve(cost, gate, false)
}

fn solve(cost: &DMatrix<f64>, gate: f64, lexicographic: bool) -> AssignmentResult {
    let (n, m) = cost.shape();
    let allowed = |c: f64| c.is_finite() && c <= gate;
    if n == 0 || m == 0 {
        return AssignmentResult {
            matches: vec![],
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }

    // The optimum decomposes over connected components of allowed pairs.
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut any = false;
    for i in 0..n {
        for j in 0..m {
            if allowed(cost[(i, j)]) {
                any = true;
                let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut matches = Vec::new();
    if any {
        let mut components: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
        let mut slot = vec![usize::MAX; n + m];
        for x in 0..n + m {
            let root = find(&mut parent, x);
            if slot[root] == usize::MAX {
                slot[root] = components.len();
                components.push((root, Vec::new(), Vec::new()));
            }
            let comp = &mut components[slot[root]];
            if x < n { comp.1.push(x) } else { comp.2.push(x - n) }
        }
        for (_, rows, cols) in &components {
            if rows.len() == 1 || cols.len() == 1 {
                matches.extend(cheapest_pair(cost, rows, cols, &allowed));
            } else if !rows.is_empty() && !cols.is_empty() {
                if lexicographic {
                    let (optimum, tight) = solve_component_tight(cost, rows, cols, &allowed);
                    matches.extend(lexicographic_optimum(cost, rows, cols, &allowed, optimum, &tight));
                } else {
                    matches.extend(solve_component(cost, rows, cols, &allowed));
                }
            }
        }
    }
    matches.sort_by_key(|m| m.0);
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for &(i, j, _) in &matches {
        row_used[i] = true;
        col_used[j] = true;
    }
    AssignmentResult {
        matches,
        unmatched_rows: (0..n).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..m).filter(|&j| !col_used[j]).collect(),
    }
}

/// Single-row or single-column component: the cheapest allowed pair, lowest
/// indices first among equal costs.
fn cheapest_pair(cost: &DMatrix<f64>, rows: &[usize], cols: &[usize], allowed: &impl Fn(f64) -> bool) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &i in rows {
        for &j in cols {
            let c = cost[(i, j)];
            if allowed(c) && best.map_or(true, |b| c < b.2) {
                best = Some((i, j, c));
            }
        }
    }
    best
}

fn solve_component(cost: &DMatrix<f64>, rows: &[usize], cols: &[usize], allowed: &impl Fn(f64) -> bool) -> Vec<(usize, usize, f64)> {
    solve_component_tight(cost, rows, cols, allowed).0
}

/// Also reports which `(rows[a], cols[b])` pairs have zero reduced cost under
/// the optimal potentials, at index `a * cols.len() + b`. Every optimal
/// matching uses only such pairs.
fn solve_component_tight(
    cost: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    allowed: &impl Fn(f64) -> bool,
) -> (Vec<(usize, usize, f64)>, Vec<bool>) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in rows {
        for &j in cols {
            let c = cost[(i, j)];
            if allowed(c) {
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
    }
    if lo > hi {
        return (vec![], vec![]);
    }
    // Any matching with one more allowed pair beats every matching with fewer.
    let k = rows.len().min(cols.len()) as f64;
    let forbidden = hi + (k + 1.0) * (hi - lo + 1.0);

    let transpose = rows.len() > cols.len();
    let (r_ids, c_ids) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |r: usize, c: usize| {
        let v = if transpose { cost[(c_ids[c], r_ids[r])] } else { cost[(r_ids[r], c_ids[c])] };
        if allowed(v) { v } else { forbidden }
    };
    let (assigned, u, v) = hungarian(r_ids.len(), c_ids.len(), at);
    let mut out = Vec::new();
    for (r, c) in assigned.into_iter().enumerate() {
        let (i, j) = if transpose { (c_ids[c], r_ids[r]) } else { (r_ids[r], c_ids[c]) };
        if allowed(cost[(i, j)]) {
            out.push((i, j, cost[(i, j)]));
        }
    }
    let slack = 1e-9 * (1.0 + forbidden.abs() + lo.abs());
    let mut tight = vec![false; rows.len() * cols.len()];
    for r in 0..r_ids.len() {
        for c in 0..c_ids.len() {
            let (a, b) = if transpose { (c, r) } else { (r, c) };
            tight[a * cols.len() + b] = at(r, c) - u[r + 1] - v[c + 1] <= slack;
        }
    }
    (out, tight)
}

/// Among matchings with the size and cost of `optimum`, the one whose sorted
/// `(row, col)` list is lexicographically lowest. Rows are fixed greedily,
/// each to the lowest column that still completes an optimal matching.
fn lexicographic_optimum(
    cost: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    allowed: &impl Fn(f64) -> bool,
    optimum: Vec<(usize, usize, f64)>,
    tight: &[bool],
) -> Vec<(usize, usize, f64)> {
    let scale: f64 = 1.0 + optimum.iter().map(|m| m.2.abs()).sum::<f64>();
    let tol = 1e-12 * scale;
    let mut need = optimum.len();
    let mut budget: f64 = optimum.iter().map(|m| m.2).sum();
    // an optimal completion of the rows fixed so far
    let mut current: Vec<(usize, usize, f64)> = optimum;
    // both lists arrive in ascending order
    let mut free_rows: Vec<usize> = rows.to_vec();
    let mut free_cols: Vec<usize> = cols.to_vec();
    let mut out = Vec::with_capacity(need);
    for (a, &i) in rows.iter().enumerate() {
        if need == 0 {
            break;
        }
        free_rows.retain(|&r| r != i);
        let held = current.iter().find(|m| m.0 == i).map(|m| m.1);
        let mut pick = None;
        for &j in free_cols.iter().take_while(|&&j| held.map_or(true, |h| j < h)) {
            let c = cost[(i, j)];
            let b = cols.binary_search(&j).expect("column of this component");
            if !allowed(c) || !tight[a * cols.len() + b] {
                continue;
            }
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != j).collect();
            let rest = solve_component(cost, &free_rows, &rest_cols, allowed);
            let rest_cost: f64 = rest.iter().map(|m| m.2).sum();
            if rest.len() + 1 == need && (rest_cost + c - budget).abs() <= tol {
                pick = Some(j);
                current = rest;
                break;
            }
        }
        let pick = pick.or(held);
        current.retain(|m| m.0 != i);
        if let Some(j) = pick {
            let c = cost[(i, j)];
            out.push((i, j, c));
            free_cols.retain(|&x| x != j);
            need -= 1;
            budget -= c;
        }
    }
    out
}

/// Shortest-augmenting-path Hungarian algorithm with potentials, `rows <= cols`.
/// Returns the column assigned to each row and the 1-based potentials `u`, `v`.
fn hungarian(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![inf; cols + 1];
    let mut used = vec![false; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    (out, u, v)
}

/// Intersection over union of the two boxes' ground footprints.
pub fn iou(a: &Box3D, b: &Box3D) -> f64 {
    let pa = a.bev_corners();
    let pb = b.bev_corners();
    let area_a = a.l * a.w;
    let area_b = b.l * b.w;
    let inter = polygon_area(&clip_convex(&pa, &pb)).min(area_a.min(area_b));
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn cross(o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sutherland-Hodgman clip of `subject` by the counterclockwise convex `clip`.
fn clip_convex(subject: &[Vector2<f64>], clip: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut out: Vec<Vector2<f64>> = subject.to_vec();
    for k in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (e0, e1) = (clip[k], clip[(k + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let cur_in = cross(e0, e1, cur) >= 0.0;
            let prev_in = cross(e0, e1, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(edge_intersection(prev, cur, e0, e1));
                }
                out.push(cur);
            } else if prev_in {
                out.push(edge_intersection(prev, cur, e0, e1));
            }
        }
    }
    out
}

fn edge_intersection(p: Vector2<f64>, q: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> Vector2<f64> {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    p + (q - p) * t
}

fn polygon_area(poly: &[Vector2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        s += a.x * b.y - a.y * b.x;
    }
    (s / 2.0).abs()
}
