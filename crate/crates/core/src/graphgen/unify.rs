//! Path-tree unification: shared prefixes (or suffixes) collapse into a
//! single common path ending where the tree branches.

use crate::grid::{normalize_angle, Cell};

/// Default lookahead, steps.
pub const LOOKAHEAD: usize = 6;
/// Default divergence threshold, radians.
pub const THETA_DIV: f64 = 0.35;

/// Direction from `path[t]` towards `path[min(t + lookahead, last)]`.
///
/// # Panics
/// If `path` has fewer than two cells.
pub fn lookahead_direction(path: &[Cell], t: usize, lookahead: usize) -> f64 {
    assert!(path.len() >= 2, "lookahead needs a path of at least two cells");
    let last = path.len() - 1;
    let t = t.min(last - 1);
    path[t].heading_to(path[(t + lookahead).min(last)])
}

/// Angle spanned by a set of directions: the full turn minus the largest
/// gap between counterclockwise neighbours.
pub fn divergence_angle(directions: &[f64]) -> f64 {
    if directions.len() < 2 {
        return 0.0;
    }
    let mut a: Vec<f64> = directions.iter().map(|&d| normalize_angle(d)).collect();
    a.sort_by(f64::total_cmp);
    let mut largest = a[0] + std::f64::consts::TAU - a[a.len() - 1];
    for w in a.windows(2) {
        largest = largest.max(w[1] - w[0]);
    }
    std::f64::consts::TAU - largest
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnifyParams {
    pub lookahead: usize,
    pub theta_div: f64,
}

impl Default for UnifyParams {
    fn default() -> Self {
        UnifyParams { lookahead: LOOKAHEAD, theta_div: THETA_DIV }
    }
}

/// Result of unifying a tree of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Unified {
    /// Shared part, from the root to the branching cell.
    pub common: Vec<Cell>,
    /// Per input path (in input order), the remainder starting at the
    /// common path's last cell. Empty when the tree never branches.
    pub suffixes: Vec<Vec<Cell>>,
    /// Index in the input paths where the branch was detected.
    pub split: usize,
}

fn diverged_at(paths: &[&[Cell]], t: usize, p: UnifyParams) -> bool {
    if paths.iter().any(|q| t + 1 >= q.len()) {
        return true;
    }
    for a in paths {
        for b in paths {
            if a[t].chebyshev(b[t]) > 1 {
                return true;
            }
        }
    }
    // one direction per group of paths identical through t + lookahead
    let key = |q: &[Cell]| -> usize { (t + p.lookahead + 1).min(q.len()) };
    let mut reps: Vec<&[Cell]> = Vec::new();
    for q in paths {
        if !reps.iter().any(|r| r[..key(r)] == q[..key(q)]) {
            reps.push(q);
        }
    }
    let dirs: Vec<f64> = reps.iter().map(|q| lookahead_direction(q, t, p.lookahead)).collect();
    divergence_angle(&dirs) > p.theta_div
}

/// Unifies paths sharing their first cell. `support` decides whether an
/// averaged cell may be used; otherwise the member cell nearest the average
/// is taken.
pub fn unify_with(paths: &[Vec<Cell>], p: UnifyParams, support: impl Fn(Cell) -> bool) -> Unified {
    let distinct: Vec<&[Cell]> = {
        let mut v: Vec<&[Cell]> = Vec::new();
        for q in paths {
            if !v.iter().any(|r| *r == q.as_slice()) {
                v.push(q);
            }
        }
        v
    };
    if distinct.len() <= 1 {
        // identical paths: the split sits at the end and every suffix is
        // the bare root
        let common = distinct.first().map(|q| q.to_vec()).unwrap_or_default();
        let suffixes = match common.last() {
            Some(&root) => vec![vec![root]; paths.len()],
            None => Vec::new(),
        };
        return Unified { split: common.len().saturating_sub(1), common, suffixes };
    }
    let mut t = 0;
    while !diverged_at(&distinct, t, p) {
        t += 1;
    }
    let mut common: Vec<Cell> = Vec::with_capacity(t + 1);
    for k in 0..=t {
        let members: Vec<Cell> = distinct.iter().map(|q| q[k]).collect();
        let n = members.len() as f64;
        let ci = members.iter().map(|c| c.i as f64).sum::<f64>() / n;
        let cj = members.iter().map(|c| c.j as f64).sum::<f64>() / n;
        let avg = Cell::new(ci.round() as usize, cj.round() as usize);
        let cell = if support(avg) {
            avg
        } else {
            *members
                .iter()
                .min_by(|a, b| {
                    let da = (a.i as f64 - ci).powi(2) + (a.j as f64 - cj).powi(2);
                    let db = (b.i as f64 - ci).powi(2) + (b.j as f64 - cj).powi(2);
                    da.total_cmp(&db).then(a.cmp(b))
                })
                .expect("non-empty tree")
        };
        if common.last() != Some(&cell) {
            common.push(cell);
        }
    }
    let root = *common.last().expect("common path is non-empty");
    let suffixes = paths
        .iter()
        .map(|q| {
            let mut s = vec![root];
            for &c in &q[(t + 1).min(q.len())..] {
                if s.last() != Some(&c) {
                    s.push(c);
                }
            }
            s
        })
        .collect();
    Unified { common, suffixes, split: t }
}

/// [`unify_with`] accepting every averaged cell.
pub fn unify(paths: &[Vec<Cell>], p: UnifyParams) -> Unified {
    unify_with(paths, p, |_| true)
}

/// Unification of paths sharing their last cell: paths are reversed,
/// unified, and reversed back. `common` then runs from the joining cell to
/// the shared end, and each suffix ends at the joining cell.
pub fn reverse_unify_with(paths: &[Vec<Cell>], p: UnifyParams, support: impl Fn(Cell) -> bool) -> Unified {
    let rev: Vec<Vec<Cell>> = paths.iter().map(|q| q.iter().rev().copied().collect()).collect();
    let mut u = unify_with(&rev, p, support);
    u.common.reverse();
    for s in u.suffixes.iter_mut() {
        s.reverse();
    }
    u
}

pub fn reverse_unify(paths: &[Vec<Cell>], p: UnifyParams) -> Unified {
    reverse_unify_with(paths, p, |_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn lookahead_examples() {
        let path: Vec<Cell> = (0..20).map(|j| Cell::new(5, j)).collect();
        for t in 0..19 {
            assert!(lookahead_direction(&path, t, 6).abs() < 1e-12);
        }
        let bend = vec![Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 1)];
        assert!((lookahead_direction(&bend, 1, 6) - FRAC_PI_2).abs() < 1e-12);
    }

    /// Quarter circle of radius 20 traced through cells, counterclockwise.
    fn quarter_circle() -> Vec<Cell> {
        let r = 20.0;
        let mut out: Vec<Cell> = Vec::new();
        for k in 0..=2000 {
            let a = FRAC_PI_2 * k as f64 / 2000.0;
            let c = Cell::new((30.0 + r * a.sin()).round() as usize, (30.0 + r * a.cos()).round() as usize);
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        // drop staircase corners so the path is 8-connected like a search path
        let mut thin: Vec<Cell> = vec![out[0]];
        for k in 1..out.len() {
            if k + 1 < out.len() && thin.last().unwrap().chebyshev(out[k + 1]) == 1 {
                continue;
            }
            thin.push(out[k]);
        }
        thin
    }

    #[test]
    fn lookahead_leads_tangent_by_chord_half_angle() {
        let path = quarter_circle();
        let polar = |c: Cell| (c.i as f64 - 30.0).atan2(c.j as f64 - 30.0);
        let (mut lead_sum, mut half_sum, mut n) = (0.0, 0.0, 0.0);
        for t in 0..path.len() - 6 {
            let tangent = polar(path[t]) + FRAC_PI_2;
            // the chord between two points of a circle turns ahead of the
            // tangent by half the angle it subtends
            let half = (polar(path[t + 6]) - polar(path[t])) / 2.0;
            let lead = lookahead_direction(&path, t, 6) - tangent;
            assert!((lead - half).abs() < deg(12.0), "t {t}: lead {lead} vs {half}");
            lead_sum += lead;
            half_sum += half;
            n += 1.0;
        }
        assert!((lead_sum / n - half_sum / n).abs() < deg(1.5));
        // roughly six steps of arc at radius 20
        assert!((half_sum / n - 6.0 / 40.0).abs() < deg(3.0), "{}", (half_sum / n).to_degrees());
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence_angle(&[deg(37.0)]), 0.0);
        assert!((divergence_angle(&[0.0, deg(30.0), deg(90.0)]) - deg(90.0)).abs() < 1e-12);
        assert!((divergence_angle(&[0.0, PI]) - PI).abs() < 1e-12);
        assert!(divergence_angle(&[deg(350.0), deg(10.0)]) - deg(20.0) < 1e-12);
    }

    fn straight(i: usize, j0: usize, j1: usize) -> Vec<Cell> {
        (j0..=j1).map(|j| Cell::new(i, j)).collect()
    }

    #[test]
    fn identical_paths_do_not_branch() {
        let p = straight(10, 0, 40);
        let u = unify(&[p.clone(), p.clone()], UnifyParams::default());
        assert_eq!(u.common, p);
        assert_eq!(u.suffixes, vec![vec![p[40]]; 2]);
        let r = reverse_unify(&[p.clone(), p.clone()], UnifyParams::default());
        assert_eq!(r.common, p);
        assert_eq!(r.suffixes, vec![vec![p[0]]; 2]);
        let single = unify(&[p.clone()], UnifyParams::default());
        assert_eq!(single.common, p);
        assert_eq!(single.suffixes.len(), 1);
    }

    /// Straight path plus one that turns by 90 degrees after 30 shared cells.
    fn fork_tree() -> Vec<Vec<Cell>> {
        let a = straight(40, 0, 60);
        let mut b = straight(40, 0, 30);
        b.extend((41..=70).map(|i| Cell::new(i, 30)));
        vec![a, b]
    }

    #[test]
    fn fork_is_found_near_the_geometric_split() {
        let u = unify(&fork_tree(), UnifyParams::default());
        assert!(u.split <= 30 && u.split + 6 >= 30, "split {}", u.split);
        assert_eq!(u.common.len(), u.split + 1);
        let root = *u.common.last().unwrap();
        for s in &u.suffixes {
            assert_eq!(s[0], root);
            for w in s.windows(2) {
                assert!(w[0].chebyshev(w[1]) <= 2);
            }
        }
        assert_eq!(*u.suffixes[0].last().unwrap(), Cell::new(40, 60));
        assert_eq!(*u.suffixes[1].last().unwrap(), Cell::new(70, 30));
    }

    #[test]
    fn merge_mirrors_fork() {
        let rev: Vec<Vec<Cell>> = fork_tree().into_iter().map(|p| p.into_iter().rev().collect()).collect();
        let u = reverse_unify(&rev, UnifyParams::default());
        let f = unify(&fork_tree(), UnifyParams::default());
        let mut expect = f.common.clone();
        expect.reverse();
        assert_eq!(u.common, expect);
        assert_eq!(*u.suffixes[0].last().unwrap(), u.common[0]);
    }

    #[test]
    fn three_way_split_yields_one_prefix_and_three_suffixes() {
        let stem = straight(50, 0, 20);
        let mut paths = Vec::new();
        for di in [-1isize, 0, 1] {
            let mut p = stem.clone();
            for k in 1..=25isize {
                p.push(Cell::new((50 + di * k) as usize, 20 + k as usize));
            }
            paths.push(p);
        }
        let u = unify(&paths, UnifyParams::default());
        assert!(u.split <= 20 && u.split + 6 >= 20);
        assert_eq!(u.suffixes.len(), 3);
        let ends: Vec<Cell> = u.suffixes.iter().map(|s| *s.last().unwrap()).collect();
        assert_eq!(ends, vec![Cell::new(25, 45), Cell::new(50, 45), Cell::new(75, 45)]);
    }

    #[test]
    fn unify_is_idempotent_on_its_output() {
        for tree in [fork_tree(), {
            let stem = straight(50, 0, 20);
            let mut a = stem.clone();
            a.extend((1..=20).map(|k| Cell::new(50 - k, 20 + k)));
            let mut b = stem;
            b.extend((1..=20).map(|k| Cell::new(50 + k, 20 + k)));
            vec![a, b]
        }] {
            let p = UnifyParams::default();
            let u = unify(&tree, p);
            let rebuilt: Vec<Vec<Cell>> = u
                .suffixes
                .iter()
                .map(|s| {
                    let mut q = u.common.clone();
                    q.extend_from_slice(&s[1..]);
                    q
                })
                .collect();
            assert_eq!(unify(&rebuilt, p).common, u.common);
        }
    }

    #[test]
    fn diagonal_divergence_threshold() {
        // 45 degree branches exceed the default threshold
        assert!(divergence_angle(&[0.0, FRAC_PI_4]) > THETA_DIV);
    }
}
