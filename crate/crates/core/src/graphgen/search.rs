//! Lane-map preprocessing, gated edge weights, cluster centres, and A*.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grid::{angle_diff, Cell, GridMap};
use crate::oracle::DirectionalField;

/// Side of the smoothing window.
pub const KERNEL: usize = 8;
/// Exponent applied after smoothing.
pub const SHARPEN: i32 = 8;

/// The eight neighbour offsets `(di, dj)`.
pub const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Thresholds at 0.5, averages over an 8x8 window covering offsets
/// `[-4, +3]` (zero outside the map), and raises the result to the 8th
/// power. Uses the first channel.
pub fn preprocess_lane_map(lane: &GridMap) -> GridMap {
    let (h, w) = (lane.height(), lane.width());
    let bin: Vec<f64> = lane.channel(0).iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    // summed-area table with a zero border
    let mut sat = vec![0.0; (h + 1) * (w + 1)];
    for i in 0..h {
        for j in 0..w {
            sat[(i + 1) * (w + 1) + j + 1] =
                bin[i * w + j] + sat[i * (w + 1) + j + 1] + sat[(i + 1) * (w + 1) + j] - sat[i * (w + 1) + j];
        }
    }
    let half = (KERNEL / 2) as isize;
    let mut out = GridMap::zeros(1, h, w);
    for i in 0..h {
        let i0 = (i as isize - half).max(0) as usize;
        let i1 = ((i as isize + half) as usize).min(h);
        for j in 0..w {
            let j0 = (j as isize - half).max(0) as usize;
            let j1 = ((j as isize + half) as usize).min(w);
            let s = sat[i1 * (w + 1) + j1] - sat[i0 * (w + 1) + j1] - sat[i1 * (w + 1) + j0] + sat[i0 * (w + 1) + j0];
            out.set(0, i, j, (s / (KERNEL * KERNEL) as f64).powi(SHARPEN));
        }
    }
    out
}

/// Implicit weighted 8-neighbour adjacency over the label grid.
#[derive(Debug, Clone)]
pub struct AdjacencyField<'a> {
    pub lane_tilde: GridMap,
    pub direction: &'a DirectionalField,
    pub delta_theta: f64,
}

impl<'a> AdjacencyField<'a> {
    pub fn new(lane: &GridMap, direction: &'a DirectionalField, delta_theta: f64) -> Self {
        AdjacencyField { lane_tilde: preprocess_lane_map(lane), direction, delta_theta }
    }

    pub fn height(&self) -> usize {
        self.lane_tilde.height()
    }

    pub fn width(&self) -> usize {
        self.lane_tilde.width()
    }

    pub fn support(&self, c: Cell) -> f64 {
        self.lane_tilde.at(0, c)
    }

    /// `|AB| - ln ỹ_B` when some active direction at `a` lies within the
    /// gate angle of the move and `ỹ_B > 0`; `None` otherwise.
    pub fn edge_weight(&self, a: Cell, b: Cell) -> Option<f64> {
        let y = self.support(b);
        if y <= 0.0 {
            return None;
        }
        let heading = a.heading_to(b);
        if !self.direction.active(a).any(|c| angle_diff(heading, c.mean) <= self.delta_theta) {
            return None;
        }
        Some(a.dist(b) - y.ln())
    }

    /// Reachable neighbours of `a` with their weights.
    pub fn successors(&self, a: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        let (h, w) = (self.height(), self.width());
        NEIGHBORS
            .iter()
            .filter_map(move |&(di, dj)| a.offset(di, dj, h, w))
            .filter_map(move |b| self.edge_weight(a, b).map(|wt| (b, wt)))
    }
}

/// Centres of 8-connected clusters above `threshold`: the value-weighted
/// centroid of each cluster, rounded to the nearest cell of that cluster.
/// Clusters are reported in row-major order of their first cell.
pub fn extract_points(map: &GridMap, threshold: f64) -> Vec<Cell> {
    let (h, w) = (map.height(), map.width());
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        if seen[start] || map.get(0, start / w, start % w) <= threshold {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            let c = Cell::new(k / w, k % w);
            members.push(c);
            for &(di, dj) in &NEIGHBORS {
                if let Some(n) = c.offset(di, dj, h, w) {
                    let idx = n.i * w + n.j;
                    if !seen[idx] && map.at(0, n) > threshold {
                        seen[idx] = true;
                        stack.push(idx);
                    }
                }
            }
        }
        let (mut si, mut sj, mut sw) = (0.0, 0.0, 0.0);
        for c in &members {
            let v = map.at(0, *c);
            si += v * c.i as f64;
            sj += v * c.j as f64;
            sw += v;
        }
        let (ci, cj) = (si / sw, sj / sw);
        let best = members
            .iter()
            .min_by(|a, b| {
                let da = (a.i as f64 - ci).powi(2) + (a.j as f64 - cj).powi(2);
                let db = (b.i as f64 - ci).powi(2) + (b.j as f64 - cj).powi(2);
                da.total_cmp(&db).then(a.cmp(b))
            })
            .copied()
            .expect("cluster has a member");
        out.push(best);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    cell: Cell,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // reversed: BinaryHeap is a max-heap and we pop the smallest (f, i, j)
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A found path and its total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPath {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

/// Minimum-weight path from `start` to `goal` under the gated adjacency,
/// guided by the Euclidean cell distance. Frontier ties resolve to the
/// smaller `(i, j)`.
pub fn astar(start: Cell, goal: Cell, field: &AdjacencyField) -> Option<SearchPath> {
    let (h, w) = (field.height(), field.width());
    let idx = |c: Cell| c.i * w + c.j;
    let mut g = vec![f64::INFINITY; h * w];
    let mut parent = vec![usize::MAX; h * w];
    let mut closed = vec![false; h * w];
    let mut heap = BinaryHeap::new();
    g[idx(start)] = 0.0;
    heap.push(Frontier { f: start.dist(goal), cell: start });
    while let Some(Frontier { cell, .. }) = heap.pop() {
        let k = idx(cell);
        if closed[k] {
            continue;
        }
        closed[k] = true;
        if cell == goal {
            let mut cells = vec![cell];
            let mut at = k;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(Cell::new(at / w, at % w));
            }
            cells.reverse();
            return Some(SearchPath { cells, cost: g[k] });
        }
        for (n, wt) in field.successors(cell) {
            let nk = idx(n);
            if closed[nk] {
                continue;
            }
            let cand = g[k] + wt;
            if cand < g[nk] {
                g[nk] = cand;
                parent[nk] = k;
                heap.push(Frontier { f: cand + n.dist(goal), cell: n });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::vonmises::VmComponent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn preprocess_examples() {
        let ones = GridMap::filled(1, 32, 32, 1.0);
        let t = preprocess_lane_map(&ones);
        assert_eq!(t.get(0, 16, 16), 1.0);
        // window rows 12..=19; ones on rows >= 16 fill half of it
        let mut half = GridMap::zeros(1, 32, 32);
        for i in 16..32 {
            for j in 0..32 {
                half.set(0, i, j, 1.0);
            }
        }
        assert_eq!(preprocess_lane_map(&half).get(0, 16, 16), 0.00390625);
        assert!(preprocess_lane_map(&GridMap::zeros(1, 8, 8)).data().iter().all(|&v| v == 0.0));
        // corner window is clipped by zero padding: rows/cols 0..=3 only
        assert_eq!(t.get(0, 0, 0), 0.25f64.powi(8));
        // threshold happens first
        let faint = GridMap::filled(1, 16, 16, 0.5);
        assert!(preprocess_lane_map(&faint).data().iter().all(|&v| v == 0.0));
    }

    /// Uniform field where every cell points along `heading`.
    fn uniform_field(n: usize, heading: f64) -> (GridMap, DirectionalField) {
        let lane = GridMap::filled(1, n, n, 1.0);
        let mut d = DirectionalField::new(n, n);
        for c in d.cells().collect::<Vec<_>>() {
            d.set(c, &[VmComponent::new(1.0, heading, 8.0)]);
        }
        (lane, d)
    }

    #[test]
    fn edge_weight_examples() {
        let (lane, d) = uniform_field(32, 0.0);
        let mut f = AdjacencyField::new(&lane, &d, PI / 4.0);
        let a = Cell::new(16, 16);
        assert_eq!(f.edge_weight(a, Cell::new(16, 17)), Some(1.0));
        f.lane_tilde.set(0, 16, 17, (-1.0f64).exp());
        assert!((f.edge_weight(a, Cell::new(16, 17)).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(f.edge_weight(a, Cell::new(16, 15)), None);
        // 45 degrees off the component is still inside the gate
        assert!((f.edge_weight(a, Cell::new(17, 17)).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(f.edge_weight(a, Cell::new(17, 16)), None);
        f.lane_tilde.set(0, 15, 17, 0.0);
        assert_eq!(f.edge_weight(a, Cell::new(15, 17)), None);
    }

    #[test]
    fn extract_points_examples() {
        let mut m = GridMap::zeros(1, 64, 64);
        assert!(extract_points(&m, 0.5).is_empty());
        for di in -1..=1isize {
            for dj in -1..=1isize {
                let v = if di == 0 && dj == 0 { 1.0 } else { 0.8 };
                m.set(0, (10 + di) as usize, (10 + dj) as usize, v);
                m.set(0, (10 + di) as usize, (30 + dj) as usize, v);
            }
        }
        assert_eq!(extract_points(&m, 0.5), vec![Cell::new(10, 10), Cell::new(10, 30)]);
    }

    #[test]
    fn straight_search_on_open_field() {
        let (lane, d) = uniform_field(64, FRAC_PI_2);
        let f = AdjacencyField::new(&lane, &d, PI / 4.0);
        let p = astar(Cell::new(10, 20), Cell::new(40, 20), &f).unwrap();
        assert_eq!(p.cells.len(), 31);
        assert!(p.cells.iter().all(|c| c.j == 20));
        assert!((p.cost - 30.0).abs() < 1e-12);
        assert!(astar(Cell::new(40, 20), Cell::new(10, 20), &f).is_none());
        let s = astar(Cell::new(5, 5), Cell::new(5, 5), &f).unwrap();
        assert_eq!(s.cells, vec![Cell::new(5, 5)]);
    }

    fn dijkstra(start: Cell, goal: Cell, f: &AdjacencyField) -> Option<f64> {
        let (h, w) = (f.height(), f.width());
        let mut dist = vec![f64::INFINITY; h * w];
        let mut done = vec![false; h * w];
        dist[start.i * w + start.j] = 0.0;
        loop {
            // plain O(V^2) selection keeps the oracle independent of the heap
            let mut best = None;
            for k in 0..h * w {
                if !done[k] && dist[k].is_finite() && best.map_or(true, |b: usize| dist[k] < dist[b]) {
                    best = Some(k);
                }
            }
            let k = best?;
            done[k] = true;
            let c = Cell::new(k / w, k % w);
            if c == goal {
                return Some(dist[k]);
            }
            for (n, wt) in f.successors(c) {
                let nk = n.i * w + n.j;
                if dist[k] + wt < dist[nk] {
                    dist[nk] = dist[k] + wt;
                }
            }
        }
    }

    #[test]
    fn astar_matches_dijkstra_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 32;
        for _ in 0..200 {
            let mut lane = GridMap::zeros(1, n, n);
            let mut d = DirectionalField::new(n, n);
            for c in d.cells().collect::<Vec<_>>() {
                if rng.random::<f64>() < 0.8 {
                    lane.set(0, c.i, c.j, 1.0);
                }
                let k = rng.random_range(1..=3);
                let comps: Vec<_> =
                    (0..k).map(|_| VmComponent::new(1.0 / k as f64, rng.random_range(0.0..2.0 * PI), 8.0)).collect();
                d.set(c, &comps);
            }
            let f = AdjacencyField::new(&lane, &d, PI / 4.0);
            let s = Cell::new(rng.random_range(0..n), rng.random_range(0..n));
            let g = Cell::new(rng.random_range(0..n), rng.random_range(0..n));
            let a = astar(s, g, &f);
            let o = dijkstra(s, g, &f);
            match (a, o) {
                (Some(p), Some(c)) => {
                    assert!((p.cost - c).abs() < 1e-9, "{} vs {c}", p.cost);
                    assert_eq!(p.cells[0], s);
                    assert_eq!(*p.cells.last().unwrap(), g);
                    for w in p.cells.windows(2) {
                        assert!(f.support(w[1]) > 0.0);
                        assert!(f.edge_weight(w[0], w[1]).is_some());
                    }
                }
                (None, None) => {}
                (a, o) => panic!("astar {a:?} vs dijkstra {o:?}"),
            }
        }
    }
}
