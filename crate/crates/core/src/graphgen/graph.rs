//! Lane graphs, their JSON form, and the structural validator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Entry,
    Fork,
    Merge,
    Exit,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Entry => "entry",
            VertexKind::Fork => "fork",
            VertexKind::Merge => "merge",
            VertexKind::Exit => "exit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "entry" => VertexKind::Entry,
            "fork" => VertexKind::Fork,
            "merge" => VertexKind::Merge,
            "exit" => VertexKind::Exit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Entry,
    Intersection,
    Exit,
    Lane,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Entry => "entry",
            EdgeKind::Intersection => "intersection",
            EdgeKind::Exit => "exit",
            EdgeKind::Lane => "lane",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "entry" => EdgeKind::Entry,
            "intersection" => EdgeKind::Intersection,
            "exit" => EdgeKind::Exit,
            "lane" => EdgeKind::Lane,
            _ => return None,
        })
    }

    /// Edge kind implied by its endpoint kinds. Point intersections (a fork
    /// with no merge, or a merge with no fork) join entry or exit edges
    /// directly to the branching vertex.
    pub fn between(src: VertexKind, dst: VertexKind) -> Option<EdgeKind> {
        use VertexKind as V;
        match (src, dst) {
            (V::Entry, V::Fork | V::Merge) => Some(EdgeKind::Entry),
            (V::Fork, V::Merge) => Some(EdgeKind::Intersection),
            (V::Fork | V::Merge, V::Exit) => Some(EdgeKind::Exit),
            (V::Entry, V::Exit) => Some(EdgeKind::Lane),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub kind: VertexKind,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    pub geometry: Vec<Cell>,
}

/// Directed lane network over grid cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LaneGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub warnings: Vec<String>,
}

/// Terminal-to-terminal routes keyed by (entry id, exit id), each with the
/// set of edge-kind sequences realising it.
pub type RouteRelation = BTreeMap<(usize, usize), BTreeSet<Vec<EdgeKind>>>;

impl LaneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, kind: VertexKind, cell: Cell) -> usize {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, kind, cell });
        id
    }

    /// Adds an edge whose kind follows from its endpoints.
    pub fn connect(&mut self, src: usize, dst: usize, geometry: Vec<Cell>) -> Result<()> {
        let (a, b) = (self.vertex(src)?.kind, self.vertex(dst)?.kind);
        let kind = EdgeKind::between(a, b).ok_or_else(|| {
            Error::InvalidArgument(format!("no edge kind joins {} to {}", a.as_str(), b.as_str()))
        })?;
        self.edges.push(Edge { src, dst, kind, geometry });
        Ok(())
    }

    pub fn vertex(&self, id: usize) -> Result<&Vertex> {
        self.vertices
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no vertex {id}")))
    }

    fn kind_of(&self, id: usize) -> Option<VertexKind> {
        self.vertices.iter().find(|v| v.id == id).map(|v| v.kind)
    }

    pub fn count_vertices(&self, kind: VertexKind) -> usize {
        self.vertices.iter().filter(|v| v.kind == kind).count()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty()
    }

    fn out_edges(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, e) in self.edges.iter().enumerate() {
            m.entry(e.src).or_default().push(k);
        }
        m
    }

    /// Maximal edge paths from every entry vertex, truncated after `limit`
    /// edges so that cyclic graphs terminate.
    fn entry_paths(&self, limit: usize) -> Vec<Vec<usize>> {
        let out = self.out_edges();
        let mut paths = Vec::new();
        for v in self.vertices.iter().filter(|v| v.kind == VertexKind::Entry) {
            let mut stack: Vec<(usize, Vec<usize>)> = vec![(v.id, Vec::new())];
            while let Some((at, path)) = stack.pop() {
                let next = out.get(&at).map(Vec::as_slice).unwrap_or(&[]);
                if next.is_empty() || path.len() > limit {
                    paths.push(path);
                    continue;
                }
                for &e in next.iter().rev() {
                    let mut p = path.clone();
                    p.push(e);
                    stack.push((self.edges[e].dst, p));
                }
            }
        }
        paths
    }

    /// The entry-to-exit route relation.
    pub fn routes(&self) -> RouteRelation {
        let mut rel = RouteRelation::new();
        for path in self.entry_paths(8) {
            let Some(first) = path.first() else { continue };
            let last = *path.last().unwrap();
            let dst = self.edges[last].dst;
            if self.kind_of(dst) != Some(VertexKind::Exit) {
                continue;
            }
            let kinds = path.iter().map(|&e| self.edges[e].kind).collect();
            rel.entry((self.edges[*first].src, dst)).or_default().insert(kinds);
        }
        rel
    }

    /// JSON value with sorted keys and arrays in construction order.
    pub fn to_json(&self) -> Value {
        let cell = |c: &Cell| json!([c.i, c.j]);
        json!({
            "vertices": self.vertices.iter().map(|v| json!({
                "id": v.id, "kind": v.kind.as_str(), "cell": cell(&v.cell)
            })).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!({
                "src": e.src, "dst": e.dst, "kind": e.kind.as_str(),
                "geometry": e.geometry.iter().map(cell).collect::<Vec<_>>()
            })).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("graph json");
        s.push('\n');
        s
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("graph json: {m}"));
        let cell = |v: &Value| -> Result<Cell> {
            let a = v.as_array().ok_or_else(|| bad("cell is not an array"))?;
            match a.as_slice() {
                [i, j] => Ok(Cell::new(
                    i.as_u64().ok_or_else(|| bad("cell row"))? as usize,
                    j.as_u64().ok_or_else(|| bad("cell col"))? as usize,
                )),
                _ => Err(bad("cell needs two entries")),
            }
        };
        let mut g = LaneGraph::new();
        for v in v["vertices"].as_array().ok_or_else(|| bad("missing vertices"))? {
            g.vertices.push(Vertex {
                id: v["id"].as_u64().ok_or_else(|| bad("vertex id"))? as usize,
                kind: v["kind"].as_str().and_then(VertexKind::parse).ok_or_else(|| bad("vertex kind"))?,
                cell: cell(&v["cell"])?,
            });
        }
        for e in v["edges"].as_array().ok_or_else(|| bad("missing edges"))? {
            g.edges.push(Edge {
                src: e["src"].as_u64().ok_or_else(|| bad("edge src"))? as usize,
                dst: e["dst"].as_u64().ok_or_else(|| bad("edge dst"))? as usize,
                kind: e["kind"].as_str().and_then(EdgeKind::parse).ok_or_else(|| bad("edge kind"))?,
                geometry: e["geometry"]
                    .as_array()
                    .ok_or_else(|| bad("edge geometry"))?
                    .iter()
                    .map(cell)
                    .collect::<Result<_>>()?,
            });
        }
        if let Some(w) = v["warnings"].as_array() {
            g.warnings = w.iter().filter_map(|s| s.as_str().map(String::from)).collect();
        }
        Ok(g)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::json("graph", e))?;
        Self::from_json(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    /// (a) the graph has a directed cycle
    Cycle,
    /// (b) an entry-to-exit path with zero or more than three edges
    Depth,
    /// (c) fork outdegree or merge indegree below two
    Degree,
    /// (d) edge kinds inconsistent with endpoint kinds
    Sequencing,
    /// (e) a lane passing through more than one intersection
    Overlap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Checks a graph against the lane network model. An empty list means valid.
pub fn validate_graph(g: &LaneGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Violation { kind, message });

    let ids: BTreeMap<usize, VertexKind> = g.vertices.iter().map(|v| (v.id, v.kind)).collect();
    if ids.len() != g.vertices.len() {
        push(ViolationKind::Sequencing, "duplicate vertex ids".into());
    }
    let mut indeg: BTreeMap<usize, usize> = ids.keys().map(|&k| (k, 0)).collect();
    let mut outdeg = indeg.clone();
    for (k, e) in g.edges.iter().enumerate() {
        let (Some(&a), Some(&b)) = (ids.get(&e.src), ids.get(&e.dst)) else {
            push(ViolationKind::Sequencing, format!("edge {k} references a missing vertex"));
            continue;
        };
        *outdeg.get_mut(&e.src).unwrap() += 1;
        *indeg.get_mut(&e.dst).unwrap() += 1;
        if EdgeKind::between(a, b) != Some(e.kind) {
            push(
                ViolationKind::Sequencing,
                format!("edge {k} is '{}' but joins {} to {}", e.kind.as_str(), a.as_str(), b.as_str()),
            );
        }
    }

    // (a) Kahn's algorithm
    let mut remaining = indeg.clone();
    let mut queue: Vec<usize> = remaining.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut seen = 0;
    let out_edges = g.out_edges();
    while let Some(v) = queue.pop() {
        seen += 1;
        for &e in out_edges.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            let dst = g.edges[e].dst;
            if let Some(d) = remaining.get_mut(&dst) {
                *d -= 1;
                if *d == 0 {
                    queue.push(dst);
                }
            }
        }
    }
    let acyclic = seen == remaining.len();
    if !acyclic {
        push(ViolationKind::Cycle, format!("{} vertices lie on or behind a cycle", remaining.len() - seen));
    }

    // (c)
    for v in &g.vertices {
        match v.kind {
            VertexKind::Fork if outdeg[&v.id] < 2 => {
                push(ViolationKind::Degree, format!("fork {} has outdegree {}", v.id, outdeg[&v.id]))
            }
            VertexKind::Merge if indeg[&v.id] < 2 => {
                push(ViolationKind::Degree, format!("merge {} has indegree {}", v.id, indeg[&v.id]))
            }
            VertexKind::Entry if indeg[&v.id] > 0 => {
                push(ViolationKind::Sequencing, format!("entry {} has incoming edges", v.id))
            }
            VertexKind::Exit if outdeg[&v.id] > 0 => {
                push(ViolationKind::Sequencing, format!("exit {} has outgoing edges", v.id))
            }
            _ => {}
        }
    }

    // (b) and (e)
    let component = intersection_components(g);
    for path in g.entry_paths(3) {
        let start = path.first().map(|&e| g.edges[e].src);
        if path.is_empty() {
            push(ViolationKind::Depth, "entry vertex with no outgoing edges".into());
            continue;
        }
        let end = g.edges[*path.last().unwrap()].dst;
        if path.len() > 3 {
            push(
                ViolationKind::Depth,
                format!("path from vertex {} has more than three edges", start.unwrap()),
            );
            continue;
        }
        if ids.get(&end) != Some(&VertexKind::Exit) {
            push(ViolationKind::Depth, format!("path from vertex {} ends at non-exit {end}", start.unwrap()));
        }
        let touched: BTreeSet<usize> = path
            .iter()
            .flat_map(|&e| [g.edges[e].src, g.edges[e].dst])
            .filter_map(|v| component.get(&v).copied())
            .collect();
        if touched.len() > 1 {
            push(
                ViolationKind::Overlap,
                format!("path from vertex {} crosses {} intersections", start.unwrap(), touched.len()),
            );
        }
    }
    out
}

/// Labels fork/merge vertices by intersection: connected components over
/// intersection edges.
fn intersection_components(g: &LaneGraph) -> BTreeMap<usize, usize> {
    let mut parent: BTreeMap<usize, usize> = g
        .vertices
        .iter()
        .filter(|v| matches!(v.kind, VertexKind::Fork | VertexKind::Merge))
        .map(|v| (v.id, v.id))
        .collect();
    fn find(p: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let mut r = x;
        while p[&r] != r {
            r = p[&r];
        }
        let mut y = x;
        while p[&y] != r {
            let n = p[&y];
            p.insert(y, r);
            y = n;
        }
        r
    }
    for e in g.edges.iter().filter(|e| e.kind == EdgeKind::Intersection) {
        if parent.contains_key(&e.src) && parent.contains_key(&e.dst) {
            let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
            if a != b {
                parent.insert(a.max(b), a.min(b));
            }
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    keys.into_iter().map(|k| (k, find(&mut parent, k))).collect()
}
