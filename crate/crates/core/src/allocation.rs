//! Allocation of surplus potential to district-network zones with a
//! deficit: a bipartite proximity graph, split into connected components,
//! each solved as a maximum-flow transportation problem.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AllocationError;
use crate::geometry::{self, MultiPolygon};
use crate::geospatial::PixelAccount;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxLength {
    LongerSide,
    ShorterSide,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdRule {
    pub fraction: f64,
    pub length: BoxLength,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule {
            fraction: 0.20,
            length: BoxLength::LongerSide,
        }
    }
}

/// Length of the minimum-area oriented bounding box of a zone. Collinear
/// input gives the segment length.
pub fn oriented_mbb_length(zone: &MultiPolygon, length: BoxLength) -> f64 {
    let pts: Vec<_> = zone.vertices().copied().collect();
    let (long, short) = geometry::min_area_rectangle(&pts);
    match length {
        BoxLength::LongerSide => long,
        BoxLength::ShorterSide => short,
        BoxLength::Diagonal => long.hypot(short),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub geometry: MultiPolygon,
    /// Surplus for sources, deficit for demands, Wh/y.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub source: String,
    pub demand: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationGraph {
    pub sources: Vec<Vertex>,
    pub demands: Vec<Vertex>,
    /// (source index, demand index)
    pub edges: Vec<(usize, usize)>,
    pub flows: Vec<Flow>,
}

fn check_capacity(v: &Vertex) -> Result<(), AllocationError> {
    if v.capacity.is_finite() && v.capacity >= 0.0 {
        Ok(())
    } else {
        Err(AllocationError::InvalidCapacity {
            vertex: v.id.clone(),
            value: v.capacity,
        })
    }
}

/// Connects every source whose closest distance to a demand zone is within
/// the rule's share of that zone's bounding-box length.
pub fn build_graph(
    sources: Vec<Vertex>,
    demands: Vec<Vertex>,
    rule: &ThresholdRule,
) -> Result<AllocationGraph, AllocationError> {
    for v in sources.iter().chain(&demands) {
        check_capacity(v)?;
    }
    let mut edges = Vec::new();
    for (j, d) in demands.iter().enumerate() {
        let threshold = rule.fraction * oriented_mbb_length(&d.geometry, rule.length);
        for (i, s) in sources.iter().enumerate() {
            if geometry::polygon_distance(&s.geometry, &d.geometry) <= threshold {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    Ok(AllocationGraph {
        sources,
        demands,
        edges,
        flows: Vec::new(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Component {
    pub sources: Vec<usize>,
    pub demands: Vec<usize>,
    /// Indices into the graph's edge list.
    pub edges: Vec<usize>,
}

/// Connected components, isolated vertices included, ordered by the
/// smallest vertex id they contain.
pub fn connected_components(graph: &AllocationGraph) -> Vec<Component> {
    let ns = graph.sources.len();
    let mut uf = UnionFind::new(ns + graph.demands.len());
    for &(s, d) in &graph.edges {
        uf.union(s, ns + d);
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for s in 0..ns {
        groups.entry(uf.find(s)).or_default().sources.push(s);
    }
    for d in 0..graph.demands.len() {
        groups.entry(uf.find(ns + d)).or_default().demands.push(d);
    }
    for (k, &(s, _)) in graph.edges.iter().enumerate() {
        groups.get_mut(&uf.find(s)).expect("edge root").edges.push(k);
    }
    let mut comps: Vec<(String, Component)> = groups
        .into_values()
        .map(|c| {
            let key = c
                .sources
                .iter()
                .map(|&s| &graph.sources[s].id)
                .chain(c.demands.iter().map(|&d| &graph.demands[d].id))
                .min()
                .cloned()
                .unwrap_or_default();
            (key, c)
        })
        .collect();
    comps.sort_by(|a, b| a.0.cmp(&b.0));
    comps.into_iter().map(|(_, c)| c).collect()
}

/// Bipartite transportation instance on whole-Wh capacities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransportProblem {
    pub supply: Vec<u64>,
    pub demand: Vec<u64>,
    pub edges: Vec<(usize, usize)>,
}

/// Energy to whole Wh, rounded down so flows never exceed the float capacity.
pub fn to_wh(value: f64) -> u64 {
    value.max(0.0).floor() as u64
}

struct Arc {
    to: usize,
    cap: u64,
}

struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: u64) -> usize {
        let k = self.arcs.len();
        self.arcs.push(Arc { to, cap });
        self.adj[from].push(k);
        self.arcs.push(Arc { to: from, cap: 0 });
        self.adj[to].push(k + 1);
        k
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &k in &self.adj[u] {
                let a = &self.arcs[k];
                if a.cap > 0 && level[a.to] == usize::MAX {
                    level[a.to] = level[u] + 1;
                    queue.push_back(a.to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(&mut self, u: usize, t: usize, pushed: u64, level: &[usize], next: &mut [usize]) -> u64 {
        if u == t {
            return pushed;
        }
        while next[u] < self.adj[u].len() {
            let k = self.adj[u][next[u]];
            let (to, cap) = (self.arcs[k].to, self.arcs[k].cap);
            if cap > 0 && level[to] == level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got > 0 {
                    self.arcs[k].cap -= got;
                    self.arcs[k ^ 1].cap += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut total = 0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, u64::MAX, &level, &mut next);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }
}

/// Maximum total allocation, returned as the flow on each edge. Arcs are
/// scanned in edge-list order, so the solution is deterministic.
pub fn solve_transportation(problem: &TransportProblem) -> Result<Vec<u64>, AllocationError> {
    let (ns, nd) = (problem.supply.len(), problem.demand.len());
    for &(s, d) in &problem.edges {
        if s >= ns {
            return Err(AllocationError::UnknownVertex(format!("source #{s}")));
        }
        if d >= nd {
            return Err(AllocationError::UnknownVertex(format!("demand #{d}")));
        }
    }
    let (src, sink) = (ns + nd, ns + nd + 1);
    let mut net = Network::new(ns + nd + 2);
    for (i, &c) in problem.supply.iter().enumerate() {
        net.add(src, i, c);
    }
    let arcs: Vec<usize> = problem
        .edges
        .iter()
        .map(|&(s, d)| net.add(s, ns + d, problem.supply[s]))
        .collect();
    for (j, &c) in problem.demand.iter().enumerate() {
        net.add(ns + j, sink, c);
    }
    net.max_flow(src, sink);
    Ok(arcs.into_iter().map(|k| net.arcs[k ^ 1].cap).collect())
}

impl Component {
    pub fn problem(&self, graph: &AllocationGraph) -> TransportProblem {
        let s_local: BTreeMap<usize, usize> = self.sources.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let d_local: BTreeMap<usize, usize> = self.demands.iter().enumerate().map(|(k, &d)| (d, k)).collect();
        TransportProblem {
            supply: self.sources.iter().map(|&s| to_wh(graph.sources[s].capacity)).collect(),
            demand: self.demands.iter().map(|&d| to_wh(graph.demands[d].capacity)).collect(),
            edges: self
                .edges
                .iter()
                .map(|&k| {
                    let (s, d) = graph.edges[k];
                    (s_local[&s], d_local[&d])
                })
                .collect(),
        }
    }
}

impl AllocationGraph {
    /// Solves every component independently and stores positive flows in
    /// edge order.
    pub fn solve(&mut self) -> Result<u64, AllocationError> {
        let comps = connected_components(self);
        let solved: Vec<(Vec<usize>, Vec<u64>)> = comps
            .par_iter()
            .filter(|c| !c.edges.is_empty())
            .map(|c| solve_transportation(&c.problem(self)).map(|f| (c.edges.clone(), f)))
            .collect::<Result<_, _>>()?;
        let mut per_edge = vec![0u64; self.edges.len()];
        for (edges, flows) in solved {
            for (k, f) in edges.into_iter().zip(flows) {
                per_edge[k] = f;
            }
        }
        self.flows = self
            .edges
            .iter()
            .zip(&per_edge)
            .filter(|(_, &f)| f > 0)
            .map(|(&(s, d), &f)| Flow {
                source: self.sources[s].id.clone(),
                demand: self.demands[d].id.clone(),
                amount: f as f64,
            })
            .collect();
        Ok(per_edge.iter().sum())
    }

    pub fn total_flow(&self) -> f64 {
        self.flows.iter().map(|f| f.amount).sum()
    }
}

/// Books the solved flows into the unit accounts: demands gain useful heat,
/// sources lose surplus.
pub fn apply_allocation(
    accounts: &mut BTreeMap<String, PixelAccount>,
    graph: &AllocationGraph,
) -> Result<(), AllocationError> {
    for f in &graph.flows {
        for id in [&f.source, &f.demand] {
            if !accounts.contains_key(id) {
                return Err(AllocationError::UnknownVertex(id.clone()));
            }
        }
    }
    for f in &graph.flows {
        let s = accounts.get_mut(&f.source).expect("checked");
        s.surplus_heat = (s.surplus_heat - f.amount).max(0.0);
        s.exported_heat += f.amount;
        let d = accounts.get_mut(&f.demand).expect("checked");
        d.useful_heat += f.amount;
        d.deficit_heat = (d.deficit_heat - f.amount).max(0.0);
        d.imported_heat += f.amount;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::geospatial::{pixel_balance, UnitKind};
    use crate::sizing::HpParams;

    fn rect(id: &str, x0: f64, y0: f64, x1: f64, y1: f64, cap: f64) -> Vertex {
        Vertex {
            id: id.into(),
            geometry: Polygon::rectangle(x0, y0, x1, y1).into(),
            capacity: cap,
        }
    }

    #[test]
    fn mbb_of_rectangle() {
        let r: MultiPolygon = Polygon::rectangle(0.0, 0.0, 10.0, 4.0).into();
        assert!((oriented_mbb_length(&r, BoxLength::LongerSide) - 10.0).abs() < 1e-12);
        assert!((oriented_mbb_length(&r, BoxLength::Diagonal) - 116f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn threshold_edges() {
        // zone 100 m long, threshold 20 m
        let zone = rect("z", 0.0, 0.0, 100.0, 50.0, 10.0);
        let inside = rect("a", 10.0, 10.0, 20.0, 20.0, 5.0);
        let near = rect("b", 115.0, 0.0, 130.0, 10.0, 5.0);
        let far = rect("c", 125.0, 60.0, 140.0, 80.0, 5.0);
        let g = build_graph(vec![inside, near, far], vec![zone], &ThresholdRule::default()).unwrap();
        assert_eq!(g.edges, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn nan_capacity_rejected() {
        let bad = rect("a", 0.0, 0.0, 1.0, 1.0, f64::NAN);
        assert!(build_graph(vec![bad], vec![], &ThresholdRule::default()).is_err());
    }

    #[test]
    fn components_include_singletons() {
        let g = AllocationGraph {
            sources: vec![rect("s1", 0., 0., 1., 1., 1.), rect("s2", 0., 0., 1., 1., 1.), rect("s3", 0., 0., 1., 1., 1.)],
            demands: vec![rect("d1", 0., 0., 1., 1., 1.)],
            edges: vec![(0, 0), (1, 0)],
            flows: vec![],
        };
        let c = connected_components(&g);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].sources.len(), c[0].demands.len()), (2, 1));
        assert_eq!(c[1].sources, vec![2]);
    }

    #[test]
    fn routable_supply() {
        let p = TransportProblem {
            supply: vec![10, 5],
            demand: vec![8, 9],
            edges: vec![(0, 0), (0, 1), (1, 1)],
        };
        let f = solve_transportation(&p).unwrap();
        assert_eq!(f.iter().sum::<u64>(), 15);
        assert_eq!(f, vec![8, 2, 5]);
    }

    #[test]
    fn demand_limited_edge() {
        let p = TransportProblem {
            supply: vec![10],
            demand: vec![3],
            edges: vec![(0, 0)],
        };
        assert_eq!(solve_transportation(&p).unwrap(), vec![3]);
    }

    #[test]
    fn unknown_vertex_rejected() {
        let p = TransportProblem {
            supply: vec![1],
            demand: vec![1],
            edges: vec![(0, 1)],
        };
        assert!(solve_transportation(&p).is_err());
    }

    #[test]
    fn allocation_conserves_energy() {
        let hp = HpParams::default();
        let mut accounts = BTreeMap::new();
        accounts.insert("s".to_string(), pixel_balance("s", UnitKind::Pixel, 0.0, 0.0, 350.0, 0.0, &hp).unwrap());
        accounts.insert("d".to_string(), pixel_balance("d", UnitKind::Dhc, 1000.0, 0.0, 0.0, 0.0, &hp).unwrap());
        let mut g = build_graph(
            vec![rect("s", 0.0, 0.0, 10.0, 10.0, accounts["s"].surplus_heat)],
            vec![rect("d", 10.0, 0.0, 30.0, 10.0, accounts["d"].deficit_heat)],
            &ThresholdRule::default(),
        )
        .unwrap();
        let before: f64 = accounts.values().map(|a| a.useful_heat).sum();
        let total = g.solve().unwrap();
        apply_allocation(&mut accounts, &g).unwrap();
        let after: f64 = accounts.values().map(|a| a.useful_heat).sum();
        assert_eq!(total, 450);
        assert_eq!(after - before, 450.0);
        assert_eq!(accounts["d"].deficit_heat, 550.0);
    }
}
