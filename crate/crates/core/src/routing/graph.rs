//! Synthetic road graph with loopless k-shortest alternatives (Yen).

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{RouteProfile, RouteProvider, RouteSegment, RoutingError};
use crate::activity::CommuteMode;
use crate::geo::{haversine_m, LatLon};

/// Upper bound on alternatives returned per query.
pub const MAX_ALTERNATIVES: usize = 3;

/// Bound on extra equal-cost paths examined at the cut-off; a uniform
/// lattice has combinatorially many.
const TIE_EXPANSION_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphNode {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub duration_s: u32,
    /// Defaults to the great-circle distance between the endpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    /// Modes allowed on the edge; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<CommuteMode>>,
    #[serde(default)]
    pub oneway: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl RoadGraph {
    pub fn from_json(text: &str) -> Result<Self, RoutingError> {
        serde_json::from_str(text).map_err(|e| RoutingError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, RoutingError> {
        let text = std::fs::read_to_string(path).map_err(|e| RoutingError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    duration_s: u64,
    distance_m: f64,
}

/// Directed adjacency for one mode.
#[derive(Debug, Clone, Default)]
struct ModeGraph {
    out: Vec<Vec<Arc>>,
}

type NodePath = Vec<usize>;

impl ModeGraph {
    fn arc(&self, from: usize, to: usize) -> Option<&Arc> {
        self.out[from].iter().find(|a| a.to == to)
    }

    fn cost(&self, path: &[usize]) -> u64 {
        path.windows(2).map(|w| self.arc(w[0], w[1]).expect("path uses graph arcs").duration_s).sum()
    }

    /// Dijkstra avoiding banned nodes and arcs. Ties resolve towards the
    /// lower node index, so results are deterministic.
    fn shortest(
        &self,
        source: usize,
        target: usize,
        banned_nodes: &HashSet<usize>,
        banned_arcs: &HashSet<(usize, usize)>,
    ) -> Option<NodePath> {
        let n = self.out.len();
        let mut dist = vec![u64::MAX; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0;
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u == target {
                break;
            }
            for a in &self.out[u] {
                if banned_nodes.contains(&a.to) || banned_arcs.contains(&(u, a.to)) {
                    continue;
                }
                let nd = d + a.duration_s;
                if nd < dist[a.to] || (nd == dist[a.to] && u < prev[a.to]) {
                    if nd < dist[a.to] {
                        heap.push(Reverse((nd, a.to)));
                    }
                    dist[a.to] = nd;
                    prev[a.to] = u;
                }
            }
        }
        if dist[target] == u64::MAX {
            return None;
        }
        let mut path = vec![target];
        while *path.last().unwrap() != source {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }

    /// Yen's algorithm: the `k` cheapest loopless paths in cost order, plus
    /// any further paths tied with the k-th.
    fn k_shortest(&self, source: usize, target: usize, k: usize) -> Vec<(u64, NodePath)> {
        if k == 0 {
            return Vec::new();
        }
        let none_nodes = HashSet::new();
        let none_arcs = HashSet::new();
        let Some(first) = self.shortest(source, target, &none_nodes, &none_arcs) else {
            return Vec::new();
        };
        let mut accepted: Vec<(u64, NodePath)> = vec![(self.cost(&first), first)];
        let mut candidates: BTreeSet<(u64, NodePath)> = BTreeSet::new();
        loop {
            let last = accepted.last().unwrap().1.clone();
            for i in 0..last.len() - 1 {
                let spur = last[i];
                let root = &last[..=i];
                let banned_arcs: HashSet<(usize, usize)> = accepted
                    .iter()
                    .filter(|(_, p)| p.len() > i + 1 && &p[..=i] == root)
                    .map(|(_, p)| (p[i], p[i + 1]))
                    .collect();
                let banned_nodes: HashSet<usize> = root[..i].iter().copied().collect();
                if let Some(tail) = self.shortest(spur, target, &banned_nodes, &banned_arcs) {
                    let mut path = root[..i].to_vec();
                    path.extend(tail);
                    let entry = (self.cost(&path), path);
                    if !accepted.iter().any(|(_, p)| *p == entry.1) {
                        candidates.insert(entry);
                    }
                }
            }
            // Past k, keep taking paths tied with the k-th so the caller can
            // break the tie by route id rather than by discovery order.
            let take = match (candidates.first(), accepted.len() >= k) {
                (None, _) => false,
                (Some(_), false) => true,
                (Some((cost, _)), true) => *cost == accepted[k - 1].0 && accepted.len() < k + TIE_EXPANSION_LIMIT,
            };
            if !take {
                break;
            }
            accepted.push(candidates.pop_first().expect("checked non-empty"));
        }
        accepted
    }
}

/// Route provider over an in-memory road graph. Durations do not depend on
/// departure time.
#[derive(Debug, Clone)]
pub struct GraphProvider {
    ids: Vec<String>,
    positions: Vec<LatLon>,
    index: HashMap<String, usize>,
    modes: HashMap<CommuteMode, ModeGraph>,
}

impl GraphProvider {
    pub fn new(graph: RoadGraph) -> Result<Self, RoutingError> {
        let mut index = HashMap::new();
        let mut ids = Vec::new();
        let mut positions = Vec::new();
        for node in &graph.nodes {
            let pos = LatLon::new(node.lat, node.lon);
            if !pos.is_valid() {
                return Err(RoutingError::Invalid(format!("node {:?} has invalid coordinates", node.id)));
            }
            if index.insert(node.id.clone(), ids.len()).is_some() {
                return Err(RoutingError::Invalid(format!("duplicate node id {:?}", node.id)));
            }
            ids.push(node.id.clone());
            positions.push(pos);
        }
        let mut modes: HashMap<CommuteMode, ModeGraph> = HashMap::new();
        for e in &graph.edges {
            let lookup = |id: &str| index.get(id).copied().ok_or_else(|| RoutingError::UnknownPlace(id.to_string()));
            let (u, v) = (lookup(&e.from)?, lookup(&e.to)?);
            if u == v {
                return Err(RoutingError::Invalid(format!("self-loop at {:?}", e.from)));
            }
            if e.duration_s == 0 {
                return Err(RoutingError::Invalid(format!("edge {} -> {} has zero duration", e.from, e.to)));
            }
            let distance_m = e.distance_m.unwrap_or_else(|| haversine_m(positions[u], positions[v]));
            if !(distance_m.is_finite() && distance_m >= 0.0) {
                return Err(RoutingError::Invalid(format!("edge {} -> {} has invalid distance", e.from, e.to)));
            }
            let allowed = e.modes.clone().unwrap_or_else(|| CommuteMode::ALL.to_vec());
            for mode in allowed {
                let g = modes.entry(mode).or_insert_with(|| ModeGraph { out: vec![Vec::new(); ids.len()] });
                let mut add = |from: usize, to: usize| {
                    if g.arc(from, to).is_some() {
                        return Err(RoutingError::Invalid(format!(
                            "parallel edge {} -> {} for {mode}",
                            ids[from], ids[to]
                        )));
                    }
                    g.out[from].push(Arc { to, duration_s: u64::from(e.duration_s), distance_m });
                    Ok(())
                };
                add(u, v)?;
                if !e.oneway {
                    add(v, u)?;
                }
            }
        }
        Ok(Self { ids, positions, index, modes })
    }

    pub fn position(&self, id: &str) -> Option<LatLon> {
        self.index.get(id).map(|&i| self.positions[i])
    }

    fn to_profile(&self, g: &ModeGraph, mode: CommuteMode, path: &[usize]) -> RouteProfile {
        let segments = path
            .windows(2)
            .map(|w| {
                let arc = g.arc(w[0], w[1]).expect("path uses graph arcs");
                RouteSegment {
                    duration_s: arc.duration_s as u32,
                    distance_m: arc.distance_m,
                    polyline: vec![self.positions[w[0]], self.positions[w[1]]],
                }
            })
            .collect();
        let id = path.iter().map(|&i| self.ids[i].as_str()).collect::<Vec<_>>().join(">");
        RouteProfile::new(id, mode, segments).expect("graph paths form valid routes")
    }
}

impl RouteProvider for GraphProvider {
    fn get_routes(
        &self,
        origin: &str,
        dest: &str,
        mode: CommuteMode,
        _departure: NaiveDateTime,
    ) -> Result<Vec<RouteProfile>, RoutingError> {
        if origin == dest {
            return Err(RoutingError::SameEndpoints(origin.to_string()));
        }
        let lookup = |id: &str| self.index.get(id).copied().ok_or_else(|| RoutingError::UnknownPlace(id.to_string()));
        let (s, t) = (lookup(origin)?, lookup(dest)?);
        let g = self.modes.get(&mode).ok_or(RoutingError::UnsupportedMode(mode))?;
        let mut routes: Vec<RouteProfile> =
            g.k_shortest(s, t, MAX_ALTERNATIVES).iter().map(|(_, p)| self.to_profile(g, mode, p)).collect();
        if routes.is_empty() {
            return Err(RoutingError::NoRoute { origin: origin.into(), dest: dest.into(), mode });
        }
        routes.sort_by(|a, b| a.total_duration_s.cmp(&b.total_duration_s).then_with(|| a.route_id.cmp(&b.route_id)));
        routes.truncate(MAX_ALTERNATIVES);
        Ok(routes)
    }

    fn departure_key(&self, _departure: NaiveDateTime) -> i64 {
        0
    }
}
