//! Marching squares.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::griddef::DomainSpec;
use crate::scalar::{Grid, Scalar};

/// Grid edge crossed by a contour. `H(i, j)` joins `(i, j)`–`(i+1, j)`,
/// `V(i, j)` joins `(i, j)`–`(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    H(usize, usize),
    V(usize, usize),
}

impl Edge {
    pub fn ends(self) -> ((usize, usize), (usize, usize)) {
        match self {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        }
    }

    pub fn on_boundary(self, nx: usize, ny: usize) -> bool {
        match self {
            Edge::H(_, j) => j == 0 || j == ny - 1,
            Edge::V(i, _) => i == 0 || i == nx - 1,
        }
    }
}

/// Polyline in fractional grid coordinates `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPolyline<T> {
    pub closed: bool,
    pub edges: Vec<Edge>,
    pub points: Vec<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridContours<T> {
    pub level: T,
    pub polylines: Vec<GridPolyline<T>>,
}

/// Where `level` crosses `edge`, by linear interpolation.
pub fn edge_vertex<T: Scalar>(grid: &Grid<T>, edge: Edge, level: T) -> (T, T) {
    let ((ia, ja), (ib, jb)) = edge.ends();
    let (va, vb) = (grid.get(ia, ja), grid.get(ib, jb));
    let s = (level - va) / (vb - va);
    let lerp = |a: usize, b: usize| T::of(a as f64) + s * T::of(b as f64 - a as f64);
    (lerp(ia, ib), lerp(ja, jb))
}

/// Segments of one cell as pairs of crossed edges. A vertex is inside when
/// its value is `>= level`; saddles follow the cell-center average.
fn cell_segments<T: Scalar>(g: &Grid<T>, i: usize, j: usize, level: T) -> Vec<(Edge, Edge)> {
    let v = [g.get(i, j), g.get(i + 1, j), g.get(i + 1, j + 1), g.get(i, j + 1)];
    let inside = v.map(|x| x >= level);
    let bottom = Edge::H(i, j);
    let right = Edge::V(i + 1, j);
    let top = Edge::H(i, j + 1);
    let left = Edge::V(i, j);
    // Edges around corner k, in the order (incoming, outgoing).
    let corner = [(left, bottom), (bottom, right), (right, top), (top, left)];
    let crossed: Vec<Edge> = [(0, 1, bottom), (1, 2, right), (3, 2, top), (0, 3, left)]
        .into_iter()
        .filter(|(a, b, _)| inside[*a] != inside[*b])
        .map(|(_, _, e)| e)
        .collect();
    match crossed.len() {
        0 => vec![],
        2 => vec![(crossed[0], crossed[1])],
        _ => {
            let center = (v[0] + v[1] + v[2] + v[3]) / T::of(4.0) >= level;
            (0..4).filter(|k| inside[*k] != center).map(|k| corner[k]).collect()
        }
    }
}

fn chain<T: Scalar>(grid: &Grid<T>, level: T, segments: Vec<(Edge, Edge)>) -> Vec<GridPolyline<T>> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let walk = |start_edge: Edge, start_seg: usize, used: &mut Vec<bool>| -> Vec<Edge> {
        let mut edges = vec![start_edge];
        let mut cur_edge = start_edge;
        let mut seg = Some(start_seg);
        while let Some(s) = seg {
            used[s] = true;
            let (a, b) = segments[s];
            let next = if a == cur_edge { b } else { a };
            edges.push(next);
            cur_edge = next;
            seg = adj[&next].iter().copied().find(|k| !used[*k]);
        }
        edges
    };

    // Open lines start at edges used by a single segment, which lie on the
    // grid boundary. Sorted so output order is deterministic.
    let mut ends: Vec<Edge> = adj.iter().filter(|(_, s)| s.len() == 1).map(|(e, _)| *e).collect();
    ends.sort();
    for e in ends {
        let s = adj[&e][0];
        if used[s] {
            continue;
        }
        let edges = walk(e, s, &mut used);
        out.push((false, edges));
    }
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let edges = walk(segments[s].0, s, &mut used);
        out.push((true, edges));
    }
    out.into_iter()
        .map(|(closed, edges)| GridPolyline {
            closed,
            points: edges.iter().map(|e| edge_vertex(grid, *e, level)).collect(),
            edges,
        })
        .collect()
}

/// Contour lines of `grid` at each level, in grid coordinates.
pub fn contour_grid<T: Scalar>(grid: &Grid<T>, levels: &[T]) -> Vec<GridContours<T>> {
    levels
        .iter()
        .map(|&level| {
            let mut segments = Vec::new();
            if grid.nx >= 2 && grid.ny >= 2 {
                for j in 0..grid.ny - 1 {
                    for i in 0..grid.nx - 1 {
                        segments.extend(cell_segments(grid, i, j, level));
                    }
                }
            }
            GridContours {
                level,
                polylines: chain(grid, level, segments),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub closed: bool,
    /// `(lon, lat)` vertices.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

/// Contours of a domain grid with vertices in longitude/latitude.
pub fn contours(grid: &Grid<f64>, domain: &DomainSpec, levels: &[f64]) -> Vec<ContourSet> {
    contour_grid(grid, levels)
        .into_iter()
        .map(|c| ContourSet {
            level: c.level,
            polylines: c
                .polylines
                .into_iter()
                .map(|p| Polyline {
                    closed: p.closed,
                    points: p.points.into_iter().map(|(fi, fj)| domain.frac_to_lonlat(fi, fj)).collect(),
                })
                .collect(),
        })
        .collect()
}

/// GeoJSON feature collection with one `LineString` per polyline.
pub fn to_geojson(sets: &[ContourSet]) -> Value {
    let features: Vec<Value> = sets
        .iter()
        .flat_map(|s| {
            s.polylines.iter().map(move |p| {
                json!({
                    "type": "Feature",
                    "properties": { "level": s.level, "closed": p.closed },
                    "geometry": {
                        "type": "LineString",
                        "coordinates": p.points.iter().map(|(x, y)| [*x, *y]).collect::<Vec<_>>(),
                    },
                })
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Edges of `grid` whose end values straddle `level`, keyed by edge. The
/// reference for checking [`contour_grid`] output.
pub fn crossed_edges<T: Scalar>(grid: &Grid<T>, level: T) -> BTreeMap<Edge, (T, T)> {
    let mut out = BTreeMap::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let here = grid.get(i, j) >= level;
            if i + 1 < grid.nx && (grid.get(i + 1, j) >= level) != here {
                out.insert(Edge::H(i, j), (grid.get(i, j), grid.get(i + 1, j)));
            }
            if j + 1 < grid.ny && (grid.get(i, j + 1) >= level) != here {
                out.insert(Edge::V(i, j), (grid.get(i, j), grid.get(i, j + 1)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_field() {
        let g = Grid::from_fn(10, 10, |i, _| i as f64);
        let c = contour_grid(&g, &[4.5]);
        assert_eq!(c[0].polylines.len(), 1);
        let p = &c[0].polylines[0];
        assert!(!p.closed);
        assert_eq!(p.points.len(), 10);
        for (fi, _) in &p.points {
            assert!((fi - 4.5).abs() < 1e-12);
        }
        let js: Vec<f64> = p.points.iter().map(|q| q.1).collect();
        assert!(js == (0..10).map(|j| j as f64).collect::<Vec<_>>() || js == (0..10).rev().map(|j| j as f64).collect::<Vec<_>>());
    }

    #[test]
    fn level_outside_range() {
        let g = Grid::from_fn(6, 6, |i, j| (i * j) as f32);
        assert!(contour_grid(&g, &[-1.0])[0].polylines.is_empty());
        assert!(contour_grid(&g, &[100.0])[0].polylines.is_empty());
    }

    #[test]
    fn bump_is_closed() {
        let g = Grid::from_fn(9, 9, |i, j| {
            let (x, y) = (i as f64 - 4.0, j as f64 - 4.0);
            (-(x * x + y * y) / 6.0).exp()
        });
        let c = contour_grid(&g, &[0.5]);
        assert_eq!(c[0].polylines.len(), 1);
        let p = &c[0].polylines[0];
        assert!(p.closed);
        assert_eq!(p.edges.first(), p.edges.last());
    }

    #[test]
    fn saddle_follows_center() {
        // Diagonal highs: center avg 0.5 >= 0.5 joins them.
        let g = Grid::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = contour_grid(&g, &[0.5]);
        assert_eq!(c[0].polylines.len(), 2);
        let cut: Vec<Vec<Edge>> = c[0].polylines.iter().map(|p| p.edges.clone()).collect();
        assert!(cut.contains(&vec![Edge::H(0, 0), Edge::V(1, 0)]));
        assert!(cut.contains(&vec![Edge::H(0, 1), Edge::V(0, 0)]) || cut.contains(&vec![Edge::V(0, 0), Edge::H(0, 1)]));
        // Raised level: center avg 0.5 < 0.6 isolates the highs.
        let c = contour_grid(&g, &[0.6]);
        let cut: Vec<Vec<Edge>> = c[0].polylines.iter().map(|p| p.edges.clone()).collect();
        assert!(cut.contains(&vec![Edge::H(0, 0), Edge::V(0, 0)]) || cut.contains(&vec![Edge::V(0, 0), Edge::H(0, 0)]));
    }

    #[test]
    fn geojson_shape() {
        let d = DomainSpec::root(18_000.0, -43.0, -22.8, 10, 10);
        let g = Grid::from_fn(10, 10, |i, _| i as f64);
        let gj = to_geojson(&contours(&g, &d, &[4.5]));
        assert_eq!(gj["features"].as_array().unwrap().len(), 1);
        let coords = gj["features"][0]["geometry"]["coordinates"].as_array().unwrap();
        assert_eq!(coords.len(), 10);
        let lon = d.frac_to_lonlat(4.5, 0.0).0;
        assert!((coords[0][0].as_f64().unwrap() - lon).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn lines_match_cell_oracle(
            nx in 2usize..14, ny in 2usize..14,
            values in prop::collection::vec(-10.0f64..10.0, 196),
            level in -8.0f64..8.0,
        ) {
            let g = Grid::from_fn(nx, ny, |i, j| values[j * 14 + i]);
            let c = contour_grid(&g, &[level]);
            let oracle = crossed_edges(&g, level);
            let mut seen: BTreeMap<Edge, usize> = BTreeMap::new();
            for p in &c[0].polylines {
                let n = p.edges.len();
                prop_assert_eq!(p.points.len(), n);
                if p.closed {
                    prop_assert_eq!(p.edges[0], p.edges[n - 1]);
                } else {
                    prop_assert!(p.edges[0].on_boundary(nx, ny));
                    prop_assert!(p.edges[n - 1].on_boundary(nx, ny));
                }
                let body = if p.closed { &p.edges[..n - 1] } else { &p.edges[..] };
                for (e, (fi, fj)) in body.iter().zip(&p.points) {
                    *seen.entry(*e).or_default() += 1;
                    let ((ia, ja), _) = e.ends();
                    let (va, vb) = oracle[e];
                    let s = match e { Edge::H(..) => fi - ia as f64, Edge::V(..) => fj - ja as f64 };
                    prop_assert!((0.0..=1.0).contains(&s));
                    prop_assert!((va + s * (vb - va) - level).abs() < 1e-6);
                }
            }
            prop_assert_eq!(seen.keys().copied().collect::<Vec<_>>(), oracle.keys().copied().collect::<Vec<_>>());
            prop_assert!(seen.values().all(|&k| k == 1));
        }
    }
}
