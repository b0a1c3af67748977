//! Real-world trip pipeline: CSV trip records are geofenced, walkable trips
//! are dropped, endpoints are binned into a flat-top hexagonal grid over a
//! local azimuthal-equidistant projection, and an optional externally computed
//! travel-time matrix is attached.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::instance::{DemandTable, DistanceMatrix, Edge, Instance, Node, NodeId};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
pub const DEFAULT_MIN_TRIP_M: f64 = 500.0;
pub const DEFAULT_HEX_RADIUS_M: f64 = 1220.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite() && self.lon.is_finite() && self.lat.abs() <= 90.0 && self.lon.abs() <= 180.0
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub origin: LatLon,
    pub dest: LatLon,
    pub count: f64,
}

impl TripRecord {
    pub fn new(origin: LatLon, dest: LatLon, count: f64) -> Result<Self> {
        if !origin.is_valid() || !dest.is_valid() {
            return Err(Error::InvalidParameter("trip coordinates out of range".into()));
        }
        if !(count.is_finite() && count > 0.0) {
            return Err(Error::InvalidParameter(format!("trip count must be > 0, got {count}")));
        }
        Ok(TripRecord { origin, dest, count })
    }

    pub fn length_m(&self) -> f64 {
        haversine(self.origin, self.dest)
    }
}

/// Rows skipped while reading a trip file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RejectReport {
    pub rows_read: usize,
    /// `(line number, reason)`, line numbers 1-based including the header.
    pub rejected: Vec<(usize, String)>,
}

impl RejectReport {
    pub fn count(&self) -> usize {
        self.rejected.len()
    }
}

/// Reads trips from CSV with header `origin_lat,origin_lon,dest_lat,dest_lon[,count]`.
/// Unparseable or out-of-range rows are skipped and reported.
pub fn read_trips_csv<R: Read>(reader: R) -> Result<(Vec<TripRecord>, RejectReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(["origin_lat", "origin_lon", "dest_lat", "dest_lon"]) {
        *slot = column(name).ok_or_else(|| Error::Parse(format!("trip file is missing column '{name}'")))?;
    }
    let count_col = column("count");

    let mut trips = Vec::new();
    let mut report = RejectReport::default();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push((line, e.to_string()));
                continue;
            }
        };
        let field = |i: usize| -> std::result::Result<f64, String> {
            let raw = record.get(i).ok_or_else(|| format!("missing field {i}"))?;
            raw.parse::<f64>().map_err(|_| format!("cannot parse '{raw}'"))
        };
        let parsed = (|| {
            let v = [field(cols[0])?, field(cols[1])?, field(cols[2])?, field(cols[3])?];
            let count = match count_col {
                Some(c) if record.get(c).is_some_and(|s| !s.is_empty()) => field(c)?,
                _ => 1.0,
            };
            TripRecord::new(LatLon::new(v[0], v[1]), LatLon::new(v[2], v[3]), count).map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(t) => trips.push(t),
            Err(reason) => report.rejected.push((line, reason)),
        }
    }
    if report.count() > 0 {
        log::warn!("ingest: rejected {} of {} trip rows", report.count(), report.rows_read);
    }
    Ok((trips, report))
}

/// Simple polygon in lon/lat with optional holes. Containment treats
/// coordinates as planar, which is adequate at city scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Boundary {
    /// Outer ring first, then holes; rings are stored without the closing vertex.
    rings: Vec<Vec<LatLon>>,
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| {
        let v = crate::geometry::cross(p, q, r);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let on_segment = |p: Point, q: Point, r: Point| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

fn planar(p: LatLon) -> Point {
    Point::new(p.lon, p.lat)
}

impl Boundary {
    /// Builds a boundary from rings of `(lat, lon)` vertices. A repeated
    /// closing vertex is accepted and dropped.
    pub fn new(rings: Vec<Vec<LatLon>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::EmptyInput("boundary polygon"));
        }
        let mut clean = Vec::with_capacity(rings.len());
        for mut ring in rings {
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            if ring.len() < 3 {
                return Err(Error::InvalidParameter("boundary ring needs at least 3 vertices".into()));
            }
            if ring.iter().any(|p| !p.is_valid()) {
                return Err(Error::InvalidParameter("boundary coordinate out of range".into()));
            }
            check_simple(&ring)?;
            clean.push(ring);
        }
        Ok(Boundary { rings: clean })
    }

    /// Accepts a GeoJSON Polygon geometry, a Feature wrapping one, or a
    /// FeatureCollection whose first feature is one.
    pub fn from_geojson(value: &serde_json::Value) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("boundary GeoJSON: {msg}"));
        let geometry = match value.get("type").and_then(|t| t.as_str()) {
            Some("Polygon") => value,
            Some("Feature") => value.get("geometry").ok_or_else(|| bad("feature without geometry"))?,
            Some("FeatureCollection") => value
                .get("features")
                .and_then(|f| f.get(0))
                .and_then(|f| f.get("geometry"))
                .ok_or_else(|| bad("empty feature collection"))?,
            _ => return Err(bad("expected Polygon, Feature or FeatureCollection")),
        };
        if geometry.get("type").and_then(|t| t.as_str()) != Some("Polygon") {
            return Err(bad("geometry is not a Polygon"));
        }
        let rings = geometry.get("coordinates").and_then(|c| c.as_array()).ok_or_else(|| bad("missing coordinates"))?;
        let mut out = Vec::with_capacity(rings.len());
        for ring in rings {
            let ring = ring.as_array().ok_or_else(|| bad("ring is not an array"))?;
            let mut pts = Vec::with_capacity(ring.len());
            for pos in ring {
                let lon = pos.get(0).and_then(|v| v.as_f64());
                let lat = pos.get(1).and_then(|v| v.as_f64());
                match (lon, lat) {
                    (Some(lon), Some(lat)) => pts.push(LatLon::new(lat, lon)),
                    _ => return Err(bad("position is not [lon, lat]")),
                }
            }
            out.push(pts);
        }
        Boundary::new(out)
    }

    pub fn rings(&self) -> &[Vec<LatLon>] {
        &self.rings
    }

    /// Boundary-inclusive point-in-polygon test (points on the outer ring or
    /// on a hole's ring count as inside).
    pub fn contains(&self, p: LatLon) -> bool {
        let q = planar(p);
        let mut inside = false;
        for ring in &self.rings {
            for k in 0..ring.len() {
                let a = planar(ring[k]);
                let b = planar(ring[(k + 1) % ring.len()]);
                if crate::geometry::cross(a, b, q) == 0.0
                    && q.x >= a.x.min(b.x)
                    && q.x <= a.x.max(b.x)
                    && q.y >= a.y.min(b.y)
                    && q.y <= a.y.max(b.y)
                {
                    return true;
                }
                if (a.y > q.y) != (b.y > q.y) && q.x < a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y) {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Mean of the outer ring's vertices.
    pub fn center(&self) -> LatLon {
        let ring = &self.rings[0];
        let k = ring.len() as f64;
        LatLon::new(ring.iter().map(|p| p.lat).sum::<f64>() / k, ring.iter().map(|p| p.lon).sum::<f64>() / k)
    }
}

fn check_simple(ring: &[LatLon]) -> Result<()> {
    let n = ring.len();
    let seg = |k: usize| (planar(ring[k]), planar(ring[(k + 1) % n]));
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_intersect(a, b, c, d) {
                return Err(Error::SelfIntersectingBoundary(i, j));
            }
        }
    }
    Ok(())
}

/// Keeps trips whose origin and destination both lie inside or on the boundary.
pub fn geofence_filter(trips: &[TripRecord], boundary: &Boundary) -> Vec<TripRecord> {
    trips.iter().filter(|t| boundary.contains(t.origin) && boundary.contains(t.dest)).copied().collect()
}

/// Drops trips shorter than `min_distance_m`; a trip of exactly that length is kept.
pub fn short_trip_filter(trips: &[TripRecord], min_distance_m: f64) -> Vec<TripRecord> {
    trips.iter().filter(|t| t.length_m() >= min_distance_m).copied().collect()
}

/// Axial coordinates of a flat-top hexagon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HexCell {
    pub q: i64,
    pub r: i64,
}

impl HexCell {
    pub fn label(&self) -> String {
        format!("hex:{}:{}", self.q, self.r)
    }

    pub fn neighbors(&self) -> [HexCell; 6] {
        const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
        DIRS.map(|(dq, dr)| HexCell { q: self.q + dq, r: self.r + dr })
    }
}

/// Flat-top hexagonal grid laid over the azimuthal-equidistant plane centred
/// on `anchor`. Planar coordinates are meters east (`x`) and north (`y`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexGrid {
    pub anchor: LatLon,
    pub circumradius: f64,
}

impl HexGrid {
    pub fn new(anchor: LatLon, circumradius: f64) -> Result<Self> {
        if !anchor.is_valid() {
            return Err(Error::InvalidParameter("hex grid anchor out of range".into()));
        }
        if !(circumradius.is_finite() && circumradius > 0.0) {
            return Err(Error::InvalidParameter(format!("hex circumradius must be > 0, got {circumradius}")));
        }
        Ok(HexGrid { anchor, circumradius })
    }

    pub fn project(&self, p: LatLon) -> Point {
        project(self.anchor, p)
    }

    pub fn unproject(&self, p: Point) -> LatLon {
        unproject(self.anchor, p)
    }

    pub fn cell_of_point(&self, p: Point) -> HexCell {
        let s = self.circumradius;
        let q = (2.0 / 3.0 * p.x) / s;
        let r = (-p.x / 3.0 + 3f64.sqrt() / 3.0 * p.y) / s;
        cube_round(q, r)
    }

    pub fn cell_of(&self, p: LatLon) -> HexCell {
        self.cell_of_point(self.project(p))
    }

    pub fn center(&self, cell: HexCell) -> Point {
        let s = self.circumradius;
        let (q, r) = (cell.q as f64, cell.r as f64);
        Point::new(s * 1.5 * q, s * 3f64.sqrt() * (r + q / 2.0))
    }
}

fn cube_round(q: f64, r: f64) -> HexCell {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    HexCell { q: rq as i64, r: rr as i64 }
}

/// Spherical azimuthal-equidistant projection about `anchor`, in meters.
pub fn project(anchor: LatLon, p: LatLon) -> Point {
    let (p0, l0) = (anchor.lat.to_radians(), anchor.lon.to_radians());
    let (p1, l1) = (p.lat.to_radians(), p.lon.to_radians());
    let dl = l1 - l0;
    let cos_c = (p0.sin() * p1.sin() + p0.cos() * p1.cos() * dl.cos()).clamp(-1.0, 1.0);
    let c = cos_c.acos();
    let k = if c < 1e-12 { 1.0 } else { c / c.sin() };
    Point::new(
        EARTH_RADIUS_M * k * p1.cos() * dl.sin(),
        EARTH_RADIUS_M * k * (p0.cos() * p1.sin() - p0.sin() * p1.cos() * dl.cos()),
    )
}

/// Inverse of [`project`].
pub fn unproject(anchor: LatLon, p: Point) -> LatLon {
    let (p0, l0) = (anchor.lat.to_radians(), anchor.lon.to_radians());
    let rho = p.x.hypot(p.y);
    if rho < 1e-9 {
        return anchor;
    }
    let c = rho / EARTH_RADIUS_M;
    let lat = (c.cos() * p0.sin() + p.y * c.sin() * p0.cos() / rho).clamp(-1.0, 1.0).asin();
    let lon = l0 + (p.x * c.sin()).atan2(rho * p0.cos() * c.cos() - p.y * p0.sin() * c.sin());
    let mut lon = lon.to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    LatLon::new(lat.to_degrees(), lon)
}

/// Binned trips: one node per non-empty cell, ordered by `(q, r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HexAggregation {
    pub cells: Vec<HexCell>,
    pub nodes: Vec<Node>,
    pub demand: DemandTable,
}

pub fn hex_aggregate(trips: &[TripRecord], grid: &HexGrid) -> HexAggregation {
    let mut flows: BTreeMap<(HexCell, HexCell), f64> = BTreeMap::new();
    let mut cells = BTreeSet::new();
    for t in trips {
        let (a, b) = (grid.cell_of(t.origin), grid.cell_of(t.dest));
        cells.insert(a);
        cells.insert(b);
        *flows.entry((a, b)).or_insert(0.0) += t.count;
    }
    let cells: Vec<HexCell> = cells.into_iter().collect();
    let index: BTreeMap<HexCell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let nodes = cells
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let p = grid.center(c);
            Node { id: NodeId::from_index(i), position: p, label: Some(c.label()) }
        })
        .collect();
    let mut demand = DemandTable::new();
    for ((a, b), v) in flows {
        demand
            .add(NodeId::from_index(index[&a]), NodeId::from_index(index[&b]), v)
            .expect("trip counts are positive and finite");
    }
    HexAggregation { cells, nodes, demand }
}

/// Arcs in both directions between neighbouring non-empty cells, weighted by
/// center-to-center distance.
pub fn hex_adjacency_edges(cells: &[HexCell], grid: &HexGrid) -> Vec<Edge> {
    let index: BTreeMap<HexCell, usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut edges = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        for nb in c.neighbors() {
            if let Some(&j) = index.get(&nb) {
                edges.push(Edge::new(i, j, grid.center(*c).distance(&grid.center(nb))));
            }
        }
    }
    edges
}

/// Reads a dense row-major CSV distance matrix (no header). Empty cells are
/// unreachable; a nonzero diagonal is forced to zero with a warning.
pub fn load_distance_matrix<R: Read>(reader: R, num_nodes: usize) -> Result<DistanceMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::with_capacity(num_nodes);
    for record in rdr.records() {
        let record = record?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let row = record
            .iter()
            .map(|cell| {
                if cell.is_empty() || cell.eq_ignore_ascii_case("null") {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| Error::Parse(format!("bad matrix entry '{cell}'")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != num_nodes {
        return Err(Error::DimensionMismatch { expected: num_nodes, found: rows.len() });
    }
    let (matrix, fixed) = DistanceMatrix::from_rows_lenient(rows)?;
    for i in fixed {
        log::warn!("distance matrix: diagonal entry ({i},{i}) forced to 0");
    }
    Ok(matrix)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    pub boundary: Option<Boundary>,
    pub min_trip_m: f64,
    pub circumradius: f64,
    /// Projection anchor; defaults to the boundary center, else the mean trip endpoint.
    pub anchor: Option<LatLon>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { boundary: None, min_trip_m: DEFAULT_MIN_TRIP_M, circumradius: DEFAULT_HEX_RADIUS_M, anchor: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOutput {
    pub grid: HexGrid,
    pub aggregation: HexAggregation,
    pub trips_in: usize,
    pub trips_kept: usize,
}

/// Filters and bins trips.
pub fn ingest_trips(trips: &[TripRecord], options: &IngestOptions) -> Result<IngestOutput> {
    let fenced = match &options.boundary {
        Some(b) => geofence_filter(trips, b),
        None => trips.to_vec(),
    };
    let kept = short_trip_filter(&fenced, options.min_trip_m);
    if kept.is_empty() {
        return Err(Error::EmptyInput("no trips survive filtering"));
    }
    let anchor = match (options.anchor, &options.boundary) {
        (Some(a), _) => a,
        (None, Some(b)) => b.center(),
        (None, None) => {
            let k = 2.0 * kept.len() as f64;
            LatLon::new(
                kept.iter().map(|t| t.origin.lat + t.dest.lat).sum::<f64>() / k,
                kept.iter().map(|t| t.origin.lon + t.dest.lon).sum::<f64>() / k,
            )
        }
    };
    let grid = HexGrid::new(anchor, options.circumradius)?;
    let aggregation = hex_aggregate(&kept, &grid);
    log::info!(
        "ingest: {} trips, {} after filtering, {} cells",
        trips.len(),
        kept.len(),
        aggregation.cells.len()
    );
    Ok(IngestOutput { grid, aggregation, trips_in: trips.len(), trips_kept: kept.len() })
}

impl IngestOutput {
    /// Instance over the hex nodes with adjacency arcs. Positions are planar
    /// meters; with a supplied matrix distances come from it and units become seconds.
    pub fn into_instance(
        self,
        distances: Option<DistanceMatrix>,
        max_diameter: f64,
        num_zones: usize,
    ) -> Result<Instance> {
        let edges = hex_adjacency_edges(&self.aggregation.cells, &self.grid);
        let inst = Instance::new(self.aggregation.nodes, edges, self.aggregation.demand, "m", max_diameter, num_zones)?
            .with_anchor(self.grid.anchor);
        match distances {
            Some(m) => Ok(inst.with_distances(m)?.with_units("s")),
            None => Ok(inst),
        }
    }
}
