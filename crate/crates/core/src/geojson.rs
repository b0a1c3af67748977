//! GeoJSON rendering of zones and node demand.
//!
//! Zones become convex-hull polygons (or a point / line string when the
//! members are degenerate) and every node becomes a point carrying its
//! incident demand. Instances with a geographic anchor are emitted in
//! longitude/latitude; otherwise planar coordinates are written as-is.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, HullPolygon, Point};
use crate::ingest::unproject;
use crate::instance::{Instance, NodeId};

fn position(instance: &Instance, p: Point) -> Value {
    match instance.anchor() {
        Some(anchor) => {
            let ll = unproject(anchor, p);
            json!([ll.lon, ll.lat])
        }
        None => json!([p.x, p.y]),
    }
}

fn zone_geometry(instance: &Instance, members: &[NodeId]) -> Result<Value> {
    let points: Vec<Point> = members.iter().map(|v| instance.nodes()[v.index()].position).collect();
    Ok(match convex_hull(&points)? {
        HullPolygon::Point(p) => json!({"type": "Point", "coordinates": position(instance, p)}),
        HullPolygon::Segment(a, b) => {
            json!({"type": "LineString", "coordinates": [position(instance, a), position(instance, b)]})
        }
        HullPolygon::Polygon(ring) => {
            let mut coords: Vec<Value> = ring.iter().map(|&p| position(instance, p)).collect();
            coords.push(coords[0].clone());
            json!({"type": "Polygon", "coordinates": [coords]})
        }
    })
}

/// Demand with at least one endpoint at `v`, counting a self-pair once.
pub fn incident_demand(instance: &Instance, v: NodeId) -> f64 {
    instance.demand().iter().filter(|&(o, d, _)| o == v || d == v).map(|(_, _, x)| x).sum()
}

/// Builds a FeatureCollection with one feature per zone followed by one
/// point feature per node.
pub fn zones_to_geojson<Z: AsRef<[NodeId]>>(instance: &Instance, zones: &[Z]) -> Result<Value> {
    let n = instance.num_nodes();
    let mut features = Vec::with_capacity(zones.len() + n);
    for (k, zone) in zones.iter().enumerate() {
        let members = zone.as_ref();
        if members.is_empty() {
            return Err(Error::EmptyInput("zone"));
        }
        if let Some(v) = members.iter().find(|v| v.index() >= n) {
            return Err(Error::NodeOutOfRange { id: v.0, num_nodes: n });
        }
        features.push(json!({
            "type": "Feature",
            "geometry": zone_geometry(instance, members)?,
            "properties": {
                "kind": "zone",
                "zone": k,
                "members": members.iter().map(|v| v.0).collect::<Vec<_>>(),
                "demand_served": instance.served_demand(&[members]),
            }
        }));
    }
    for node in instance.nodes() {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": position(instance, node.position)},
            "properties": {
                "kind": "node",
                "id": node.id.0,
                "label": node.label,
                "incident_demand": incident_demand(instance, node.id),
            }
        }));
    }
    Ok(json!({"type": "FeatureCollection", "features": features}))
}
