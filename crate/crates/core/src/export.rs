//! Byte-stable file renderings of query payloads, shared by the HTTP API
//! (`?format=csv`) and the CLI exporter.

use serde::Serialize;

use crate::analytics::{HeatMatrix, ScenarioMatrix};
use crate::service::{ProjectionPayload, SeriesPayload};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory csv writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Wire name of a unit-like serde enum value.
fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

/// Compact JSON, identical to the API response body.
pub fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("payloads serialize")
}

/// `hour,value` rows.
pub fn series_csv(p: &SeriesPayload) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hour", "value"]).unwrap();
    for (h, v) in p.hours.iter().zip(&p.values) {
        w.write_record([h.to_string(), v.to_string()]).unwrap();
    }
    finish(w)
}

/// One row per member, one column per hour.
pub fn heatmatrix_csv(m: &HeatMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["run_id".to_string()];
    head.extend(m.hours.iter().map(|h| format!("h{h}")));
    w.write_record(&head).unwrap();
    for (run, row) in m.members.iter().zip(&m.values) {
        let mut rec = vec![run.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).unwrap();
    }
    finish(w)
}

/// Member × hour flags as 0/1.
pub fn scenario_matrix_csv(m: &ScenarioMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["run_id".to_string()];
    head.extend(m.hours.iter().map(|h| format!("h{h}")));
    w.write_record(&head).unwrap();
    for (run, row) in m.members.iter().zip(&m.cells) {
        let mut rec = vec![run.to_string()];
        rec.extend(row.iter().map(|&b| u8::from(b).to_string()));
        w.write_record(&rec).unwrap();
    }
    finish(w)
}

pub fn projection_csv(p: &ProjectionPayload) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head: Vec<String> = [
        "run_id",
        "name",
        "x",
        "y",
        "status",
        "icbc_source",
        "microphysics",
        "cumulus",
        "land_surface",
        "surface_layer",
        "pbl",
        "ensembles",
        "hours_ingested",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    head.extend(p.feature_names.iter().cloned());
    w.write_record(&head).unwrap();
    for pt in &p.points {
        let ph = &pt.physics;
        let mut rec = vec![
            pt.run_id.to_string(),
            pt.name.clone(),
            pt.x.to_string(),
            pt.y.to_string(),
            tag(&pt.status),
            tag(&pt.icbc_source),
            tag(&ph.microphysics),
            tag(&ph.cumulus),
            tag(&ph.land_surface),
            tag(&ph.surface_layer),
            tag(&ph.pbl),
            pt.ensembles.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"),
            pt.hours_ingested.to_string(),
        ];
        rec.extend(pt.features.iter().map(|v| v.to_string()));
        w.write_record(&rec).unwrap();
    }
    finish(w)
}
