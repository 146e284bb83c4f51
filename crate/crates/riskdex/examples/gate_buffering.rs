//! Gate buffering: every region whose boundary or interior falls within a
//! gate's great-circle buffer receives that gate's full arrival count.
//!
//! ```text
//! cargo run --example gate_buffering
//! ```

use std::path::Path;

use riskdex::geo::{distance_to_region_km, LatLon};
use riskdex::ingest::{assign_gate_arrivals, load_gates, load_regions};

fn main() -> riskdex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let regions = load_regions(&fixtures.join("regions.geojson"))?;
    let gates = load_gates(&fixtures.join("gates.csv"))?;

    for gate in &gates {
        println!(
            "gate {:<9} at ({:.2}, {:.2}), {} arrivals, buffer {} km",
            gate.gate_id, gate.location.lat, gate.location.lon, gate.arrivals, gate.buffer_km
        );
    }

    let arrivals = assign_gate_arrivals(&regions, &gates)?;
    println!("\n{:<10} {:>10}  nearest gate distances (km)", "region", "arrivals");
    for (region, total) in regions.iter().zip(&arrivals) {
        let distances: Vec<String> = gates
            .iter()
            .map(|g| format!("{:.1}", distance_to_region_km(g.location, &region.geometry)))
            .collect();
        println!(
            "{:<10} {:>10}  [{}]",
            region.region_id,
            total,
            distances.join(", ")
        );
    }

    // a point far from everything stays unassigned no matter the gate
    let nowhere = LatLon::new(20.0, 140.0);
    let nearest = regions
        .iter()
        .map(|r| distance_to_region_km(nowhere, &r.geometry))
        .fold(f64::INFINITY, f64::min);
    println!("\nnearest region to ({}, {}) is {:.0} km away", nowhere.lat, nowhere.lon, nearest);
    Ok(())
}
