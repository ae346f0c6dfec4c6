//! Distance, line of sight and loss budget for a few node pairs.

use soqn::channel::{path_loss_db, transmittance, ChannelParams};
use soqn::geo::{geodesic_distance, line_of_sight, link_feasible, GeoPosition, LinkFeasibilityParams};

fn main() {
    let params = LinkFeasibilityParams::default();
    let channel = ChannelParams::default();
    let pairs = [
        ("1 deg along the equator", (0.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
        ("sea level, 8 km", (0.0, 0.0, 0.0), (0.0, 0.0719, 0.0)),
        ("sea level, 200 km", (0.0, 0.0, 0.0), (0.0, 1.7987, 0.0)),
        ("two 3000 m peaks, 200 km", (0.0, 0.0, 3000.0), (0.0, 1.7987, 3000.0)),
        ("rooftop to hill, 60 km", (31.2, 121.4, 120.0), (31.5, 121.9, 800.0)),
    ];
    println!(
        "{:<26} {:>10} {:>5} {:>9} {:>10} {:>8}",
        "pair", "dist_km", "los", "loss_db", "T", "link"
    );
    for (name, a, b) in pairs {
        let a = GeoPosition::new(a.0, a.1, a.2).unwrap();
        let b = GeoPosition::new(b.0, b.1, b.2).unwrap();
        let d = geodesic_distance(&a, &b);
        let loss = path_loss_db(d, &channel);
        println!(
            "{:<26} {:>10.3} {:>5} {:>9.2} {:>10.3e} {:>8}",
            name,
            d,
            line_of_sight(&a, &b, &params),
            loss,
            transmittance(loss),
            if link_feasible(&a, &b, &params) { "yes" } else { "no" }
        );
    }
}
