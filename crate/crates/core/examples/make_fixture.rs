//! Regenerates the bundled fixture dataset.
//!
//!     cargo run -p topo-rec --example make_fixture -- fixtures/fixture_500x400.tsv

use std::path::PathBuf;

fn main() -> topo_rec::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/fixture_500x400.tsv"));
    let g = topo_rec::synthetic::connected_power_law(500, 400, 6000, 2.5, 20240611);
    topo_rec::graph::io::write_graph(&out, &g)?;
    println!("{}: {} users, {} items, {} edges", out.display(), g.user_count(), g.item_count(), g.edge_count());
    Ok(())
}
