//! Freest model of every vertical-bar positive on a 4×4 grid, with its
//! atom-size histogram.

use std::time::Instant;

use aml::crossing::freest_model;
use aml::embed::VerticalBar;

fn main() -> aml::Result<()> {
    let vb = VerticalBar::new(4)?;
    let ax = vb.axioms(&vb.positives(), &[]);
    let start = Instant::now();
    let m = freest_model(vb.universe.clone(), &ax.positives, true)?;
    println!("{} atoms in {:.1?}", m.len(), start.elapsed());
    for (size, count) in m.size_histogram() {
        println!("  size {size}: {count}");
    }
    Ok(())
}
