//! Intraoperative correlation matrices, effect-size bands, and the
//! correlation network rendering.
//!
//! ```bash
//! cargo run --example correlation_network
//! ```

use periaiims::netcorr::{build_network, categorize, intraop_pearson, BandStrength};
use periaiims::pipeline::{acquire_cohort, RunConfig};
use periaiims::svg::{heatmap_svg, network_svg};

fn main() -> periaiims::Result<()> {
    let config = RunConfig::synthetic(4_000, 13, "target/example_out".into());
    let out = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(out).ok();

    for surgery in ["all_surgeries", "gynecology"] {
        let (cohort, _) = acquire_cohort(&config, surgery)?;
        let corr = intraop_pearson(&cohort)?;
        let network = build_network(&corr);

        println!("{surgery}: {} non-negligible edges", network.edges.len());
        for edge in &network.edges {
            let band = match edge.band.strength {
                BandStrength::High => "high",
                BandStrength::Moderate => "moderate",
                BandStrength::Low => "low",
                BandStrength::Negligible => unreachable!(),
            };
            println!(
                "  {:<18} -- {:<18} r={:+.2} ({band}, {})",
                edge.a,
                edge.b,
                edge.r,
                edge.line_style()
            );
        }

        std::fs::write(
            out.join(format!("{surgery}_heatmap.svg")),
            heatmap_svg(&corr, &format!("{surgery} intraoperative correlations")),
        )
        .expect("write heatmap");
        std::fs::write(
            out.join(format!("{surgery}_network.svg")),
            network_svg(&network, &format!("{surgery} correlation network")),
        )
        .expect("write network");
        println!();
    }

    // The banding rule itself, at its pinned boundaries.
    for r in [0.6, 0.5, 0.35, 0.3, 0.1, 0.05, -0.35] {
        println!("categorize({r:+.2}) -> {:?}", categorize(r));
    }
    println!("\nSVGs under {}", out.display());
    Ok(())
}
