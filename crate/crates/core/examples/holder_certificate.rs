//! Gradient Hölder certificate: pairwise differences binned by intrinsic distance, a fitted
//! exponent, and the far-pair bound. Writes the certificates as JSON to the working directory.

use plap::campaign::criteria::holder_runs;

fn main() -> plap::Result<()> {
    for (tag, cert) in holder_runs()? {
        let fit = cert.alpha_fit.map_or("none".to_string(), |a| format!("{a:.3}"));
        println!(
            "{tag:<10} alpha fit {fit:<6} worst C {:.3e}  far pairs {} (worst ratio {:.3} <= {:.3})",
            cert.worst_c, cert.far.count, cert.far.worst_ratio, cert.far.bound
        );
        let path = format!("holder_{}.json", tag.replace([' ', '='], "_"));
        std::fs::write(&path, serde_json::to_string_pretty(&cert).expect("certificate serializes"))?;
    }
    Ok(())
}
