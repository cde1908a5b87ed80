use khop::patterns::generate_synthetic;
use khop::{retrieve, uhop_plus, FeatureMap, NormKind, RetrievalConfig, TrainConfig};

fn main() -> khop::Result<()> {
    // Ten random unit patterns in R^5, a trainable map into R^5.
    let patterns = generate_synthetic(10, 5, 0)?;
    let w0 = FeatureMap::random(5, 5, 1)?;
    let trained = uhop_plus(&patterns, &w0, &TrainConfig::default())?;
    println!(
        "loss {:.4} -> {:.4}",
        trained.initial_loss,
        trained.log.last().unwrap().loss
    );

    // Retrieve from a perturbed copy of the first pattern.
    let x0 = patterns.matrix().column(0).to_owned() * 0.9;
    let cfg = RetrievalConfig::new(4.0).norm(NormKind::Sparsemax);
    let out = retrieve(&patterns, Some(&trained.phi), &cfg, &x0.view())?;
    println!("{} steps, converged: {}", out.steps, out.converged);
    Ok(())
}
