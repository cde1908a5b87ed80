use khop::patterns::generate_synthetic;

fn main() -> khop::Result<()> {
    let set = generate_synthetic(5, 2, 0)?;
    for mu in 0..5 {
        let c = set.matrix().column(mu);
        println!("{} {}", c[0], c[1]);
    }
    Ok(())
}
