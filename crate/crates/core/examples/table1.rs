//! N' for the three model families across the proportion of new items,
//! distractors or type 3 items. Pass a sample count to trade accuracy for
//! speed; the "Who said what?" row dominates the running time.

use mpt_mdl::reports::table1;

fn main() -> mpt_mdl::Result<()> {
    let samples = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1_000_000);
    let rows = table1(samples, 1)?;
    print!("{:<22}", "");
    for c in &rows[0].cells {
        print!("{:>8}", c.preset);
    }
    println!();
    for r in &rows {
        print!("{:<22}", r.family);
        for c in &r.cells {
            print!("{:>8.0}", c.n_prime);
        }
        println!();
    }
    Ok(())
}
