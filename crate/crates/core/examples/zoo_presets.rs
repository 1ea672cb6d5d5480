//! Built-in models and how a proportion preset splits N across their trees.

use mpt_mdl::zoo::{self, preset_allocation, Preset};

fn main() -> mpt_mdl::Result<()> {
    for entry in zoo::list() {
        let model = entry.model()?;
        let trees: Vec<&str> = model.trees().iter().map(|t| t.label.as_str()).collect();
        println!("{:<14} S = {}  trees {:?}", entry.id, model.free_count(), trees);
    }
    for (id, preset, n) in [("sm-5b", "50%", 100), ("waddprob", "30%", 10), ("wsw-full-D", "10%", 1920)] {
        let preset: Preset = preset.parse()?;
        let alloc = preset_allocation(zoo::get(id)?, preset, n)?;
        println!("{id} at {preset}, N = {n}: {:?}", alloc.per_tree);
    }
    Ok(())
}
