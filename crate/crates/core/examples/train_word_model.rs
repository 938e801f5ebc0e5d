//! Train the word-gesture decision tree on a synthetic corpus, score it on a
//! held-out split and save it.
//!
//! ```text
//! cargo run --release --example train_word_model -- word.dtree
//! ```

use smartglove::templates::{stratified_split, word_training_set, CorpusSpec};
use smartglove::wordmodel::{save_model, train, TreeParams, WordLabel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples = word_training_set(&CorpusSpec::default())?;
    let (train_set, test_set) = stratified_split(&samples, 0.2, 1);
    let model = train(&train_set, TreeParams::default())?;

    println!(
        "{} nodes, depth {}, held-out accuracy {:.3} over {} windows",
        model.nodes().len(),
        model.depth(),
        model.accuracy(&test_set),
        test_set.len()
    );
    for label in WordLabel::ALL {
        let class: Vec<_> = test_set.iter().filter(|s| s.label == label).cloned().collect();
        println!("  {:<9} {:.3}", label.name(), model.accuracy(&class));
    }
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, save_model(&model))?;
        println!("saved {path}");
    }
    Ok(())
}
