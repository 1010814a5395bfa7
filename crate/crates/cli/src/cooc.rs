use std::fmt::Write;

use cinet::lda::LdaModel;

/// Context-by-object assignment counts, one row per context in index
/// order. `None` gives the header alone.
pub fn cooc_csv(vocab_size: usize, model: Option<&LdaModel>) -> String {
    let mut out = String::from("context");
    for o in 0..vocab_size {
        write!(out, ",o{o}").unwrap();
    }
    out.push('\n');
    if let Some(model) = model {
        for (c, row) in model.n_co().iter().enumerate() {
            write!(out, "{c}").unwrap();
            for n in row {
                write!(out, ",{n}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}
