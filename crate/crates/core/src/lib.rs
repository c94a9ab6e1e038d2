//! Joint lemmatization and UPOS tagging over CoNLL-U, with lemmas encoded
//! as casing + edit-script rule classes.

pub mod ablate;
pub mod baseline;
pub mod conllu;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod model;
pub mod par;
pub mod rule;
pub mod train;
pub mod vectors;
