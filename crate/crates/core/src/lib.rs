pub mod butterfly;
pub mod checker;
pub mod cli;
pub mod facts;
pub mod formula;
pub mod lewis;
pub mod model;
pub mod random;
pub mod structure;
