pub mod chess;
pub mod data;
pub mod engine;
pub mod eval;
pub mod model;
pub mod search;
pub mod tokens;
