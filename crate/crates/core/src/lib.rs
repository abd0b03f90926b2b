pub mod bisect;
pub mod certificate;
pub mod cli;
pub mod dyadic;
pub mod engine;
pub mod expr;
pub mod formats;
pub mod interval;
pub mod logic;
pub mod parser;
pub mod ring;
pub mod rules;
