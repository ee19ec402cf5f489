#![allow(dead_code)]

pub mod cases;
pub mod gin_oracle;
pub mod gradcheck;
pub mod oracles;
