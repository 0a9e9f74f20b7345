#![allow(dead_code)]

pub mod fixtures;
pub mod lp_cases;
