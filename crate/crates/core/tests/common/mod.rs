#![allow(dead_code)]

pub mod ccd;
pub mod energy;
