#![allow(dead_code)]

pub mod mutations;
