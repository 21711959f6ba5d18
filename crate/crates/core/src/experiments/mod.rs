//! Desk-scale reproductions of the two benchmark studies: random polynomial
//! integration ([`poly`]) and marginalisation of Gaussian-process
//! hyperparameters ([`gp`]).

pub mod gp;
pub mod poly;
