pub mod bundled;
pub mod expr;
pub mod fredholm;
pub mod funcops;
pub mod grid;
pub mod limitops;
pub mod mellin;
pub mod selftest;
pub mod shift;
pub mod so;

pub use num_complex::Complex64;
