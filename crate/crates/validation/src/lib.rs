//! End-to-end acceptance checks for `hjprox`. The checks live in
//! `tests/acceptance.rs`; this library is empty.
