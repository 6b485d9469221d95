//! Holds the `acceptance` test target. Run it with
//! `cargo test -p srcr-validation --test acceptance`.
