//! Acceptance suite for harmflow; see `tests/acceptance.rs`.
