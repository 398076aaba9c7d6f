//! Seeded invariant suite.
