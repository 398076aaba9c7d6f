//! Phi/Gamma machinery.
