//! Exact toolkit for oscillator sets `(±U)ⁿ`, oscillator topologies and the
//! separation invariants `T₁`, `T₂`, `osc` of finitely described
//! paratopological groups.

pub mod acceptance;
pub mod affine;
pub mod dehn;
pub mod directsum;
pub mod freegroup;
pub mod oscillator;
pub mod verify;
