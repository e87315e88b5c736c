//! Arithmetic and modeling kernels for RNS-CKKS key switching.
//!
//! The crate is organized bottom-up:
//!
//! * [`modring`] — word-sized prime fields and NTT-friendly prime generation.
//! * [`ntt`] — negacyclic number-theoretic transforms in three equivalent
//!   dataflows (standard radix-2, four-step, multi-step) plus the twiddle
//!   schedules that drive them.
//! * [`rns`] — RNS bases, approximate basis conversion, ModDown and an exact
//!   big-integer CRT oracle used by the test suites.
//! * [`keyswitch`] — hybrid and KLSS key switching end to end, with a minimal
//!   RLWE harness (key generation, HMULT + rescale, noise measurement).
//! * [`costmodel`] — closed-form ModMul accounting for both key-switch
//!   methods, parameter selection and the per-level alpha schedule.
//! * [`hwsim`] — a cycle-level simulator: kernel plans are lowered to
//!   dependence graphs and timed against configurable hardware profiles in
//!   serial or parallel mode.
//!
//! Everything here is `no_std + alloc`; IO, configuration files and report
//! serialization live in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod costmodel;
pub mod hwsim;
pub mod keyswitch;
pub mod modring;
pub mod ntt;
pub mod rns;

pub use modring::PrimeContext;
pub use ntt::{Domain, PolyVector};
pub use rns::{RnsBasis, RnsPolynomial};
