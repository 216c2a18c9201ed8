// SPDX-License-Identifier: Apache-2.0

//! Bundled MiniC programs.

/// Three-procedure keyword scanner: `DOC`, an optional `<`/`>` delimiter,
/// then `ATT` unlocks the "go deeper" branch.
pub const RUNNING_EXAMPLE: &str = include_str!("../programs/running_example.mc");

/// Twenty-two unrestrictive branches in `noise` followed by a six-byte `gate`.
pub const GATE_NOISE: &str = include_str!("../programs/gate_noise.mc");

/// Branches that each accept roughly half of the byte domain.
pub const COIN_FLIPS: &str = include_str!("../programs/coin_flips.mc");
