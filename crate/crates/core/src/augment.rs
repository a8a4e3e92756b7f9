//! Exact discrete-time models of the altitude plant with input and output
//! delays that need not be multiples of the sampling period.
//!
//! With `τᵢ = (dᵢ−1)h + τᵢ'` the plant sees `u[k−dᵢ]` for the first `τᵢ'` of
//! each period and `u[k−dᵢ+1]` for the rest. With `τₒ = (dₒ−1)h + τₒ'` the
//! measurement at `kh` is the state at `kh − τₒ`, which is kept as a
//! snapshot `yₛ[k] = x(kh − τₒ')` plus `dₒ − 1` older snapshots.
//!
//! The extended state is stacked as
//!
//! ```text
//! [ x[k] | yₛ[k], yₛ[k−1], …, yₛ[k−dₒ+1] | u[k−dᵢ], …, u[k−1] ]
//! ```
//!
//! and every coefficient block comes from piecewise zero-order-hold
//! propagation over the input switch instants inside one period.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::lti::{build_continuous, decompose_delay, positive, ContinuousSystem, DelayDecomposition, PlantParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    PlantState,
    DelayedOutputSnapshot,
    OutputHistory,
    InputHistory,
}

impl BlockKind {
    pub fn label(self) -> &'static str {
        match self {
            BlockKind::PlantState => "plant_state",
            BlockKind::DelayedOutputSnapshot => "delayed_output_snapshot",
            BlockKind::OutputHistory => "output_history",
            BlockKind::InputHistory => "input_history",
        }
    }
}

/// One contiguous slice of the extended state.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub offset: usize,
    pub width: usize,
    /// Sample lag relative to `k` (0 for the plant state and newest snapshot,
    /// `m` for `u[k−m]` or `yₛ[k−m]`).
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockLayout {
    pub blocks: Vec<Block>,
}

impl BlockLayout {
    fn push(&mut self, kind: BlockKind, width: usize, lag: usize) {
        let offset = self.width();
        self.blocks.push(Block {
            kind,
            offset,
            width,
            lag,
        });
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn of_kind(&self, kind: BlockKind) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(move |b| b.kind == kind)
    }
}

impl fmt::Display for BlockLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            let name = match b.kind {
                BlockKind::PlantState => "x(kh)".to_string(),
                BlockKind::DelayedOutputSnapshot => "y_s(kh)".to_string(),
                BlockKind::OutputHistory => format!("y_s(kh-{}h)", b.lag),
                BlockKind::InputHistory => format!("u(kh-{}h)", b.lag),
            };
            writeln!(
                f,
                "[{:>3}..{:>3}) {:<24} {}",
                b.offset,
                b.offset + b.width,
                b.kind.label(),
                name
            )?;
        }
        Ok(())
    }
}

/// `x_e[k+1] = A_e x_e[k] + B_e u[k]`, `y[k] = C_e x_e[k]`.
///
/// The first three rows of `c_e` are the measured plant output; the remaining
/// rows read back the stored inputs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAugmentedSystem {
    pub a_e: DMatrix<f64>,
    pub b_e: DVector<f64>,
    pub c_e: DMatrix<f64>,
    pub h: f64,
    pub layout: BlockLayout,
    pub tau_i: f64,
    pub tau_o: f64,
}

/// Which rows of the extended state an agent observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationMode {
    /// Measured (possibly delayed) output only.
    FullY,
    /// Measured output plus the most recent stored input.
    Reduced,
}

// Coefficients of x[k], u_old and u_new after propagating `horizon` seconds
// into a period whose input switches from u_old to u_new at `switch`.
fn window_coefficients(
    sys: &ContinuousSystem,
    horizon: f64,
    switch: f64,
) -> Result<(Matrix3<f64>, Vector3<f64>, Vector3<f64>)> {
    let phi = sys.phi(horizon)?;
    if horizon <= switch {
        Ok((phi, sys.gamma(horizon)?, Vector3::zeros()))
    } else {
        let (phi_rest, gamma_rest) = sys.transition(horizon - switch)?;
        Ok((phi, phi_rest * sys.gamma(switch)?, gamma_rest))
    }
}

/// Builds the extended model for a plant with nonzero total delay.
///
/// A zero output delay drops the snapshot blocks and the plant state is read
/// directly. A zero input delay still keeps one stored input `u[k−1]`, which
/// has no effect on the dynamics but is what a reduced observation reads.
pub fn build_augmented(params: &PlantParams, h: f64) -> Result<DiscreteAugmentedSystem> {
    params.validate()?;
    positive("h", h)?;
    if params.tau_i == 0.0 && params.tau_o == 0.0 {
        return Err(Error::invalid(
            "tau_i, tau_o",
            "both delays are zero; use build_delay_free",
        ));
    }
    let sys = build_continuous(params)?;
    let input = decompose_delay(params.tau_i, h)?;
    let output = decompose_delay(params.tau_o, h)?;
    let has_output_delay = !output.is_delay_free();

    let mut layout = BlockLayout::default();
    layout.push(BlockKind::PlantState, 3, 0);
    if has_output_delay {
        layout.push(BlockKind::DelayedOutputSnapshot, 3, 0);
        for lag in 1..output.d {
            layout.push(BlockKind::OutputHistory, 3, lag);
        }
    }
    let d_i = input.d;
    for lag in (1..=d_i).rev() {
        layout.push(BlockKind::InputHistory, 1, lag);
    }

    let n = layout.width();
    let mut a_e = DMatrix::zeros(n, n);
    let mut b_e = DVector::zeros(n);

    let input_offset = n - d_i;
    let u_index = |lag: usize| input_offset + d_i - lag;
    // u[k−dᵢ] is always stored; u[k−dᵢ+1] is the fresh input when dᵢ = 1.
    let old_col = u_index(d_i);
    let new_col = if d_i >= 2 { Some(u_index(d_i - 1)) } else { None };

    let place = |a_e: &mut DMatrix<f64>,
                     b_e: &mut DVector<f64>,
                     row: usize,
                     (phi, g_old, g_new): (Matrix3<f64>, Vector3<f64>, Vector3<f64>)| {
        a_e.view_mut((row, 0), (3, 3)).copy_from(&phi);
        for r in 0..3 {
            a_e[(row + r, old_col)] += g_old[r];
            match new_col {
                Some(c) => a_e[(row + r, c)] += g_new[r],
                None => b_e[row + r] += g_new[r],
            }
        }
    };

    place(&mut a_e, &mut b_e, 0, window_coefficients(&sys, h, input.tau_frac)?);

    let measured_offset = if has_output_delay {
        place(
            &mut a_e,
            &mut b_e,
            3,
            window_coefficients(&sys, h - output.tau_frac, input.tau_frac)?,
        );
        for j in 1..output.d {
            let row = 3 + 3 * j;
            for r in 0..3 {
                a_e[(row + r, row - 3 + r)] = 1.0;
            }
        }
        3 + 3 * (output.d - 1)
    } else {
        0
    };

    for lag in 2..=d_i {
        a_e[(u_index(lag), u_index(lag - 1))] = 1.0;
    }
    b_e[u_index(1)] = 1.0;

    let mut c_e = DMatrix::zeros(3 + d_i, n);
    for r in 0..3 {
        c_e[(r, measured_offset + r)] = 1.0;
    }
    for j in 0..d_i {
        c_e[(3 + j, input_offset + j)] = 1.0;
    }

    Ok(DiscreteAugmentedSystem {
        a_e,
        b_e,
        c_e,
        h,
        layout,
        tau_i: params.tau_i,
        tau_o: params.tau_o,
    })
}

/// Plain zero-order-hold model `x[k+1] = Φ(h)x[k] + Γ(h)u[k]`, `y = x`.
pub fn build_delay_free(params: &PlantParams, h: f64) -> Result<DiscreteAugmentedSystem> {
    positive("h", h)?;
    let sys = build_continuous(params)?;
    let (phi, gamma) = sys.transition(h)?;
    let mut layout = BlockLayout::default();
    layout.push(BlockKind::PlantState, 3, 0);
    Ok(DiscreteAugmentedSystem {
        a_e: DMatrix::from_fn(3, 3, |r, c| phi[(r, c)]),
        b_e: DVector::from_fn(3, |r, _| gamma[r]),
        c_e: DMatrix::identity(3, 3),
        h,
        layout,
        tau_i: 0.0,
        tau_o: 0.0,
    })
}

/// Delay-free model when both delays vanish, extended model otherwise.
pub fn build_for(params: &PlantParams, h: f64) -> Result<DiscreteAugmentedSystem> {
    if params.tau_i == 0.0 && params.tau_o == 0.0 {
        build_delay_free(params, h)
    } else {
        build_augmented(params, h)
    }
}

impl DiscreteAugmentedSystem {
    pub fn dim(&self) -> usize {
        self.a_e.nrows()
    }

    pub fn is_delay_free(&self) -> bool {
        self.tau_i == 0.0 && self.tau_o == 0.0
    }

    pub fn input_delay(&self) -> Result<DelayDecomposition> {
        decompose_delay(self.tau_i, self.h)
    }

    pub fn output_delay(&self) -> Result<DelayDecomposition> {
        decompose_delay(self.tau_o, self.h)
    }

    pub fn step(&self, x_e: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a_e * x_e + &self.b_e * u
    }

    /// Measured plant output `C_e x_e` restricted to the first three rows.
    pub fn measured(&self, x_e: &DVector<f64>) -> Vector3<f64> {
        let y = self.c_e.rows(0, 3) * x_e;
        Vector3::new(y[0], y[1], y[2])
    }

    /// Extended-state indices observed under `mode`, measured output first.
    pub fn observation_selector(&self, mode: ObservationMode) -> Result<Vec<usize>> {
        let measured = self
            .c_e
            .rows(0, 3)
            .row_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).expect("selector row"))
            .collect::<Vec<_>>();
        match mode {
            ObservationMode::FullY => Ok(measured),
            ObservationMode::Reduced => {
                let newest = self
                    .layout
                    .of_kind(BlockKind::InputHistory)
                    .find(|b| b.lag == 1)
                    .ok_or_else(|| {
                        Error::Unsupported("reduced observation needs a stored input; system is delay-free".into())
                    })?;
                let mut idx = measured;
                idx.push(newest.offset);
                Ok(idx)
            }
        }
    }
}
