//! Continuous-time altitude model and its exact zero-order-hold discretization.
//!
//! The plant is a double integrator behind a first-order actuator and a
//! first-order drag term, with gravity assumed compensated:
//!
//! ```text
//! x = [z, z', z'']
//! x' = A x + B u,   y = x
//! ```
//!
//! `Φ(t) = e^{At}` and `Γ(t) = ∫₀ᵗ e^{As} B ds` are computed together from a
//! single exponential of the 4×4 block matrix `[[A, B], [0, 0]]·t`.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};

/// Plant state ordered as `[z, ż, z̈]` (m, m/s, m/s²).
pub type StateVec = Vector3<f64>;

/// Physical constants, delays and actuator limit of the altitude loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Actuator time constant (s).
    pub t_p: f64,
    /// Drag time constant (s).
    pub t_q: f64,
    /// Static gain.
    pub k_z: f64,
    /// Input delay (s).
    pub tau_i: f64,
    /// Output delay (s).
    pub tau_o: f64,
    /// Actuator saturation limit, in plant input units.
    pub u_max: f64,
}

impl PlantParams {
    /// Identified multirotor altitude constants, delay-free.
    pub const fn nominal() -> Self {
        PlantParams {
            t_p: 0.049,
            t_q: 0.563,
            k_z: 0.84,
            tau_i: 0.0,
            tau_o: 0.0,
            u_max: 6.57,
        }
    }

    pub fn with_delays(self, tau_i: f64, tau_o: f64) -> Self {
        PlantParams {
            tau_i,
            tau_o,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("t_p", self.t_p)?;
        positive("t_q", self.t_q)?;
        positive("k_z", self.k_z)?;
        positive("u_max", self.u_max)?;
        non_negative("tau_i", self.tau_i)?;
        non_negative("tau_o", self.tau_o)?;
        Ok(())
    }

    pub fn total_delay(&self) -> f64 {
        self.tau_i + self.tau_o
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::nominal()
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

pub(crate) fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// `ẋ = A x + B u`, `y = C x + D u` with `C = I₃` and `D = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSystem {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub c: Matrix3<f64>,
    pub d: f64,
}

/// Builds the altitude model from its physical constants.
pub fn build_continuous(params: &PlantParams) -> Result<ContinuousSystem> {
    positive("t_p", params.t_p)?;
    positive("t_q", params.t_q)?;
    positive("k_z", params.k_z)?;
    let tpq = params.t_p * params.t_q;
    #[rustfmt::skip]
    let a = Matrix3::new(
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        0.0, -1.0 / tpq, -(params.t_p + params.t_q) / tpq,
    );
    let b = Vector3::new(0.0, 0.0, params.k_z / tpq);
    Ok(ContinuousSystem {
        a,
        b,
        c: Matrix3::identity(),
        d: 0.0,
    })
}

impl ContinuousSystem {
    /// `(Φ(t), Γ(t))` from one block exponential.
    pub fn transition(&self, t: f64) -> Result<(Matrix3<f64>, Vector3<f64>)> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok((Matrix3::identity(), Vector3::zeros()));
        }
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.a * t));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(self.b * t));
        let e = expm(&m);
        Ok((
            e.fixed_view::<3, 3>(0, 0).into_owned(),
            e.fixed_view::<3, 1>(0, 3).into_owned(),
        ))
    }

    /// State transition matrix `e^{At}`.
    pub fn phi(&self, t: f64) -> Result<Matrix3<f64>> {
        self.transition(t).map(|(phi, _)| phi)
    }

    /// Zero-order-hold input integral `∫₀ᵗ e^{As} B ds`.
    pub fn gamma(&self, t: f64) -> Result<Vector3<f64>> {
        self.transition(t).map(|(_, gamma)| gamma)
    }

    /// Applies each `(duration, input)` segment in order with the input held
    /// constant: `x ← Φ(Δ)x + Γ(Δ)u`.
    pub fn propagate_piecewise(&self, x0: &StateVec, segments: &[(f64, f64)]) -> Result<StateVec> {
        segments.iter().try_fold(*x0, |x, &(duration, u)| {
            let (phi, gamma) = self.transition(duration)?;
            Ok(phi * x + gamma * u)
        })
    }
}

/// Split of a delay into whole sampling periods and a fractional remainder,
/// `τ = (d − 1)h + τ'` with `0 < τ' ≤ h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDecomposition {
    pub d: usize,
    pub tau_frac: f64,
}

impl DelayDecomposition {
    /// `τ = 0` decomposes to `d = 1, τ' = 0`.
    pub fn is_delay_free(&self) -> bool {
        self.tau_frac == 0.0
    }
}

/// Decomposes `tau` against the sampling period `h`.
///
/// A delay that is an exact multiple of `h` keeps a full period as its
/// fractional part, so `τ' = h` rather than 0.
pub fn decompose_delay(tau: f64, h: f64) -> Result<DelayDecomposition> {
    non_negative("tau", tau)?;
    positive("h", h)?;
    if tau == 0.0 {
        return Ok(DelayDecomposition { d: 1, tau_frac: 0.0 });
    }
    let q = tau / h;
    let n = q.round();
    if n >= 1.0 && (tau - n * h).abs() <= 1e-12 * tau.max(h) {
        return Ok(DelayDecomposition {
            d: n as usize,
            tau_frac: h,
        });
    }
    let mut d = q.ceil().max(1.0) as usize;
    let mut frac = tau - (d - 1) as f64 * h;
    if frac <= 0.0 {
        d -= 1;
        frac = tau - (d - 1) as f64 * h;
    } else if frac > h {
        d += 1;
        frac = tau - (d - 1) as f64 * h;
    }
    Ok(DelayDecomposition { d, tau_frac: frac })
}

// Padé(13) numerator coefficients for scaling-and-squaring.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = one_norm(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(s);
    let b = &PADE13;
    let ident = Matrix4::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u = a
        * (a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9])
            + a6 * b[7]
            + a4 * b[5]
            + a2 * b[3]
            + ident * b[1]);
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8])
        + a6 * b[6]
        + a4 * b[4]
        + a2 * b[2]
        + ident * b[0];
    let mut r = (v - u)
        .lu()
        .solve(&(v + u))
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..s {
        r = r * r;
    }
    r
}

fn one_norm(m: &Matrix4<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
