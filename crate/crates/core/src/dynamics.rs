//! Quadrotor rigid-body model driven by collective thrust and body-rate
//! commands.
//!
//! The state evolves as
//!
//! ```text
//! p' = v
//! q' = 1/2 q ⊗ (0, ω)
//! v' = R(q) (0, 0, c)ᵀ / m + g
//! ω' = J⁻¹ (τ − ω × J ω)
//! ```
//!
//! Commands carry body rates, while the rigid body is driven by torque. A
//! proportional inner rate loop turns the rate setpoint into a desired torque,
//! the wrench is allocated to four motors in an X configuration, each motor is
//! clamped to its thrust range, and the realized wrench is what the plant
//! integrates. Integration is one explicit Euler step followed by quaternion
//! re-normalization.

use nalgebra::{Matrix4, Quaternion, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position, attitude, velocity and body rate of the vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadState {
    /// Position in the world frame, meters.
    pub position: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    /// Linear velocity in the world frame, m/s.
    pub velocity: Vector3<f64>,
    /// Angular velocity in the body frame, rad/s.
    pub body_rate: Vector3<f64>,
}

impl QuadState {
    /// Vehicle at rest at `position`, level, heading `yaw` radians.
    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
            velocity: Vector3::zeros(),
            body_rate: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let q = self.orientation.quaternion();
        self.position.iter().all(|x| x.is_finite())
            && q.coords.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.body_rate.iter().all(|x| x.is_finite())
    }

    /// Heading angle `atan2(R[1,0], R[0,0])`.
    pub fn yaw(&self) -> f64 {
        let q = self.orientation.quaternion();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let r00 = 1.0 - 2.0 * (y * y + z * z);
        let r10 = 2.0 * (x * y + w * z);
        r10.atan2(r00)
    }

    /// Body x axis expressed in the world frame. The depth camera looks
    /// along this axis.
    pub fn forward(&self) -> Vector3<f64> {
        let q = self.orientation.quaternion();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        Vector3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y),
        )
    }
}

/// Collective thrust and body-rate setpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Collective thrust, newtons.
    pub thrust: f64,
    /// Commanded body rates, rad/s.
    pub body_rate: Vector3<f64>,
}

impl ControlCommand {
    pub fn new(thrust: f64, body_rate: Vector3<f64>) -> Self {
        Self { thrust, body_rate }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vector3::zeros())
    }

    /// `(c, ω_x, ω_y, ω_z)` as a 4-vector.
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.body_rate.x, self.body_rate.y, self.body_rate.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], Vector3::new(v[1], v[2], v[3]))
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.body_rate.iter().all(|x| x.is_finite())
    }
}

fn default_mass() -> f64 {
    0.21
}
fn default_inertia() -> [f64; 3] {
    [1.98e-3, 1.98e-3, 3.95e-3]
}
fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}
fn default_arm_length() -> f64 {
    0.194
}
fn default_thrust_to_weight() -> f64 {
    6.8
}
fn default_n_rotors() -> usize {
    4
}
fn default_rate_gain() -> f64 {
    20.0
}
fn default_collision_radius() -> f64 {
    0.0
}
fn default_yaw_moment() -> f64 {
    0.016
}

/// Physical parameters of the vehicle, SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadParams {
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Diagonal of the inertia matrix, kg·m².
    #[serde(default = "default_inertia")]
    pub inertia: [f64; 3],
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default = "default_arm_length")]
    pub arm_length: f64,
    #[serde(default = "default_thrust_to_weight")]
    pub thrust_to_weight: f64,
    #[serde(default = "default_n_rotors")]
    pub n_rotors: usize,
    /// Proportional gain of the inner body-rate loop, 1/s.
    #[serde(default = "default_rate_gain")]
    pub rate_gain: f64,
    /// Radius of the sphere checked against true geometry, meters. Zero checks
    /// the body origin alone, matching the point the collision cost tests.
    #[serde(default = "default_collision_radius")]
    pub collision_radius: f64,
    /// Rotor drag torque per newton of thrust, meters.
    #[serde(default = "default_yaw_moment")]
    pub yaw_moment_coeff: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: default_mass(),
            inertia: default_inertia(),
            gravity: default_gravity(),
            arm_length: default_arm_length(),
            thrust_to_weight: default_thrust_to_weight(),
            n_rotors: default_n_rotors(),
            rate_gain: default_rate_gain(),
            collision_radius: default_collision_radius(),
            yaw_moment_coeff: default_yaw_moment(),
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mass, self.arm_length, self.thrust_to_weight, self.rate_gain]
            .iter()
            .chain(self.inertia.iter())
            .chain(self.gravity.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("quadrotor parameters"));
        }
        if self.mass <= 0.0 {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.mass)));
        }
        if self.inertia.iter().any(|&j| j <= 0.0) {
            return Err(Error::InvalidParameter("inertia entries must be positive".into()));
        }
        if self.thrust_to_weight <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "thrust_to_weight must exceed 1, got {}",
                self.thrust_to_weight
            )));
        }
        if self.n_rotors != 4 {
            return Err(Error::InvalidParameter(format!(
                "only the four-rotor X mixer is supported, got n_rotors = {}",
                self.n_rotors
            )));
        }
        if self.arm_length <= 0.0 || self.rate_gain <= 0.0 || self.yaw_moment_coeff <= 0.0 {
            return Err(Error::InvalidParameter(
                "arm_length, rate_gain and yaw_moment_coeff must be positive".into(),
            ));
        }
        if self.collision_radius < 0.0 {
            return Err(Error::InvalidParameter("collision_radius must be non-negative".into()));
        }
        Ok(())
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    /// Maximum collective thrust `thrust_to_weight · m · |g|`.
    pub fn max_thrust(&self) -> f64 {
        self.thrust_to_weight * self.mass * self.gravity_vector().norm()
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity_vector().norm()
    }

    pub fn hover_command(&self) -> ControlCommand {
        ControlCommand::new(self.hover_thrust(), Vector3::zeros())
    }
}

/// Time derivative of a [`QuadState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub orientation: Quaternion<f64>,
    pub velocity: Vector3<f64>,
    pub body_rate: Vector3<f64>,
}

/// A validated [`QuadParams`] with the motor mixer precomputed.
#[derive(Clone, Debug)]
pub struct QuadModel {
    params: QuadParams,
    inertia: Vector3<f64>,
    gravity: Vector3<f64>,
    /// Motor thrusts -> (c, τx, τy, τz).
    mix: Matrix4<f64>,
    /// (c, τx, τy, τz) -> motor thrusts.
    unmix: Matrix4<f64>,
    motor_max: f64,
}

impl QuadModel {
    pub fn new(params: QuadParams) -> Result<Self> {
        params.validate()?;
        let d = params.arm_length * std::f64::consts::FRAC_1_SQRT_2;
        let k = params.yaw_moment_coeff;
        // Motors: front-right, rear-left, front-left, rear-right. The first
        // diagonal pair spins opposite to the second.
        #[rustfmt::skip]
        let mix = Matrix4::new(
            1.0, 1.0, 1.0, 1.0,
            -d,  d,   d,   -d,
            -d,  d,   -d,  d,
            k,   k,   -k,  -k,
        );
        let unmix = mix
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular motor allocation".into()))?;
        Ok(Self {
            inertia: Vector3::from(params.inertia),
            gravity: params.gravity_vector(),
            motor_max: params.max_thrust() / params.n_rotors as f64,
            mix,
            unmix,
            params,
        })
    }

    pub fn params(&self) -> &QuadParams {
        &self.params
    }

    /// Upper thrust limit of a single motor, newtons.
    pub fn motor_max(&self) -> f64 {
        self.motor_max
    }

    /// Individual motor thrusts that realize collective thrust `c` and
    /// body torque `tau`.
    pub fn motor_thrusts(&self, thrust: f64, torque: &Vector3<f64>) -> Vector4<f64> {
        self.unmix * Vector4::new(thrust, torque.x, torque.y, torque.z)
    }

    /// Continuous-time dynamics under collective thrust `thrust` and body
    /// torque `torque`.
    pub fn state_derivative(
        &self,
        s: &QuadState,
        thrust: f64,
        torque: &Vector3<f64>,
    ) -> Result<StateDerivative> {
        if !s.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        if !thrust.is_finite() || !torque.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("thrust or torque"));
        }
        let omega = s.body_rate;
        let q_dot = s.orientation.quaternion() * Quaternion::from_imag(omega) * 0.5;
        let accel = s.orientation * Vector3::new(0.0, 0.0, thrust / self.params.mass) + self.gravity;
        let j_omega = self.inertia.component_mul(&omega);
        let omega_dot = (torque - omega.cross(&j_omega)).component_div(&self.inertia);
        Ok(StateDerivative {
            position: s.velocity,
            orientation: q_dot,
            velocity: accel,
            body_rate: omega_dot,
        })
    }

    /// Maps a command through the rate loop and the motor limits.
    ///
    /// Returns the realized command together with the body torque it
    /// produces. The realized command's body rate is the setpoint the rate
    /// loop would need to produce the clamped torque, so clipping an already
    /// clipped command returns it unchanged. Commands that need no clamping
    /// are returned bit-for-bit.
    pub fn clip_command(&self, u: &ControlCommand, s: &QuadState) -> (ControlCommand, Vector3<f64>) {
        let gain = self.inertia * self.params.rate_gain;
        let gyro = s.body_rate.cross(&self.inertia.component_mul(&s.body_rate));
        let torque = gain.component_mul(&(u.body_rate - s.body_rate)) + gyro;
        let motors = self.motor_thrusts(u.thrust, &torque);

        let tol = 1e-9 * self.motor_max;
        if motors.iter().all(|&f| f >= -tol && f <= self.motor_max + tol) {
            return (*u, torque);
        }

        let clamped = motors.map(|f| f.clamp(0.0, self.motor_max));
        let wrench = self.mix * clamped;
        let realized = Vector3::new(wrench[1], wrench[2], wrench[3]);
        let rate = s.body_rate + (realized - gyro).component_div(&gain);
        (ControlCommand::new(wrench[0], rate), realized)
    }

    /// One explicit Euler step of length `dt` under command `u`.
    pub fn step(&self, s: &QuadState, u: &ControlCommand, dt: f64) -> Result<QuadState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if !u.is_finite() {
            return Err(Error::NonFinite("command"));
        }
        let (clipped, torque) = self.clip_command(u, s);
        let d = self.state_derivative(s, clipped.thrust, &torque)?;
        let q = s.orientation.quaternion() + d.orientation * dt;
        let next = QuadState {
            position: s.position + d.position * dt,
            orientation: UnitQuaternion::from_quaternion(q),
            velocity: s.velocity + d.velocity * dt,
            body_rate: s.body_rate + d.body_rate * dt,
        };
        if !next.is_finite() {
            return Err(Error::NonFinite("integrated state"));
        }
        Ok(next)
    }
}
