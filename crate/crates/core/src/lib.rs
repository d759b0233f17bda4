//! Guided reinforcement learning for omni-directional monopod jumps.
//!
//! The agent does not output joint torques. It outputs five numbers that
//! describe the lift-off state of the centre of mass (CoM) plus the thrust
//! duration. A cubic Bézier curve turns that into a CoM reference, inverse
//! kinematics turns the reference into joint set-points, and a PD plus
//! gravity-compensation controller tracks them on an analytic stance model.
//! Flight is ballistic and solved in closed form.
//!
//! Module map:
//!
//! - [`config`]: robot, action-bound, simulator and training parameters.
//! - [`kinematics`]: 3-DoF leg forward/inverse kinematics and Jacobian.
//! - [`ballistics`]: apex, feasibility check and flight propagation.
//! - [`planner`]: action mapping, Bézier thrust curve and joint references.
//! - [`sim`]: 1 kHz stance simulation, lift-off and touchdown detection.
//! - [`reward`]: constraint costs and landing reward.
//! - [`nn`]: dense networks, backpropagation and Adam.
//! - [`td3`]: twin-delayed actor-critic agent, replay buffer, checkpoints.
//! - [`harness`]: target sampling, test grid, RPE, training and evaluation.
//!
//! World frame: the foot contact point at rest is the origin and the ground is
//! the plane `z = 0`. The CoM coincides with the hip.

pub mod ballistics;
pub mod config;
pub mod harness;
pub mod kinematics;
pub mod nn;
pub mod planner;
pub mod reward;
pub mod sim;
pub mod td3;

pub use config::{ActionBounds, Config, RobotModel, SimConfig, TrainConfig};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
