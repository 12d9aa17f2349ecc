//! Plant presets, trajectory generation and the cost/slope utilities used by
//! the experiment harness.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{Mat, Vector};
use crate::model::{CostWeights, LtiModel};
use crate::sysid::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    DcMotor,
    MassSpringDamper,
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dc_motor" | "dc-motor" | "dcmotor" => Ok(Self::DcMotor),
            "mass_spring_damper" | "mass-spring-damper" | "msd" => Ok(Self::MassSpringDamper),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DcMotor => f.write_str("dc_motor"),
            Self::MassSpringDamper => f.write_str("mass_spring_damper"),
        }
    }
}

/// A benchmark plant with its training protocol and regulation target.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: PresetName,
    pub model: LtiModel,
    pub cost: CostWeights,
    pub x0_regulation: Vector,
    /// Per-component training box for the initial condition.
    pub train_x0_box: Vec<(f64, f64)>,
    /// Per-component training box for the input signal.
    pub train_u_box: Vec<(f64, f64)>,
    /// Sampling interval of the discretization, for documentation.
    pub dt: f64,
}

pub fn preset(name: PresetName) -> Preset {
    match name {
        PresetName::DcMotor => {
            let a = Mat::from_row_slice(
                3,
                3,
                &[
                    1.000, 0.0091, 0.0, //
                    0.0, 0.8187, 0.0071, //
                    0.0, -0.0035, 0.6065,
                ],
            );
            let b = Mat::from_row_slice(
                3,
                2,
                &[
                    0.0, 0.0047, //
                    0.0020, 0.9063, //
                    0.3935, -0.0020,
                ],
            );
            Preset {
                name,
                model: LtiModel::new(a, b).expect("preset dimensions"),
                cost: CostWeights::identity(3, 2),
                x0_regulation: Vector::from_vec(vec![1.0, 0.0, 0.0]),
                train_x0_box: vec![(-0.1, 0.1); 3],
                train_u_box: vec![(-0.2, 0.0), (-0.1, 0.1)],
                dt: 0.01,
            }
        }
        PresetName::MassSpringDamper => {
            let a = Mat::from_row_slice(2, 2, &[0.9931, 0.0883, -0.1324, 0.7724]);
            let b = Mat::from_row_slice(2, 1, &[0.0046, 0.0883]);
            Preset {
                name,
                model: LtiModel::new(a, b).expect("preset dimensions"),
                cost: CostWeights::identity(2, 1),
                x0_regulation: Vector::from_vec(vec![1.0, 1.0]),
                train_x0_box: vec![(-0.2, 0.2); 2],
                train_u_box: vec![(-0.1, 0.1)],
                dt: 0.1,
            }
        }
    }
}

/// Run the exact recursion `x_{t+1} = A x_t + B u_t`; returns `n x (L+1)`.
pub fn simulate_open_loop(model: &LtiModel, x0: &Vector, inputs: &Mat) -> Result<Mat> {
    let n = model.state_dim();
    if x0.len() != n {
        return Err(Error::Shape(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if inputs.nrows() != model.input_dim() {
        return Err(Error::Shape(format!(
            "inputs have {} rows, expected {}",
            inputs.nrows(),
            model.input_dim()
        )));
    }
    let steps = inputs.ncols();
    let mut states = Mat::zeros(n, steps + 1);
    states.set_column(0, x0);
    for t in 0..steps {
        let next = &model.a * states.column(t) + &model.b * inputs.column(t);
        states.set_column(t + 1, &next);
    }
    Ok(states)
}

/// Apply `u_t = -K x_t` to the true model for `steps` steps.
pub fn simulate_closed_loop(
    model: &LtiModel,
    k: &Mat,
    x0: &Vector,
    steps: usize,
) -> Result<(Mat, Mat)> {
    let n = model.state_dim();
    let m = model.input_dim();
    if k.nrows() != m || k.ncols() != n {
        return Err(Error::Shape(format!("gain is {}x{}, expected {m}x{n}", k.nrows(), k.ncols())));
    }
    if x0.len() != n {
        return Err(Error::Shape(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let mut states = Mat::zeros(n, steps + 1);
    let mut inputs = Mat::zeros(m, steps);
    states.set_column(0, x0);
    for t in 0..steps {
        let u = -(k * states.column(t));
        inputs.set_column(t, &u);
        let next = &model.a * states.column(t) + &model.b * inputs.column(t);
        states.set_column(t + 1, &next);
    }
    Ok((states, inputs))
}

/// `sum_t x_t^T Q x_t + u_t^T R u_t` over the input horizon.
pub fn finite_cost(states: &Mat, inputs: &Mat, cost: &CostWeights) -> f64 {
    let horizon = inputs.ncols().min(states.ncols());
    let mut total = 0.0;
    for t in 0..horizon {
        let x = states.column(t);
        let u = inputs.column(t);
        total += (x.transpose() * &cost.q * x)[(0, 0)] + (u.transpose() * &cost.r * u)[(0, 0)];
    }
    total
}

/// Ordinary least-squares line fit returning `(slope, intercept, r^2)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("x values are all identical".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 =
        xs.iter().zip(ys).map(|(x, y)| (y - (intercept + slope * x)).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((slope, intercept, r2))
}

/// Draw one training set: uniform initial states in the box and a fresh
/// uniform input per component per step.
pub fn sample_training_set(
    model: &LtiModel,
    x0_box: &[(f64, f64)],
    u_box: &[(f64, f64)],
    trajectories: usize,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Trajectory>> {
    let n = model.state_dim();
    let m = model.input_dim();
    if x0_box.len() != n || u_box.len() != m {
        return Err(Error::Shape(format!(
            "boxes sized {}/{} but model has {n} states / {m} inputs",
            x0_box.len(),
            u_box.len()
        )));
    }
    let mut out = Vec::with_capacity(trajectories);
    for _ in 0..trajectories {
        let x0 = Vector::from_iterator(n, x0_box.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)));
        let inputs = Mat::from_fn(m, steps, |i, _| {
            let (lo, hi) = u_box[i];
            rng.random_range(lo..=hi)
        });
        let states = simulate_open_loop(model, &x0, &inputs)?;
        out.push(Trajectory::new(states, inputs)?);
    }
    Ok(out)
}

pub fn rng_for_repetition(seed: u64, repetition: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition.wrapping_add(1));
    rng
}

/// Symmetric per-component quantizer ranges provisioned ahead of time: the
/// envelope of a 10x oversampled pilot run at seed 0, inflated by 10%.
pub fn default_ranges(
    model: &LtiModel,
    x0_box: &[(f64, f64)],
    u_box: &[(f64, f64)],
    trajectories: usize,
    steps: usize,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pilot = sample_training_set(model, x0_box, u_box, 10 * trajectories, steps, &mut rng)?;
    let n = model.state_dim();
    let mut peak = vec![0.0_f64; n];
    for traj in &pilot {
        for i in 0..n {
            for t in 0..traj.states.ncols() {
                peak[i] = peak[i].max(traj.states[(i, t)].abs());
            }
        }
    }
    let state_ranges = peak
        .iter()
        .map(|&c| {
            let c = 1.1 * c.max(f64::MIN_POSITIVE);
            (-c, c)
        })
        .collect();
    let input_ranges = u_box
        .iter()
        .map(|&(lo, hi)| {
            let c = 1.1 * lo.abs().max(hi.abs());
            (-c, c)
        })
        .collect();
    Ok((state_ranges, input_ranges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_match_published_matrices() {
        let dc = preset(PresetName::DcMotor);
        assert_eq!(dc.model.state_dim(), 3);
        assert_eq!(dc.model.input_dim(), 2);
        assert_relative_eq!(dc.model.a[(1, 1)], 0.8187);
        assert_relative_eq!(dc.model.b[(2, 0)], 0.3935);
        assert!(dc.model.is_controllable().unwrap());
        let msd = preset(PresetName::MassSpringDamper);
        assert_eq!(msd.model.state_dim(), 2);
        assert_relative_eq!(msd.model.a[(1, 0)], -0.1324);
        assert!(msd.model.is_controllable().unwrap());
    }

    #[test]
    fn dc_motor_open_loop_spectral_radius_is_unit() {
        // The motor position integrates velocity, so A carries an eigenvalue
        // at exactly 1.
        let dc = preset(PresetName::DcMotor);
        let sr = crate::mat::spectral_radius(&dc.model.a).unwrap();
        assert!(sr > 0.6 && sr < 1.001);
        assert_relative_eq!(sr, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn open_loop_constant_under_identity() {
        let model = LtiModel::new(Mat::identity(2, 2), Mat::zeros(2, 1)).unwrap();
        let x0 = Vector::from_vec(vec![1.0, -2.0]);
        let states = simulate_open_loop(&model, &x0, &Mat::zeros(1, 5)).unwrap();
        for t in 0..=5 {
            assert_relative_eq!(states.column(t).into_owned(), x0);
        }
    }

    #[test]
    fn open_loop_scalar_hand_recursion() {
        let model =
            LtiModel::new(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]))
                .unwrap();
        let states = simulate_open_loop(
            &model,
            &Vector::from_vec(vec![1.0]),
            &Mat::from_row_slice(1, 2, &[1.0, -1.0]),
        )
        .unwrap();
        assert_relative_eq!(states, Mat::from_row_slice(1, 3, &[1.0, 1.5, -0.25]));
    }

    #[test]
    fn dc_motor_unit_vector_propagation() {
        let dc = preset(PresetName::DcMotor);
        let states = simulate_open_loop(
            &dc.model,
            &Vector::from_vec(vec![1.0, 0.0, 0.0]),
            &Mat::zeros(2, 1),
        )
        .unwrap();
        assert_relative_eq!(states.column(1).into_owned(), dc.model.a.column(0).into_owned());
    }

    #[test]
    fn closed_loop_deadbeat_scalar() {
        let model =
            LtiModel::new(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]))
                .unwrap();
        let (states, inputs) =
            simulate_closed_loop(&model, &Mat::from_row_slice(1, 1, &[0.5]), &Vector::from_vec(vec![1.0]), 3)
                .unwrap();
        assert_relative_eq!(states[(0, 1)], 0.0);
        assert_relative_eq!(inputs[(0, 0)], -0.5);
        // finite cost over two steps: 1 + K^2.
        let cost = CostWeights::identity(1, 1);
        assert_relative_eq!(finite_cost(&states, &inputs, &cost), 1.25);
    }

    #[test]
    fn finite_cost_cases() {
        let cost = CostWeights::identity(1, 1);
        assert_relative_eq!(finite_cost(&Mat::zeros(1, 3), &Mat::zeros(1, 2), &cost), 0.0);
        let states = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let inputs = Mat::from_row_slice(1, 1, &[-0.5]);
        assert_relative_eq!(finite_cost(&states, &inputs, &cost), 1.25);
    }

    #[test]
    fn fit_slope_exact_line_and_two_points() {
        let xs = [8.0, 10.0, 12.0, 14.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.301 * x + 0.7).collect();
        let (slope, intercept, r2) = fit_slope(&xs, &ys).unwrap();
        assert_relative_eq!(slope, -0.301, max_relative = 1e-12);
        assert_relative_eq!(intercept, 0.7, max_relative = 1e-9);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);
        let (slope2, _, _) = fit_slope(&[8.0, 14.0], &[-1.0, -2.806]).unwrap();
        assert_relative_eq!(slope2, -0.301, max_relative = 1e-12);
        assert!(fit_slope(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fit_slope(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn training_sets_are_seed_deterministic_and_in_box() {
        let dc = preset(PresetName::DcMotor);
        let gen = |rep| {
            let mut rng = rng_for_repetition(7, rep);
            sample_training_set(&dc.model, &dc.train_x0_box, &dc.train_u_box, 3, 5, &mut rng)
                .unwrap()
        };
        let a = gen(0);
        let b = gen(0);
        let c = gen(1);
        assert_relative_eq!(a[0].inputs, b[0].inputs);
        assert_relative_eq!(a[2].states, b[2].states);
        assert!((&a[0].inputs - &c[0].inputs).norm() > 0.0);
        for traj in &a {
            for t in 0..traj.inputs.ncols() {
                assert!(traj.inputs[(0, t)] >= -0.2 && traj.inputs[(0, t)] <= 0.0);
                assert!(traj.inputs[(1, t)] >= -0.1 && traj.inputs[(1, t)] <= 0.1);
            }
            for i in 0..3 {
                assert!(traj.states[(i, 0)].abs() <= 0.1);
            }
        }
    }

    #[test]
    fn default_ranges_cover_training_data() {
        let msd = preset(PresetName::MassSpringDamper);
        let (sr, ur) =
            default_ranges(&msd.model, &msd.train_x0_box, &msd.train_u_box, 20, 30).unwrap();
        assert_eq!(sr.len(), 2);
        assert_eq!(ur.len(), 1);
        // Symmetric, inflated beyond the initial box.
        assert!(sr[0].1 >= 0.2 && sr[0].0 == -sr[0].1);
        assert_relative_eq!(ur[0].1, 0.11, max_relative = 1e-12);
        let mut rng = rng_for_repetition(3, 0);
        let sample =
            sample_training_set(&msd.model, &msd.train_x0_box, &msd.train_u_box, 20, 30, &mut rng)
                .unwrap();
        for traj in &sample {
            for i in 0..2 {
                for t in 0..traj.states.ncols() {
                    assert!(traj.states[(i, t)] >= sr[i].0 && traj.states[(i, t)] <= sr[i].1);
                }
            }
        }
    }
}
