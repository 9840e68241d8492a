//! Per-observation summary statistics `S: ℝ^m → ℝ^{m′}`.

use super::{FiniteStateModel, HiddenMarkovModel, ParameterBox, StateKind};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sampling::Trajectory;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

type SummaryFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A named map applied to every observation independently.
#[derive(Clone)]
pub struct Summary {
    name: String,
    out_dim: Option<usize>,
    map: SummaryFn,
}

impl fmt::Debug for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Summary({})", self.name)
    }
}

impl Summary {
    pub fn identity() -> Self {
        Summary {
            name: "identity".into(),
            out_dim: None,
            map: Arc::new(|y, out| out.copy_from_slice(y)),
        }
    }

    /// Componentwise absolute value.
    pub fn abs() -> Self {
        Summary {
            name: "abs".into(),
            out_dim: None,
            map: Arc::new(|y, out| {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v.abs();
                }
            }),
        }
    }

    /// Keep coordinate `i` only.
    pub fn project(i: usize) -> Self {
        Summary {
            name: format!("project_{i}"),
            out_dim: Some(1),
            map: Arc::new(move |y, out| out[0] = y[i]),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        out_dim: usize,
        map: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Summary {
            name: name.into(),
            out_dim: Some(out_dim),
            map: Arc::new(map),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::identity()),
            "abs" => Ok(Self::abs()),
            _ => match s.strip_prefix("project_").and_then(|i| i.parse().ok()) {
                Some(i) => Ok(Self::project(i)),
                None => Err(Error::config("summary", format!("unknown summary `{s}`"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        self.out_dim.unwrap_or(input_dim)
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        (self.map)(y, out)
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim(y.len())];
        self.apply_into(y, &mut out);
        out
    }
}

/// Replace every observation `Ŷ_k` by `S(Ŷ_k)`; hidden states are untouched
/// and the summary name is recorded in the metadata.
pub fn apply_summary(traj: &Trajectory, summary: &Summary) -> Trajectory {
    let m_out = summary.output_dim(traj.obs_dim());
    let mut obs = Vec::with_capacity(traj.len() * m_out);
    for row in traj.rows() {
        obs.extend(summary.apply(row));
    }
    let mut meta = traj.meta.clone();
    meta.summary = Some(match meta.summary.take() {
        Some(prev) => format!("{}∘{prev}", summary.name()),
        None => summary.name().to_string(),
    });
    Trajectory::from_parts(obs, m_out, traj.hidden.clone(), meta)
        .expect("summary preserves trajectory length")
}

/// The model observed through a summary: `{X_k, S(Y_k)}`.
#[derive(Debug, Clone)]
pub struct Summarized<M> {
    base: M,
    summary: Summary,
}

impl<M: HiddenMarkovModel> Summarized<M> {
    pub fn new(base: M, summary: Summary) -> Self {
        Summarized { base, summary }
    }
}

impl<M: HiddenMarkovModel> HiddenMarkovModel for Summarized<M> {
    type State = M::State;

    fn name(&self) -> String {
        format!("{}|{}", self.base.name(), self.summary.name())
    }
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }
    fn obs_dim(&self) -> usize {
        self.summary.output_dim(self.base.obs_dim())
    }
    fn state_kind(&self) -> StateKind {
        self.base.state_kind()
    }
    fn parameter_box(&self) -> ParameterBox {
        self.base.parameter_box()
    }
    fn sample_initial(&self, theta: &[f64], rng: &mut SimRng) -> Self::State {
        self.base.sample_initial(theta, rng)
    }
    fn sample_transition(&self, theta: &[f64], prev: &Self::State, rng: &mut SimRng) -> Self::State {
        self.base.sample_transition(theta, prev, rng)
    }
    fn sample_observation(&self, theta: &[f64], state: &Self::State, rng: &mut SimRng, out: &mut [f64]) {
        let mut raw = vec![0.0; self.base.obs_dim()];
        self.base.sample_observation(theta, state, rng, &mut raw);
        self.summary.apply_into(&raw, out);
    }
    fn state_coords(&self, state: &Self::State) -> Vec<f64> {
        self.base.state_coords(state)
    }
}

impl<M: FiniteStateModel> FiniteStateModel for Summarized<M> {
    fn num_states(&self) -> usize {
        self.base.num_states()
    }
    fn transition_matrix(&self, theta: &[f64]) -> DMatrix<f64> {
        self.base.transition_matrix(theta)
    }
    fn initial_distribution(&self, theta: &[f64]) -> DVector<f64> {
        self.base.initial_distribution(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::TrajectoryMeta;

    fn traj_2d() -> Trajectory {
        let obs = vec![1.0, -2.0, 3.0, -4.0, 5.0, 6.0];
        Trajectory::from_parts(obs, 2, Some(vec![vec![0.0], vec![1.0], vec![0.0]]), TrajectoryMeta::new("test", 1, vec![0.0]))
            .unwrap()
    }

    #[test]
    fn identity_leaves_observations() {
        let t = traj_2d();
        let s = apply_summary(&t, &Summary::identity());
        assert_eq!(s.observations(), t.observations());
        assert_eq!(s.hidden, t.hidden);
        assert_eq!(s.meta.summary.as_deref(), Some("identity"));
    }

    #[test]
    fn projection_changes_dimension_not_length() {
        let t = traj_2d();
        let s = apply_summary(&t, &Summary::project(1));
        assert_eq!(s.obs_dim(), 1);
        assert_eq!(s.len(), 3);
        assert_eq!(s.observations(), &[-2.0, -4.0, 6.0]);
    }

    #[test]
    fn parse_names() {
        assert_eq!(Summary::parse("project_3").unwrap().name(), "project_3");
        assert!(Summary::parse("median").is_err());
    }
}
