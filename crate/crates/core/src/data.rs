//! Measurement containers and construction of the data matrices `N` (for
//! parameter sets) and `M` (for system sets) from raw data.

use nalgebra::DMatrix;

use crate::control::SystemSet;
use crate::error::{Error, Result};
use crate::linalg::full_row_rank;
use crate::qmi::{NoiseModel, ParameterSet, PartitionedSymmetric};

/// Measurements `(Y, Phi)` of an unknown function together with their noise
/// model. `Y` is `m x T`, `Phi` is `k x T`; the optional sample points are
/// `n x T`.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DMatrix<f64>,
    phi: DMatrix<f64>,
    points: Option<DMatrix<f64>>,
    noise: NoiseModel,
}

impl Dataset {
    pub fn new(
        y: DMatrix<f64>,
        phi: DMatrix<f64>,
        points: Option<DMatrix<f64>>,
        noise: NoiseModel,
    ) -> Result<Self> {
        let t = noise.samples();
        if y.ncols() != t || phi.ncols() != t {
            return Err(Error::DimensionMismatch(format!(
                "Y has {} columns, Phi has {}, noise model expects T = {t}",
                y.ncols(),
                phi.ncols()
            )));
        }
        if y.nrows() != noise.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "Y has {} rows, noise model expects m = {}",
                y.nrows(),
                noise.output_dim()
            )));
        }
        if let Some(p) = &points {
            if p.ncols() != t {
                return Err(Error::DimensionMismatch(
                    "sample points must have T columns".into(),
                ));
            }
        }
        Ok(Dataset {
            y,
            phi,
            points,
            noise,
        })
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn points(&self) -> Option<&DMatrix<f64>> {
        self.points.as_ref()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn output_dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn basis_count(&self) -> usize {
        self.phi.nrows()
    }

    pub fn samples(&self) -> usize {
        self.y.ncols()
    }
}

/// `N = [[I, Y], [0, -Phi]] Pi [[I, Y], [0, -Phi]]^T` with split `(m, k)`.
/// The compact flag is decided by the row rank of `Phi`.
pub fn build_parameter_set(data: &Dataset) -> ParameterSet {
    let (m, k, t) = (data.output_dim(), data.basis_count(), data.samples());
    let mut b = DMatrix::zeros(m + k, m + t);
    b.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
    b.view_mut((0, m), (m, t)).copy_from(&data.y);
    b.view_mut((m, m), (k, t)).copy_from(&(-&data.phi));
    let n_full = &b * data.noise().pi().assemble() * b.transpose();
    let n = PartitionedSymmetric::from_full(&n_full, m).expect("N assembly");
    ParameterSet::from_data_matrix(n).with_compact_flag(full_row_rank(&data.phi))
}

/// State/input measurements of `x_{k+1} = A x_k + B u_k + w_k`: a state
/// sequence `x_0..x_T` (`n x (T+1)`) and input sequence `u_0..u_{T-1}`
/// (`r x T`), with a noise model of split `(n, T)`.
#[derive(Debug, Clone)]
pub struct SystemDataset {
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
    noise: NoiseModel,
}

impl SystemDataset {
    pub fn new(states: DMatrix<f64>, inputs: DMatrix<f64>, noise: NoiseModel) -> Result<Self> {
        let t = noise.samples();
        if states.ncols() != t + 1 {
            return Err(Error::DimensionMismatch(format!(
                "state sequence has {} columns, expected T+1 = {}",
                states.ncols(),
                t + 1
            )));
        }
        if inputs.ncols() != t {
            return Err(Error::DimensionMismatch(format!(
                "input sequence has {} columns, expected T = {t}",
                inputs.ncols()
            )));
        }
        if states.nrows() != noise.output_dim() {
            return Err(Error::DimensionMismatch(
                "state dimension must match the noise model split".into(),
            ));
        }
        Ok(SystemDataset {
            states,
            inputs,
            noise,
        })
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    /// Stacked regressor `[X_-; U_-]` of shape `(n+r) x T`.
    pub fn stacked_regressor(&self) -> DMatrix<f64> {
        let (n, r) = (self.state_dim(), self.input_dim());
        let t = self.inputs.ncols();
        let mut z = DMatrix::zeros(n + r, t);
        z.view_mut((0, 0), (n, t))
            .copy_from(&self.states.view((0, 0), (n, t)).into_owned());
        z.view_mut((n, 0), (r, t)).copy_from(&self.inputs);
        z
    }

    /// Successor states `X_+ = [x_1 ... x_T]`.
    pub fn successors(&self) -> DMatrix<f64> {
        let n = self.state_dim();
        let t = self.inputs.ncols();
        self.states.view((0, 1), (n, t)).into_owned()
    }
}

/// `Sigma = Z(M)` built exactly like `N` with `Y -> X_+` and
/// `Phi -> [X_-; U_-]`; members are `(n+r) x n` matrices `[A^T; B^T]`.
pub fn build_system_set(data: &SystemDataset) -> SystemSet {
    let x_plus = data.successors();
    let z = data.stacked_regressor();
    let ds = Dataset::new(x_plus, z.clone(), None, data.noise().clone()).expect("dims checked");
    let set = build_parameter_set(&ds);
    SystemSet::new(set, data.state_dim(), data.input_dim())
}
