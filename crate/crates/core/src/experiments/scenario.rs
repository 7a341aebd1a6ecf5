use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{place_nodes, NodeSet, VoxelGrid};
use crate::solvers::{Solver, SolverConfig};
use crate::tensor::{DenseTensor, TensorShape};

const PRESETS: [(&str, &str); 3] = [
    ("d2", include_str!("../../../../presets/d2.scenario")),
    ("d3", include_str!("../../../../presets/d3.scenario")),
    ("d4", include_str!("../../../../presets/d4.scenario")),
];

/// Links drawn per interval: one count for every interval, or an explicit
/// schedule with one entry per interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measurements {
    PerInterval(usize),
    Schedule(Vec<usize>),
}

/// Axis-aligned block of constant loss, in voxel coordinates (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstruction {
    /// Lowest voxel corner `[n1, n2]` or `[n1, n2, n3]`. A two-entry box
    /// spans the full height of a volumetric grid.
    pub origin: Vec<usize>,
    /// Extent in voxels along each axis, same length as `origin`.
    pub size: Vec<usize>,
    /// Loss in dB per unit length.
    pub value: f64,
    /// Time intervals (0-based) in which the block is present. All when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `[N1, N2]`, `[N1, N2, N3]` or `[N1, N2, N3, N4]`; missing trailing
    /// extents are 1. The last entry counts time intervals.
    pub grid: Vec<usize>,
    #[serde(default = "one")]
    pub voxel_size: f64,
    pub nodes: usize,
    pub measurements: Measurements,
    #[serde(default)]
    pub eta: f64,
    pub solvers: Vec<Solver>,
    #[serde(default)]
    pub seed: u64,
    pub runs: usize,
    /// Also admit links between nodes on the same face of the region.
    #[serde(default)]
    pub allow_same_side: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, rename = "obstruction")]
    pub obstructions: Vec<Obstruction>,
}

fn one() -> f64 {
    1.0
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<scenario>"),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario file. `path` may omit the `.scenario` extension, and
    /// the names `d2`, `d3`, `d4` (optionally prefixed by `presets/`) fall
    /// back to the built-in presets when no such file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let with_ext = path.with_extension("scenario");
        let candidate = [path, with_ext.as_path()].into_iter().find(|p| p.is_file());
        let Some(file) = candidate else {
            if let Some(preset) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|stem| Scenario::preset(stem).ok())
            {
                return Ok(preset);
            }
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such scenario file or preset"),
            ));
        };
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let s: Scenario = toml::from_str(&text).map_err(|e| Error::Parse {
            path: file.to_path_buf(),
            message: e.to_string(),
        })?;
        s.validate().map_err(|e| Error::Parse {
            path: file.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(s)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Scenario::from_toml(text))
            .unwrap_or_else(|| {
                Err(Error::invalid(format!("unknown preset '{name}' (expected d2, d3 or d4)")))
            })
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains([',', '\n', '"']) {
            return Err(Error::invalid("scenario name must be nonempty without commas or quotes"));
        }
        if !(2..=4).contains(&self.grid.len()) || self.grid.contains(&0) {
            return Err(Error::invalid(format!(
                "grid must list 2 to 4 positive extents, got {:?}",
                self.grid
            )));
        }
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return Err(Error::invalid("voxel_size must be positive"));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta must be finite and >= 0"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.solvers.is_empty() {
            return Err(Error::invalid("select at least one solver"));
        }
        let order = self.order();
        if self.solvers.contains(&Solver::Matrix) && order != 2 {
            return Err(Error::invalid(format!(
                "the matrix solver needs a two-way field, this scenario has order {order}"
            )));
        }
        self.solver.validate()?;
        let counts = self.measurements_per_interval()?;
        if counts.contains(&0) {
            return Err(Error::invalid("every interval needs at least one measurement"));
        }
        self.grid_geometry()?;
        let dims = self.dims();
        for (i, ob) in self.obstructions.iter().enumerate() {
            if !(ob.value >= 0.0) || !ob.value.is_finite() {
                return Err(Error::invalid(format!("obstruction {i}: value must be finite and >= 0")));
            }
            let len = ob.origin.len();
            if !(2..=3).contains(&len) || ob.size.len() != len {
                return Err(Error::invalid(format!(
                    "obstruction {i}: origin and size need 2 or 3 matching entries"
                )));
            }
            let mut axes = ob.origin.iter().zip(&ob.size).zip(&dims);
            if let Some(a) = axes.position(|((&o, &s), &n)| s == 0 || o + s > n) {
                return Err(Error::invalid(format!(
                    "obstruction {i}: box leaves the grid along axis {}",
                    a + 1
                )));
            }
            if let Some(ts) = &ob.intervals {
                if let Some(t) = ts.iter().find(|&&t| t >= dims[3]) {
                    return Err(Error::invalid(format!(
                        "obstruction {i}: interval {t} outside 0..{}",
                        dims[3]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `[N1, N2, N3, N4]`.
    pub fn dims(&self) -> [usize; 4] {
        let mut d = [1; 4];
        d[..self.grid.len()].copy_from_slice(&self.grid);
        d
    }

    pub fn intervals(&self) -> usize {
        self.dims()[3]
    }

    pub fn field_shape(&self) -> Result<TensorShape> {
        self.grid_geometry()?.field_shape(self.intervals())
    }

    /// Order of the loss field tensor.
    pub fn order(&self) -> usize {
        let d = self.dims();
        2 + usize::from(d[2] > 1) + usize::from(d[3] > 1)
    }

    /// Number of entries of the loss field.
    pub fn field_len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn grid_geometry(&self) -> Result<VoxelGrid> {
        let d = self.dims();
        VoxelGrid::new([d[0], d[1], d[2]], self.voxel_size, [0.0; 3])
    }

    pub fn node_set(&self) -> Result<NodeSet> {
        place_nodes(&self.grid_geometry()?, self.nodes)
    }

    pub fn measurements_per_interval(&self) -> Result<Vec<usize>> {
        let t = self.intervals();
        match &self.measurements {
            Measurements::PerInterval(m) => Ok(vec![*m; t]),
            Measurements::Schedule(ms) if ms.len() == t => Ok(ms.clone()),
            Measurements::Schedule(ms) => Err(Error::invalid(format!(
                "measurement schedule has {} entries for {t} intervals",
                ms.len()
            ))),
        }
    }

    pub fn total_measurements(&self) -> usize {
        self.measurements_per_interval()
            .map(|v| v.iter().sum())
            .unwrap_or(0)
    }

    /// Splits `total` links as evenly as possible across the intervals,
    /// earlier intervals taking the remainder.
    pub fn with_total_measurements(mut self, total: usize) -> Result<Self> {
        let t = self.intervals();
        if total < t {
            return Err(Error::invalid(format!(
                "{total} measurements cannot cover {t} intervals"
            )));
        }
        self.measurements = if total.is_multiple_of(t) {
            Measurements::PerInterval(total / t)
        } else {
            Measurements::Schedule((0..t).map(|i| total / t + usize::from(i < total % t)).collect())
        };
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("eta must be finite and >= 0, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    /// `M / (N1 N2 N3 N4)`.
    pub fn gamma(&self) -> f64 {
        self.total_measurements() as f64 / self.field_len() as f64
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dims();
        write!(
            f,
            "{}: D={} grid {}x{}x{}x{}, {} nodes, M={} ({:?} per interval), eta={}, runs={}, solvers=",
            self.name,
            self.order(),
            d[0],
            d[1],
            d[2],
            d[3],
            self.nodes,
            self.total_measurements(),
            self.measurements_per_interval().unwrap_or_default(),
            self.eta,
            self.runs
        )?;
        let names: Vec<&str> = self.solvers.iter().map(|s| s.name()).collect();
        write!(f, "{}, reg={}", names.join("/"), self.solver.reg)
    }
}

/// The loss field the scenario describes: obstruction values inside their
/// boxes in the listed intervals, zero elsewhere. Overlapping boxes must
/// agree on their value.
pub fn build_truth(scenario: &Scenario) -> Result<DenseTensor> {
    let shape = scenario.field_shape()?;
    let [n1, n2, n3, n4] = scenario.dims();
    let mut values = vec![0.0; shape.len()];
    let mut owner: Vec<Option<usize>> = vec![None; shape.len()];
    for (i, ob) in scenario.obstructions.iter().enumerate() {
        let (z0, z1) = if ob.origin.len() == 3 {
            (ob.origin[2], ob.origin[2] + ob.size[2])
        } else {
            (0, n3)
        };
        let all: Vec<usize> = (0..n4).collect();
        let intervals = ob.intervals.as_deref().unwrap_or(&all);
        for a in ob.origin[0]..ob.origin[0] + ob.size[0] {
            for b in ob.origin[1]..ob.origin[1] + ob.size[1] {
                for c in z0..z1 {
                    for &t in intervals {
                        debug_assert!(a < n1 && b < n2 && c < n3 && t < n4);
                        let idx = ((a * n2 + b) * n3 + c) * n4 + t;
                        if let Some(j) = owner[idx] {
                            if values[idx] != ob.value {
                                return Err(Error::invalid(format!(
                                    "obstructions {j} and {i} overlap with different values"
                                )));
                            }
                        }
                        owner[idx] = Some(i);
                        values[idx] = ob.value;
                    }
                }
            }
        }
    }
    DenseTensor::from_vec(shape, values)
}
