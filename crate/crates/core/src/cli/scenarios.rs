use serde::{Deserialize, Serialize};

use crate::dec::BoundaryCondition;
use crate::error::{Error, Result};
use crate::geometry::{build_mesh_with, MeshOptions, SurfaceDomain, TriMesh};
use crate::morse::{find_critical_points, ComplexSettings, ConnectionOptions, CriticalKind, CriticalPoint, MorseFunction};

/// Grid density used for critical point seeding in every scenario.
pub const GRID_DENSITY: usize = 40;
/// Newton tolerance for critical points.
pub const CRITICAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    /// The one-dimensional model-operator suite.
    Interval,
}

/// f(x) = ½ xᵀ A x + b·x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub domain: String,
    pub f: String,
    pub shape: Shape,
    pub function: Option<QuadraticSpec>,
    /// c_j + p_j.
    pub expected_absolute: Option<[usize; 3]>,
    /// c_j + q_{j-1}.
    pub expected_relative: Option<[usize; 3]>,
    /// Radius of the collars where the pseudo-gradient field is adapted.
    pub adaptation_radius: f64,
    /// Plateau radius of the quasimodes used by the comparison map.
    pub quasimode_radius: f64,
}

fn surface(
    name: &str,
    domain: &str,
    f: &str,
    shape: Shape,
    function: QuadraticSpec,
    counts: ([usize; 3], [usize; 3]),
    radii: (f64, f64),
) -> Scenario {
    Scenario {
        name: name.into(),
        domain: domain.into(),
        f: f.into(),
        shape,
        function: Some(function),
        expected_absolute: Some(counts.0),
        expected_relative: Some(counts.1),
        adaptation_radius: radii.0,
        quasimode_radius: radii.1,
    }
}

/// The shipped scenarios in their stable order.
pub fn registry() -> Vec<Scenario> {
    let x = QuadraticSpec { a: [[0.0; 2]; 2], b: [1.0, 0.0] };
    vec![
        surface(
            "disk_linear",
            "unit disk",
            "x",
            Shape::Disk { center: [0.0, 0.0], radius: 1.0 },
            x.clone(),
            ([1, 0, 0], [0, 0, 1]),
            (0.1, 0.45),
        ),
        surface(
            "annulus_linear",
            "annulus 0.5 < r < 1",
            "x",
            Shape::Annulus { center: [0.0, 0.0], inner: 0.5, outer: 1.0 },
            x,
            ([1, 1, 0], [0, 1, 1]),
            (0.05, 0.2),
        ),
        surface(
            "disk_saddle",
            "disk of radius 2",
            "x^2 - y^2",
            Shape::Disk { center: [0.0, 0.0], radius: 2.0 },
            QuadraticSpec { a: [[2.0, 0.0], [0.0, -2.0]], b: [0.0, 0.0] },
            ([2, 1, 0], [0, 1, 2]),
            (0.2, 0.8),
        ),
        surface(
            "disk_interior_min",
            "unit disk",
            "(x^2 + y^2)/2 + 0.1 x",
            Shape::Disk { center: [0.0, 0.0], radius: 1.0 },
            QuadraticSpec { a: [[1.0, 0.0], [0.0, 1.0]], b: [0.1, 0.0] },
            ([1, 0, 0], [1, 1, 1]),
            (0.1, 0.3),
        ),
        Scenario {
            name: "interval_robin".into(),
            domain: "half-line [0, L] and line [-L, L]".into(),
            f: "Robin half-line and oscillator".into(),
            shape: Shape::Interval,
            function: None,
            expected_absolute: None,
            expected_relative: None,
            adaptation_radius: 0.0,
            quasimode_radius: 0.0,
        },
    ]
}

/// Scenarios whose name contains `filter`; all of them for an empty filter.
pub fn list_scenarios(filter: &str) -> Vec<Scenario> {
    registry().into_iter().filter(|s| s.name.contains(filter)).collect()
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Configuration(format!("unknown scenario '{name}'")))
}

impl Scenario {
    pub fn is_surface(&self) -> bool {
        self.shape != Shape::Interval
    }

    pub fn expected(&self, bc: BoundaryCondition) -> Option<[usize; 3]> {
        match bc {
            BoundaryCondition::Absolute => self.expected_absolute,
            BoundaryCondition::Relative => self.expected_relative,
        }
    }

    pub fn surface_domain(&self) -> Result<SurfaceDomain> {
        match self.shape {
            Shape::Disk { center, radius } => SurfaceDomain::disk(center, radius),
            Shape::Annulus { center, inner, outer } => SurfaceDomain::annulus(center, inner, outer),
            Shape::Interval => Err(Error::Configuration(format!("{} has no surface domain", self.name))),
        }
    }

    pub fn morse_function(&self) -> Result<MorseFunction> {
        let q = self
            .function
            .as_ref()
            .ok_or_else(|| Error::Configuration(format!("{} has no Morse function", self.name)))?;
        Ok(MorseFunction::quadratic(self.f.clone(), q.a, q.b, 0.0))
    }

    pub fn complex_settings(&self) -> ComplexSettings {
        ComplexSettings {
            adaptation_radius: self.adaptation_radius,
            grid_density: GRID_DENSITY,
            tol: CRITICAL_TOL,
            connections: ConnectionOptions::default(),
        }
    }

    pub fn critical_points(&self) -> Result<Vec<CriticalPoint>> {
        Ok(find_critical_points(&self.morse_function()?, &self.surface_domain()?, GRID_DENSITY, CRITICAL_TOL)?.points)
    }

    /// Mesh with every critical point of f as a vertex.
    pub fn mesh(&self, target_h: f64) -> Result<TriMesh> {
        let points = self.critical_points()?;
        let opts = MeshOptions {
            boundary_features: points.iter().filter_map(|p| p.boundary).collect(),
            interior_features: points.iter().filter(|p| p.kind == CriticalKind::Interior).map(|p| p.location).collect(),
            ..Default::default()
        };
        build_mesh_with(&self.surface_domain()?, target_h, &opts)
    }
}
