//! Python bindings for the LSA toolkit: group algebra, the width-5
//! branching-program compiler, scene rendering, and the error-compounding
//! simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use lsa_core::barrington;
use lsa_core::evalrec::{compounding_sim, NoiseModel};
use lsa_core::groups;
use lsa_core::scene;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn resolve_group(group: &str, degree: Option<usize>) -> PyResult<groups::GroupSpec> {
    if let Some(spec) = groups::preset(group) {
        return Ok(spec);
    }
    if group.contains('(') {
        let parts: Vec<&str> = group.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
        return groups::GroupSpec::from_cycle_strings(&parts, degree).map_err(value_err);
    }
    Err(value_err(format!(
        "unknown group {group:?}; use a preset ({}) or ';'-separated cycle notation",
        groups::preset_names().join(", ")
    )))
}

/// Derived-series orders and solvability class of a group given by a preset
/// name or ';'-separated cycle-notation generators.
#[pyfunction]
#[pyo3(signature = (group, degree=None))]
fn derived_series(group: &str, degree: Option<usize>) -> PyResult<(Vec<usize>, String)> {
    let spec = resolve_group(group, degree)?;
    let class = groups::derived_series(&spec).map_err(runtime_err)?;
    Ok((class.series_orders, format!("{:?}", class.level)))
}

/// Evaluate a word like "g0 g1^-1" over a group's generators; returns
/// (is_identity, product in cycle notation).
#[pyfunction]
#[pyo3(signature = (group, word, degree=None))]
fn word_eval(group: &str, word: &str, degree: Option<usize>) -> PyResult<(bool, String)> {
    let spec = resolve_group(group, degree)?;
    let terms = groups::parse_word(word).map_err(value_err)?;
    let result = groups::word_evaluate(&spec, &terms).map_err(value_err)?;
    let rendered = match &result {
        groups::GroupElement::Perm(p) => p.cycle_notation(),
        groups::GroupElement::Matrix(m) => format!("{m:?}"),
    };
    Ok((result.is_identity(), rendered))
}

/// Compose two permutations given in cycle notation: returns a·b (b first).
#[pyfunction]
#[pyo3(signature = (a, b, degree=None))]
fn compose_cycles(a: &str, b: &str, degree: Option<usize>) -> PyResult<String> {
    let pa = groups::Permutation::from_cycles(a, degree).map_err(value_err)?;
    let pb = groups::Permutation::from_cycles(b, degree).map_err(value_err)?;
    let n = pa.degree().max(pb.degree());
    let pa = groups::Permutation::from_cycles(a, Some(n)).map_err(value_err)?;
    let pb = groups::Permutation::from_cycles(b, Some(n)).map_err(value_err)?;
    Ok(pa.compose(&pb).map_err(value_err)?.cycle_notation())
}

/// A compiled width-5 permutation branching program.
#[pyclass]
struct BranchingProgram {
    inner: barrington::BranchingProgram,
    depth: usize,
    num_vars: usize,
}

#[pymethods]
impl BranchingProgram {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.depth
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[getter]
    fn accept_cycle(&self) -> String {
        self.inner.accept_cycle.cycle_notation()
    }

    /// Program product on an assignment, in cycle notation.
    fn evaluate(&self, assignment: Vec<bool>) -> PyResult<String> {
        barrington::evaluate(&self.inner, &assignment)
            .map(|p| p.cycle_notation())
            .map_err(value_err)
    }

    /// True iff the product equals the accept cycle.
    fn decide(&self, assignment: Vec<bool>) -> PyResult<bool> {
        barrington::decide(&self.inner, &assignment).map_err(runtime_err)
    }

    /// Instructions as (var, perm_if_false, perm_if_true) triples.
    fn instructions(&self) -> Vec<(usize, String, String)> {
        self.inner
            .instructions
            .iter()
            .map(|i| (i.var, i.if_false.cycle_notation(), i.if_true.cycle_notation()))
            .collect()
    }
}

/// Compile a Boolean formula (`f := xN | !f | (f & f) | (f | f)`) into a
/// program over A₅ that multiplies to the accept cycle exactly on
/// satisfying assignments.
#[pyfunction]
fn compile_formula(formula: &str) -> PyResult<BranchingProgram> {
    let parsed = barrington::parse_formula(formula).map_err(value_err)?;
    let program =
        barrington::compile(&parsed, &barrington::default_sigma()).map_err(runtime_err)?;
    Ok(BranchingProgram { inner: program, depth: parsed.depth(), num_vars: parsed.num_vars() })
}

/// The six generators of a benchmark level, as dicts.
#[pyfunction]
fn level_generators(py: Python<'_>, level: u8) -> PyResult<Vec<Py<PyDict>>> {
    let level = scene::Level::from_index(level).map_err(value_err)?;
    scene::level_generators(level)
        .iter()
        .map(|g| {
            let d = PyDict::new_bound(py);
            d.set_item("index", g.index)?;
            d.set_item("name", g.name)?;
            match &g.kind {
                scene::ActionKind::Translate2D { v } => {
                    d.set_item("kind", "translate2d")?;
                    d.set_item("v", v.to_vec())?;
                }
                scene::ActionKind::Scale2D { factor } => {
                    d.set_item("kind", "scale2d")?;
                    d.set_item("factor", *factor)?;
                }
                scene::ActionKind::Rotate3D { axis, angle_deg } => {
                    d.set_item("kind", "rotate3d")?;
                    d.set_item("axis", axis.label())?;
                    d.set_item("angle_deg", *angle_deg)?;
                }
                scene::ActionKind::Scale3D { factor } => {
                    d.set_item("kind", "scale3d")?;
                    d.set_item("factor", *factor)?;
                }
                scene::ActionKind::Translate3D { v } => {
                    d.set_item("kind", "translate3d")?;
                    d.set_item("v", v.to_vec())?;
                }
            }
            Ok(d.unbind())
        })
        .collect()
}

/// Vertex and face counts of the procedural asymmetric mesh for a seed.
#[pyfunction]
fn mesh_stats(seed: u64) -> (usize, usize) {
    let mesh = scene::generate_mesh(seed);
    (mesh.vertices.len(), mesh.faces.len())
}

/// Render the pose reached by applying `actions` (generator indices) from
/// the canonical pose; returns the frame as binary PGM bytes.
#[pyfunction]
fn render_pose(py: Python<'_>, mesh_seed: u64, level: u8, actions: Vec<usize>) -> PyResult<Py<PyBytes>> {
    let level = scene::Level::from_index(level).map_err(value_err)?;
    let mesh = scene::generate_mesh(mesh_seed);
    let generators = scene::level_generators(level);
    let state = scene::apply_sequence(&scene::PoseState::initial(level), &generators, &actions)
        .map_err(value_err)?;
    let frame = scene::render(&state, &mesh);
    Ok(PyBytes::new_bound(py, &frame.to_pgm_bytes()).unbind())
}

/// Sample a random walk; returns (action indices, one PGM byte string per
/// recorded step).
#[pyfunction]
fn random_walk(
    py: Python<'_>,
    mesh_seed: u64,
    level: u8,
    length: usize,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<Py<PyBytes>>)> {
    let level = scene::Level::from_index(level).map_err(value_err)?;
    let mesh = scene::generate_mesh(mesh_seed);
    let traj = scene::random_walk(&mesh, 0, level, length, seed, true).map_err(value_err)?;
    let frames = traj
        .frames
        .iter()
        .map(|f| PyBytes::new_bound(py, &f.to_pgm_bytes()).unbind())
        .collect();
    Ok((traj.actions, frames))
}

/// Mean relative divergence per step of a noisy recursive rollout over the
/// icosahedral rotation generators.
#[pyfunction]
#[pyo3(signature = (epsilon, steps, trials=1000, seed=42))]
fn compounding_curve(epsilon: f64, steps: usize, trials: usize, seed: u64) -> PyResult<Vec<f64>> {
    let generators = groups::icosahedral_so3_generators();
    compounding_sim(
        epsilon,
        steps,
        &generators,
        trials,
        seed,
        NoiseModel::MultiplicativeRandom,
    )
    .map_err(value_err)
}

#[pymodule]
fn lsa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(derived_series, m)?)?;
    m.add_function(wrap_pyfunction!(word_eval, m)?)?;
    m.add_function(wrap_pyfunction!(compose_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(compile_formula, m)?)?;
    m.add_function(wrap_pyfunction!(level_generators, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_stats, m)?)?;
    m.add_function(wrap_pyfunction!(render_pose, m)?)?;
    m.add_function(wrap_pyfunction!(random_walk, m)?)?;
    m.add_function(wrap_pyfunction!(compounding_curve, m)?)?;
    m.add_class::<BranchingProgram>()?;
    Ok(())
}
